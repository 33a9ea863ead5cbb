"""Pure-numpy kernels (fallback backend).

Array conventions shared with the numba backend:

  hs    (K, K, N, M) complex  gathered channels, hs[i, j] = channel from the
                              BS serving user j to user i
  v     (K, M) complex        transmit beamformers, one row per user
  chi   (K, N) complex        quadratic-transform auxiliary vectors
  u     (K, N) complex        receive beamformers
  gains (K, K) float          scalar power gains, gains[k, j] = |h from the
                              transmitter of user j to receiver k|^2

All functions are pure and allocate their outputs.
"""

import numpy as np

BACKEND = "numpy"


def _pair_products(hs, v):
    # t[i, j] = hs[i, j] @ v[j]
    return np.einsum("ijnm,jm->ijn", hs, v, optimize=True)


def bf_true_rates(hs, v, sigma2):
    """Per-user rates log(1 + a^H B^-1 a) with B the interference covariance."""
    k = hs.shape[0]
    t = _pair_products(hs, v)
    own = t[np.arange(k), np.arange(k)]
    cov = np.einsum("ijn,ijp->inp", t, t.conj(), optimize=True)
    cov -= np.einsum("in,ip->inp", own, own.conj())
    n = hs.shape[2]
    cov[:, np.arange(n), np.arange(n)] += sigma2
    z = np.linalg.solve(cov, own[..., None])[..., 0]
    s = np.einsum("in,in->i", own.conj(), z).real
    return np.log1p(np.maximum(s, 0.0))


def bf_chi_opt(hs, v, sigma2):
    """Optimal quadratic-transform auxiliaries chi = B^-1 a per user."""
    k = hs.shape[0]
    t = _pair_products(hs, v)
    own = t[np.arange(k), np.arange(k)]
    cov = np.einsum("ijn,ijp->inp", t, t.conj(), optimize=True)
    cov -= np.einsum("in,ip->inp", own, own.conj())
    n = hs.shape[2]
    cov[:, np.arange(n), np.arange(n)] += sigma2
    return np.linalg.solve(cov, own[..., None])[..., 0]


def bf_aux_prelog(hs, v, chi, sigma2):
    """Pre-log arguments 2 Re(chi^H a) - chi^H B chi of the transformed rates."""
    k = hs.shape[0]
    t = _pair_products(hs, v)
    m = np.einsum("in,ijn->ij", chi.conj(), t, optimize=True)
    mdiag = m[np.arange(k), np.arange(k)]
    quad = (np.abs(m) ** 2).sum(axis=1) - np.abs(mdiag) ** 2
    quad += sigma2 * (np.abs(chi) ** 2).sum(axis=1)
    return 2.0 * mdiag.real - quad


def bf_aux_grad(hs, v, chi, coef):
    """Conjugate gradient of sum_i coef_i * prelog_i with respect to each v_j.

    Returned as a (K, M) complex array of d/dv_j^* derivatives.
    """
    k = hs.shape[0]
    t = _pair_products(hs, v)
    m = np.einsum("in,ijn->ij", chi.conj(), t, optimize=True)
    p = np.einsum("ijnm,in->ijm", hs.conj(), chi, optimize=True)
    w = coef[:, None] * m
    cross = np.einsum("ij,ijm->jm", w, p, optimize=True)
    pdiag = p[np.arange(k), np.arange(k)]
    mdiag = m[np.arange(k), np.arange(k)]
    return coef[:, None] * pdiag + (coef * mdiag)[:, None] * pdiag - cross


def bf_mmse_receivers(hs, v, sigma2):
    """MMSE receive beamformers and the resulting per-user MMSE values.

    The receive covariance here includes the own-signal term.
    """
    k = hs.shape[0]
    t = _pair_products(hs, v)
    own = t[np.arange(k), np.arange(k)]
    cov = np.einsum("ijn,ijp->inp", t, t.conj(), optimize=True)
    n = hs.shape[2]
    cov[:, np.arange(n), np.arange(n)] += sigma2
    u = np.linalg.solve(cov, own[..., None])[..., 0]
    e = 1.0 - np.einsum("in,in->i", own.conj(), u).real
    return u, np.clip(e, 1e-300, 1.0)


def bf_mse_values(hs, v, u, sigma2):
    """Symbol-estimation MSE per user for fixed receive beamformers."""
    k = hs.shape[0]
    t = _pair_products(hs, v)
    mu = np.einsum("in,ijn->ij", u.conj(), t, optimize=True)
    mudiag = mu[np.arange(k), np.arange(k)]
    e = np.abs(1.0 - mudiag) ** 2
    e += (np.abs(mu) ** 2).sum(axis=1) - np.abs(mudiag) ** 2
    e += sigma2 * (np.abs(u) ** 2).sum(axis=1)
    return e


def bf_mse_grad(hs, v, u, coef):
    """Conjugate gradient of sum_i coef_i * mse_i with respect to each v_j."""
    k = hs.shape[0]
    t = _pair_products(hs, v)
    mu = np.einsum("in,ijn->ij", u.conj(), t, optimize=True)
    q = np.einsum("ijnm,in->ijm", hs.conj(), u, optimize=True)
    w = coef[:, None] * mu
    cross = np.einsum("ij,ijm->jm", w, q, optimize=True)
    qdiag = q[np.arange(k), np.arange(k)]
    mudiag = mu[np.arange(k), np.arange(k)]
    own = -coef[:, None] * (1.0 - mudiag)[:, None] * qdiag
    return own + cross - (coef * mudiag)[:, None] * qdiag


def pc_sinr(gains, p, sigma2):
    """Signal power A_k and interference-plus-noise power B_k per user."""
    direct = np.diag(gains)
    a = p * direct
    b = gains @ p - a + sigma2
    return a, b


def pc_qft_grad(gains, p, x, coef, p_floor):
    """Gradient of sum_k coef_k * (2 x_k sqrt(A_k) - x_k^2 B_k) w.r.t. p.

    The sqrt slope is evaluated at max(p, p_floor) so it stays bounded when
    a power hits zero mid-solve; values elsewhere are exact.
    """
    direct = np.diag(gains)
    own = coef * x * np.sqrt(direct / np.maximum(p, p_floor))
    t = coef * x * x
    cross = gains.T @ t - direct * t
    return own - cross


def pc_lft_grad(gains, p, x, coef, sigma2):
    """Gradient of sum_k coef_k * (-x_k B_k + log(x_k (A_k + B_k)) + 1) w.r.t. p."""
    direct = np.diag(gains)
    a, b = pc_sinr(gains, p, sigma2)
    t = coef * (1.0 / (a + b) - x)
    own = coef * direct / (a + b)
    cross = gains.T @ t - direct * t
    return own + cross
