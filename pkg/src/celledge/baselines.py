"""Benchmark schemes: weighted sum-rate via WMMSE (beamforming and scalar
power variants), channel-weighted and proportional-fair weightings,
zero-forcing with out-of-cell nulling, and the random/equal power policies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .innersolver import BandSimplexBox
from .netmodel import gather_serving, power_rates
from .powercontrol import ewma_update

PF_RATE_FLOOR = 1e-6  # nats; reciprocal weights are floored here


def pf_weights(rbar, floor=PF_RATE_FLOOR):
    """Proportional-fair weights: reciprocal averaged rates, floored."""
    return 1.0 / np.maximum(np.asarray(rbar, dtype=float), floor)


def cwsr_weights(h, serving):
    """Weights inversely proportional to direct-channel strength, sum K."""
    k = len(serving)
    w = np.array([1.0 / np.linalg.norm(h[i, serving[i]]) for i in range(k)])
    return w * (k / w.sum())


def equal_power(p_max, n_users, n_bands=1):
    """p_max split evenly over the bands of every user; shape (K, F)."""
    return np.full((n_users, n_bands), p_max / n_bands)


def raw_power_draws(policy, p_max, n_users, n_bands, rng):
    """Pre-projection draws: uniform in [0, p_max/F]; rayleigh with scale
    p_max * sqrt(1/2pi) (mean p_max/2); exponential with unit mean."""
    shape = (n_users, n_bands)
    if policy == "uniform":
        return rng.uniform(0.0, p_max / n_bands, size=shape)
    if policy == "rayleigh":
        return rng.rayleigh(scale=p_max * np.sqrt(1.0 / (2.0 * np.pi)), size=shape)
    if policy == "exponential":
        return rng.exponential(1.0, size=shape)
    raise ValueError(f"unknown random power policy {policy!r}")


def random_power(policy, p_max, n_users, n_bands, rng):
    """Random band powers projected onto the per-user band simplex."""
    return BandSimplexBox(p_max).project(raw_power_draws(policy, p_max, n_users, n_bands, rng))


def zf_nulling(h, scenario, n_null, strict=True):
    """Zero-forcing beamformers that additionally null strong out-of-cell users.

    Single-antenna users only. Per BS, the spatial degrees of freedom cover
    the in-cell users plus the `n_null` out-of-cell users with the strongest
    channel from this BS; beamformers are the in-cell columns of the right
    pseudo-inverse of the stacked channel rows, each carrying p_max / K_b.
    """
    if scenario.rx_antennas != 1:
        raise ValueError("zero-forcing with nulling expects single-antenna users")
    m = scenario.tx_antennas
    k = scenario.n_users
    v = np.zeros((k, m), dtype=np.complex128)
    for b in range(scenario.n_cells):
        cell = scenario.users_of_cell(b)
        if cell.size + n_null > m:
            raise ValueError(f"cell {b}: {cell.size} users + {n_null} nulls exceed {m} antennas")
        others = np.nonzero(scenario.serving != b)[0]
        strength = np.linalg.norm(h[others, b, 0, :], axis=1)
        nulled = others[np.argsort(-strength, kind="stable")[:n_null]]
        rows = np.vstack([h[i, b, 0, :] for i in np.concatenate([cell, nulled])])
        if np.linalg.matrix_rank(rows) < rows.shape[0]:
            if strict:
                raise np.linalg.LinAlgError(f"cell {b}: stacked channel rows are rank deficient")
            continue
        pinv = np.linalg.pinv(rows)
        per_user = scenario.p_max_w / cell.size
        for col, i in enumerate(cell):
            col_vec = pinv[:, col]
            v[i] = np.sqrt(per_user) * col_vec / np.linalg.norm(col_vec)
    return v


# ---------------------------------------------------------------------------
# Weighted sum-rate WMMSE
# ---------------------------------------------------------------------------


@dataclass
class WsrResult:
    solution: np.ndarray
    wsr_trace: np.ndarray  # true weighted sum-rate after each full cycle


def _per_bs_v_update(hs, u, coef, serving, n_cells, p_max):
    """Closed-form transmit update: v_k = (A_b + mu_b I)^-1 c_k with mu_b >= 0
    bisected so each BS meets its power budget."""
    k, _, _, m = hs.shape
    v = np.empty((k, m), dtype=np.complex128)
    # q[j, b] = (channel from BS b to user j)^H u_j, evaluated via any user of b
    for b in range(n_cells):
        cell = np.nonzero(serving == b)[0]
        rep = cell[0]
        q = np.einsum("jnm,jn->jm", hs[:, rep].conj(), u, optimize=True)  # (K, M)
        a_b = np.einsum("j,jm,jp->mp", coef, q, q.conj(), optimize=True)
        lam, vec = np.linalg.eigh(a_b)
        lam = np.maximum(lam, 0.0)
        d = np.array([coef[i] * (vec.conj().T @ q[i]) for i in cell])  # (K_b, M)
        d2 = (np.abs(d) ** 2)

        def power(mu):
            return float((d2 / (lam + mu) ** 2).sum())

        mu = 0.0
        if lam.min() <= 1e-300 or power(0.0) > p_max:
            hi = max(np.sqrt(d2.sum() / p_max), 1e-30)
            lo = 0.0
            for _ in range(120):
                mid = 0.5 * (lo + hi)
                if power(mid) > p_max:
                    lo = mid
                else:
                    hi = mid
            mu = hi
        for row, i in enumerate(cell):
            v[i] = vec @ (d[row] / (lam + mu))
    return v


def wmmse_wsr_beamforming(scenario, h, weights, v0, max_iters=150, tol_rel=1e-6):
    """Classic WMMSE cycle for weighted sum-rate beamforming (per-BS power)."""
    sigma2 = scenario.noise_power_w
    hs = gather_serving(h, scenario.serving)
    weights = np.asarray(weights, dtype=float)
    v = np.array(v0, dtype=np.complex128)
    trace = [float(weights @ kernels.bf_true_rates(hs, v, sigma2))]
    for _ in range(max_iters):
        u, e = kernels.bf_mmse_receivers(hs, v, sigma2)
        coef = weights / e  # beta_k * w_k with w_k = 1/e_k
        v = _per_bs_v_update(hs, u, coef, scenario.serving, scenario.n_cells,
                             scenario.p_max_w)
        wsr = float(weights @ kernels.bf_true_rates(hs, v, sigma2))
        trace.append(wsr)
        if abs(trace[-1] - trace[-2]) <= tol_rel * (1.0 + abs(trace[-2])):
            break
    return WsrResult(solution=v, wsr_trace=np.array(trace))


def wmmse_wsr_power(gains, weights, p0, sigma2, p_max, max_iters=200, tol_rel=1e-8):
    """Scalar WMMSE for weighted sum-rate power control on one band."""
    gains = np.asarray(gains, dtype=float)
    weights = np.asarray(weights, dtype=float)
    amp = np.sqrt(gains)
    diag_amp = np.diag(amp)
    v = np.sqrt(np.clip(np.asarray(p0, dtype=float), 0.0, p_max))
    vmax = np.sqrt(p_max)
    trace = [float(weights @ power_rates(gains, v * v, sigma2))]
    for _ in range(max_iters):
        denom = gains @ (v * v) + sigma2
        u = diag_amp * v / denom
        e = 1.0 - u * diag_amp * v
        w = 1.0 / e
        coef = weights * w
        v = np.clip(coef * u * diag_amp / ((amp * amp).T @ (coef * u * u)), 0.0, vmax)
        wsr = float(weights @ power_rates(gains, v * v, sigma2))
        trace.append(wsr)
        if abs(trace[-1] - trace[-2]) <= tol_rel * (1.0 + abs(trace[-2])):
            break
    return WsrResult(solution=v * v, wsr_trace=np.array(trace))


def wmmse_sumrate_multiband(gains, p0, sigma2, p_max, weights=None,
                            max_iters=200, tol_rel=1e-8):
    """Sum-rate heuristic across bands under per-user total-power budgets.

    Per band the updates are the scalar WMMSE closed forms; the coupled
    per-user constraint sum_f p_{k,f} <= p_max enters through a bisected
    multiplier mu_k in the power update.
    """
    gains = np.asarray(gains, dtype=float)  # (F, K, K)
    n_bands, k, _ = gains.shape
    weights = np.ones(k) if weights is None else np.asarray(weights, dtype=float)
    amp = np.sqrt(gains)
    v = np.sqrt(np.clip(np.asarray(p0, dtype=float), 0.0, p_max))  # (K, F)

    def wsr(vmat):
        return float(weights @ power_rates(gains, vmat * vmat, sigma2).sum(axis=1))

    trace = [wsr(v)]
    for _ in range(max_iters):
        c = np.empty((k, n_bands))
        q = np.empty((k, n_bands))
        for f in range(n_bands):
            g = gains[f]
            af = amp[f]
            da = np.diag(af)
            pf = v[:, f] ** 2
            denom = g @ pf + sigma2
            u = da * v[:, f] / denom
            e = 1.0 - u * da * v[:, f]
            coef = weights / e
            c[:, f] = coef * u * da
            q[:, f] = (af * af).T @ (coef * u * u)
        for i in range(k):
            vi = c[i] / q[i]
            if (vi * vi).sum() > p_max:
                hi = np.sqrt((c[i] ** 2).sum() / p_max)
                lo = 0.0
                for _ in range(120):
                    mid = 0.5 * (lo + hi)
                    vi = c[i] / (q[i] + mid)
                    if (vi * vi).sum() > p_max:
                        lo = mid
                    else:
                        hi = mid
                vi = c[i] / (q[i] + hi)
            v[i] = vi
        trace.append(wsr(v))
        if abs(trace[-1] - trace[-2]) <= tol_rel * (1.0 + abs(trace[-2])):
            break
    return WsrResult(solution=v * v, wsr_trace=np.array(trace))


@dataclass
class PfLongTermResult:
    rbar: np.ndarray
    powers: np.ndarray
    rates_log: list


def pf_wmmse_longterm(gains_stream, alpha, sigma2, p_max, max_iters=120):
    """Proportional-fair scheduling baseline: per slot, WMMSE maximizes the
    weighted sum rate with reciprocal-average weights, then the exponential
    average is committed.

    Each slot restarts WMMSE from full power: zero is absorbing for the
    WMMSE power update, so warm starts would permanently mute users that
    any single slot shut off, starving the PF average.
    """
    rbar = None
    p = None
    rates_log = []
    for gains in gains_stream:
        gains = np.ascontiguousarray(gains, dtype=float)
        k = gains.shape[0]
        if rbar is None:
            rbar = np.zeros(k)
        weights = pf_weights(rbar)
        weights = weights / weights.sum() * k
        p = wmmse_wsr_power(gains, weights, np.full(k, p_max), sigma2, p_max,
                            max_iters).solution
        rates = power_rates(gains, p, sigma2)
        rbar = ewma_update(rbar, rates, alpha)
        rates_log.append(rates)
    return PfLongTermResult(rbar=rbar, powers=p, rates_log=rates_log)
