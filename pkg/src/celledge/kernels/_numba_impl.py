"""Numba kernels (default backend); see _numpy_impl for array conventions.

The functions here mirror _numpy_impl exactly, loop-fused and jitted. The
interference covariances are at most receive-array sized, so the solves use
a hand-rolled complex Cholesky instead of LAPACK calls.
"""

import math

import numba
import numpy as np

BACKEND = "numba"

_jit = numba.njit(cache=True, fastmath=False)


@_jit
def _chol_solve(a, b, out):
    """Solve A x = b in place for Hermitian PD A; `a` and `b` are clobbered."""
    n = a.shape[0]
    for j in range(n):
        d = a[j, j].real
        for t in range(j):
            d -= (a[j, t] * np.conj(a[j, t])).real
        d = math.sqrt(d)
        a[j, j] = d
        for i in range(j + 1, n):
            s = a[i, j]
            for t in range(j):
                s -= a[i, t] * np.conj(a[j, t])
            a[i, j] = s / d
    for i in range(n):
        s = b[i]
        for t in range(i):
            s -= a[i, t] * out[t]
        out[i] = s / a[i, i].real
    for i in range(n - 1, -1, -1):
        s = out[i]
        for t in range(i + 1, n):
            s -= np.conj(a[t, i]) * out[t]
        out[i] = s / a[i, i].real
    return out


@_jit
def _fill_pair(hs, v, i, j, t):
    n, m = t.shape[0], hs.shape[3]
    for a in range(n):
        acc = 0.0 + 0.0j
        for b in range(m):
            acc += hs[i, j, a, b] * v[j, b]
        t[a] = acc


@_jit
def _solve_cov(hs, v, sigma2, include_own, z, e_out):
    """Shared covariance-solve loop: z[i] = cov_i^-1 a_i.

    include_own toggles the own-signal term in the covariance (MMSE receive
    covariance vs interference-only covariance). e_out, when not empty,
    receives 1 - Re(a_i^H z_i).
    """
    k = hs.shape[0]
    n = hs.shape[2]
    cov = np.empty((n, n), np.complex128)
    own = np.empty(n, np.complex128)
    tj = np.empty(n, np.complex128)
    rhs = np.empty(n, np.complex128)
    for i in range(k):
        for a in range(n):
            for b in range(n):
                cov[a, b] = 0.0 + 0.0j
        for j in range(k):
            _fill_pair(hs, v, i, j, tj)
            if j == i:
                for a in range(n):
                    own[a] = tj[a]
                if not include_own:
                    continue
            for a in range(n):
                for b in range(n):
                    cov[a, b] += tj[a] * np.conj(tj[b])
        for a in range(n):
            cov[a, a] += sigma2
            rhs[a] = own[a]
        _chol_solve(cov, rhs, z[i])
        if e_out.size:
            s = 0.0
            for a in range(n):
                s += (np.conj(own[a]) * z[i, a]).real
            e_out[i] = 1.0 - s


@_jit
def bf_true_rates(hs, v, sigma2):
    k = hs.shape[0]
    n = hs.shape[2]
    z = np.empty((k, n), np.complex128)
    e = np.empty(k, np.float64)
    _solve_cov(hs, v, sigma2, False, z, e)
    rates = np.empty(k, np.float64)
    for i in range(k):
        s = 1.0 - e[i]
        if s < 0.0:
            s = 0.0
        rates[i] = math.log1p(s)
    return rates


@_jit
def bf_chi_opt(hs, v, sigma2):
    k = hs.shape[0]
    n = hs.shape[2]
    z = np.empty((k, n), np.complex128)
    e = np.empty(0, np.float64)
    _solve_cov(hs, v, sigma2, False, z, e)
    return z


@_jit
def bf_aux_prelog(hs, v, chi, sigma2):
    k = hs.shape[0]
    n = hs.shape[2]
    out = np.empty(k, np.float64)
    tj = np.empty(n, np.complex128)
    for i in range(k):
        lin = 0.0
        quad = 0.0
        for j in range(k):
            _fill_pair(hs, v, i, j, tj)
            m = 0.0 + 0.0j
            for a in range(n):
                m += np.conj(chi[i, a]) * tj[a]
            if j == i:
                lin = 2.0 * m.real
            else:
                quad += (m * np.conj(m)).real
        for a in range(n):
            quad += sigma2 * (chi[i, a] * np.conj(chi[i, a])).real
        out[i] = lin - quad
    return out


@_jit
def bf_aux_grad(hs, v, chi, coef):
    k = hs.shape[0]
    n = hs.shape[2]
    m_ant = hs.shape[3]
    grad = np.zeros((k, m_ant), np.complex128)
    tj = np.empty(n, np.complex128)
    for i in range(k):
        ci = coef[i]
        if ci == 0.0:
            continue
        for j in range(k):
            if j == i:
                # + coef_i * hs[i,i]^H chi_i from the linear term
                for b in range(m_ant):
                    acc = 0.0 + 0.0j
                    for a in range(n):
                        acc += np.conj(hs[i, i, a, b]) * chi[i, a]
                    grad[i, b] += ci * acc
            else:
                _fill_pair(hs, v, i, j, tj)
                m = 0.0 + 0.0j
                for a in range(n):
                    m += np.conj(chi[i, a]) * tj[a]
                cm = ci * m
                for b in range(m_ant):
                    acc = 0.0 + 0.0j
                    for a in range(n):
                        acc += np.conj(hs[i, j, a, b]) * chi[i, a]
                    grad[j, b] -= cm * acc
    return grad


@_jit
def bf_mmse_receivers(hs, v, sigma2):
    k = hs.shape[0]
    n = hs.shape[2]
    u = np.empty((k, n), np.complex128)
    e = np.empty(k, np.float64)
    _solve_cov(hs, v, sigma2, True, u, e)
    for i in range(k):
        if e[i] < 1e-300:
            e[i] = 1e-300
        elif e[i] > 1.0:
            e[i] = 1.0
    return u, e


@_jit
def bf_mse_values(hs, v, u, sigma2):
    k = hs.shape[0]
    n = hs.shape[2]
    out = np.empty(k, np.float64)
    tj = np.empty(n, np.complex128)
    for i in range(k):
        e = 0.0
        for j in range(k):
            _fill_pair(hs, v, i, j, tj)
            m = 0.0 + 0.0j
            for a in range(n):
                m += np.conj(u[i, a]) * tj[a]
            if j == i:
                d = 1.0 - m
                e += (d * np.conj(d)).real
            else:
                e += (m * np.conj(m)).real
        for a in range(n):
            e += sigma2 * (u[i, a] * np.conj(u[i, a])).real
        out[i] = e
    return out


@_jit
def bf_mse_grad(hs, v, u, coef):
    k = hs.shape[0]
    n = hs.shape[2]
    m_ant = hs.shape[3]
    grad = np.zeros((k, m_ant), np.complex128)
    tj = np.empty(n, np.complex128)
    for i in range(k):
        ci = coef[i]
        if ci == 0.0:
            continue
        for j in range(k):
            _fill_pair(hs, v, i, j, tj)
            m = 0.0 + 0.0j
            for a in range(n):
                m += np.conj(u[i, a]) * tj[a]
            if j == i:
                cm = -ci * (1.0 - m)
            else:
                cm = ci * m
            for b in range(m_ant):
                acc = 0.0 + 0.0j
                for a in range(n):
                    acc += np.conj(hs[i, j, a, b]) * u[i, a]
                grad[j, b] += cm * acc
    return grad


@_jit
def pc_sinr(gains, p, sigma2):
    k = gains.shape[0]
    a = np.empty(k, np.float64)
    b = np.empty(k, np.float64)
    for i in range(k):
        a[i] = p[i] * gains[i, i]
        acc = sigma2
        for j in range(k):
            if j != i:
                acc += gains[i, j] * p[j]
        b[i] = acc
    return a, b


@_jit
def pc_qft_grad(gains, p, x, coef, p_floor):
    k = gains.shape[0]
    grad = np.zeros(k, np.float64)
    for i in range(k):
        ci = coef[i]
        if ci == 0.0:
            continue
        pi = p[i]
        if pi < p_floor:
            pi = p_floor
        grad[i] += ci * x[i] * math.sqrt(gains[i, i] / pi)
        t = ci * x[i] * x[i]
        for j in range(k):
            if j != i:
                grad[j] -= t * gains[i, j]
    return grad


@_jit
def pc_lft_grad(gains, p, x, coef, sigma2):
    k = gains.shape[0]
    a, b = pc_sinr(gains, p, sigma2)
    grad = np.zeros(k, np.float64)
    for i in range(k):
        ci = coef[i]
        if ci == 0.0:
            continue
        ab = a[i] + b[i]
        grad[i] += ci * gains[i, i] / ab
        t = ci * (1.0 / ab - x[i])
        for j in range(k):
            if j != i:
                grad[j] += t * gains[i, j]
    return grad
