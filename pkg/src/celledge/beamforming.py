"""Beamforming solvers for sum-of-smallest-rates (percentile) utilities.

Two independent minorize-maximize routes to the same problem:

* quadratic-transform ascent (`qt_run`): each rate is rewritten through the
  multidimensional quadratic transform with an auxiliary vector chi per
  user; for fixed chi the surrogate is concave in the beamformers and is
  ascended with the projected supergradient solver.

* weighted-MSE descent (`wmse_run`): minimizing the sum of the k largest
  weighted MSEs is equivalent to maximizing the sum of the k smallest
  rates; with receivers and weights at their closed-form optima the
  surrogate touches the true objective, giving the same monotone sandwich.

Both record the true objective each outer iteration; the traces are
non-decreasing up to solver tolerance by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels, utility
from .innersolver import PerBSBall, Schedule, maximize
from .netmodel import gather_serving

# Stand-in value for a transformed rate whose pre-log argument is not
# positive; the ascent then follows the supergradient of the pre-log
# argument itself until the iterate is back in the log's domain.
DEAD_RATE = -1e30


@dataclass(frozen=True)
class OuterConfig:
    max_outer: int = 100
    tol_rel: float = 1e-5
    patience: int = 3
    inner: Schedule = Schedule()


@dataclass
class BeamformingResult:
    v: np.ndarray
    trace_true: np.ndarray   # objective before the first and after every outer iter
    trace_aux: np.ndarray    # surrogate value reached by each inner solve
    aux_gap: np.ndarray      # |surrogate at refreshed auxiliaries - true objective|
    inner_iterations: list
    outer_iterations: int


def _dominant_right_vector(h, iters=50):
    # power iteration on h^H h; deterministic start from the first row
    m = h.shape[1]
    x = h[0].conj()
    nrm = np.linalg.norm(x)
    x = x / nrm if nrm > 0 else np.ones(m, dtype=np.complex128) / np.sqrt(m)
    a = h.conj().T @ h
    for _ in range(iters):
        y = a @ x
        nrm = np.linalg.norm(y)
        if nrm == 0:
            break
        x = y / nrm
    return x


def matched_filter_init(h, scenario):
    """Equal-power matched-filter start: each user gets p_max / (users in its
    cell) along the dominant direction of its direct channel."""
    k = scenario.n_users
    v = np.empty((k, scenario.tx_antennas), dtype=np.complex128)
    for i in range(k):
        b = scenario.serving[i]
        direction = _dominant_right_vector(h[i, b])
        v[i] = np.sqrt(scenario.p_max_w / scenario.users_per_cell[b]) * direction
    return v


def transformed_rates(prelog):
    """log(1 + s) with the dead-rate stand-in where the argument is not positive."""
    rates = np.full(prelog.shape, DEAD_RATE)
    alive = prelog > -1.0
    rates[alive] = np.log1p(prelog[alive])
    return rates


def _qt_oracle(hs, chi, sigma2, spec, barrier):
    def oracle(v):
        s = kernels.bf_aux_prelog(hs, v, chi, sigma2)
        rates = transformed_rates(s)
        value, lam = utility.value_and_supergradient(spec, rates, barrier)
        coef = lam.copy()
        alive = s > -1.0
        coef[alive] = lam[alive] / (1.0 + s[alive])
        # kernels return d/dconj(v); the real-parameterization gradient is twice that
        grad = 2.0 * kernels.bf_aux_grad(hs, v, chi, coef)
        return value, grad
    return oracle


def qt_run(scenario, h, spec, v0=None, config=OuterConfig(), barrier=False):
    """Quadratic-transform beamforming ascent of a concave rate utility."""
    sigma2 = scenario.noise_power_w
    hs = gather_serving(h, scenario.serving)
    ball = PerBSBall(scenario.p_max_w, scenario.serving, scenario.n_cells)
    v = ball.project(np.array(matched_filter_init(h, scenario) if v0 is None else v0,
                              dtype=np.complex128))
    true = utility.evaluate(spec, kernels.bf_true_rates(hs, v, sigma2), barrier)
    trace_true = [true]
    trace_aux = []
    aux_gap = []
    inner_iters = []
    stalled = 0
    it = 0
    for it in range(1, config.max_outer + 1):
        chi = kernels.bf_chi_opt(hs, v, sigma2)
        oracle = _qt_oracle(hs, chi, sigma2, spec, barrier)
        aux_now, _ = oracle(v)
        aux_gap.append(abs(aux_now - true))
        res = maximize(oracle, ball, v, config.inner)
        v = res.point
        prev = true
        true = utility.evaluate(spec, kernels.bf_true_rates(hs, v, sigma2), barrier)
        trace_true.append(true)
        trace_aux.append(res.value)
        inner_iters.append(res.iterations)
        if true - prev <= config.tol_rel * (1.0 + abs(prev)):
            stalled += 1
            if stalled >= config.patience:
                break
        else:
            stalled = 0
    return BeamformingResult(v=v, trace_true=np.array(trace_true),
                             trace_aux=np.array(trace_aux), aux_gap=np.array(aux_gap),
                             inner_iterations=inner_iters, outer_iterations=it)


def mmse_receivers(hs, v, sigma2):
    """Closed-form MMSE receive beamformers and per-user MMSE values."""
    return kernels.bf_mmse_receivers(hs, v, sigma2)


def wmse_weights(mmse):
    """Optimal WMSE weights 1/e; always >= 1 since the MMSE is <= 1."""
    return 1.0 / mmse


def wmse_values(hs, v, u, w, sigma2):
    """Weighted-MSE cost w*e - log(w) - 1 per user."""
    if np.any(w <= 0):
        raise ValueError("WMSE weights must be positive")
    e = kernels.bf_mse_values(hs, v, u, sigma2)
    return w * e - np.log(w) - 1.0


def _wmse_oracle(hs, u, w, kq, sigma2):
    logw = np.log(w)

    def oracle(v):
        e = kernels.bf_mse_values(hs, v, u, sigma2)
        wm = w * e - logw - 1.0
        lam = utility.largest_k_indicator(wm, kq)
        grad = -2.0 * kernels.bf_mse_grad(hs, v, u, lam * w)
        return -utility.sum_largest(wm, kq), grad
    return oracle


def wmse_run(scenario, h, kq, v0=None, config=OuterConfig()):
    """Sum-of-largest-WMSE descent; trace records the percentile rate utility."""
    sigma2 = scenario.noise_power_w
    hs = gather_serving(h, scenario.serving)
    ball = PerBSBall(scenario.p_max_w, scenario.serving, scenario.n_cells)
    v = ball.project(np.array(matched_filter_init(h, scenario) if v0 is None else v0,
                              dtype=np.complex128))
    true = utility.sum_smallest(kernels.bf_true_rates(hs, v, sigma2), kq)
    trace_true = [true]
    trace_aux = []
    aux_gap = []
    inner_iters = []
    stalled = 0
    it = 0
    for it in range(1, config.max_outer + 1):
        u, e = kernels.bf_mmse_receivers(hs, v, sigma2)
        w = wmse_weights(e)
        oracle = _wmse_oracle(hs, u, w, kq, sigma2)
        aux_now, _ = oracle(v)
        aux_gap.append(abs(aux_now - true))
        res = maximize(oracle, ball, v, config.inner)
        v = res.point
        prev = true
        true = utility.sum_smallest(kernels.bf_true_rates(hs, v, sigma2), kq)
        trace_true.append(true)
        trace_aux.append(res.value)
        inner_iters.append(res.iterations)
        if true - prev <= config.tol_rel * (1.0 + abs(prev)):
            stalled += 1
            if stalled >= config.patience:
                break
        else:
            stalled = 0
    return BeamformingResult(v=v, trace_true=np.array(trace_true),
                             trace_aux=np.array(trace_aux), aux_gap=np.array(aux_gap),
                             inner_iterations=inner_iters, outer_iterations=it)
