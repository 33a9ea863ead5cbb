"""Scalar-power solvers: short-term hybrid utilities and long-term
ergodic percentile scheduling.

Per-user rates use the scalar SINR model log(1 + A/B). Two fractional
transforms turn each rate into a surrogate that is concave in the powers
for a fixed auxiliary x:

  quadratic     log(1 + 2 x sqrt(A) - x^2 B),  optimal x = sqrt(A)/B
  logarithmic   -x B + log(x (A + B)) + 1,     optimal x = 1/B

At the optimal auxiliary both surrogates equal the true rate, so
alternating the closed-form auxiliary update with a projected
supergradient ascent of the composed utility is a monotone MM scheme for
any concave non-decreasing utility of the rates.

The long-term loop optimizes the percentile utility of exponentially
averaged rates: each slot solves the same surrogate problem with
base = (1 - alpha) * rbar and scale = alpha folded into the rate slots,
then commits the averaging step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels, utility
from .beamforming import OuterConfig, transformed_rates
from .innersolver import BandSimplexBox, Box, maximize
from .netmodel import power_rates, sinr_components

TRANSFORMS = ("qft", "lft")

# relative floor applied to powers inside the sqrt-slope of the quadratic
# transform so supergradients stay bounded at the boundary
SQRT_SLOPE_FLOOR = 1e-12


def qft_aux(gains, p, sigma2):
    """Optimal quadratic-transform auxiliaries sqrt(A)/B (per user and band)."""
    a, b = sinr_components(gains, p, sigma2)
    return np.sqrt(a) / b


def lft_aux(gains, p, sigma2):
    """Optimal logarithmic-transform auxiliaries 1/B (per user and band)."""
    _, b = sinr_components(gains, p, sigma2)
    return 1.0 / b


def qft_aux_rates(gains, p, x, sigma2):
    """Transformed rates log(1 + 2 x sqrt(A) - x^2 B) at fixed auxiliaries."""
    a, b = sinr_components(gains, p, sigma2)
    return transformed_rates(2.0 * x * np.sqrt(a) - x * x * b)


def lft_aux_rates(gains, p, x, sigma2):
    """Transformed rates -x B + log(x (A + B)) + 1 at fixed auxiliaries."""
    a, b = sinr_components(gains, p, sigma2)
    return -x * b + np.log(x * (a + b)) + 1.0


def ewma_update(rbar, rates, alpha):
    """Exponentially averaged rates (1 - alpha) * rbar + alpha * rates."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    return (1.0 - alpha) * np.asarray(rbar, dtype=float) + alpha * np.asarray(rates, dtype=float)


@dataclass
class PowerResult:
    p: np.ndarray
    trace_true: np.ndarray
    trace_aux: np.ndarray
    aux_gap: np.ndarray
    inner_iterations: list
    outer_iterations: int


def _band_views(gains, p):
    if gains.ndim == 2:
        return [gains], [p]
    return list(gains), [np.ascontiguousarray(p[:, f]) for f in range(gains.shape[0])]


def _pc_oracle(gains, x, sigma2, spec, transform, base, scale, barrier, p_floor):
    multiband = gains.ndim == 3

    def oracle(p):
        bands_g, bands_p = _band_views(gains, p)
        xs = [np.ascontiguousarray(x[:, f]) for f in range(len(bands_g))] if multiband else [x]
        pre = []
        for g, pb, xb in zip(bands_g, bands_p, xs):
            a, b = kernels.pc_sinr(g, pb, sigma2)
            if transform == "qft":
                pre.append(2.0 * xb * np.sqrt(a) - xb * xb * b)
            else:
                pre.append(-xb * b + np.log(xb * (a + b)) + 1.0)
        if transform == "qft":
            per_slot = np.stack([transformed_rates(s) for s in pre], axis=-1)
        else:
            per_slot = np.stack(pre, axis=-1)
        if not multiband:
            per_slot = per_slot[:, 0]
        rates = base + scale * per_slot
        value, lam = utility.value_and_supergradient(spec, rates.ravel(), barrier)
        lam = lam.reshape(per_slot.shape) * scale
        grad = np.empty_like(p, dtype=float)
        for f, (g, pb, xb, s) in enumerate(zip(bands_g, bands_p, xs, pre)):
            lam_f = lam[:, f] if multiband else lam
            if transform == "qft":
                coef = lam_f.copy()
                alive = s > -1.0
                coef[alive] = lam_f[alive] / (1.0 + s[alive])
                gf = kernels.pc_qft_grad(g, pb, xb, np.ascontiguousarray(coef), p_floor)
            else:
                gf = kernels.pc_lft_grad(g, pb, xb, np.ascontiguousarray(lam_f), sigma2)
            if multiband:
                grad[:, f] = gf
            else:
                grad[:] = gf
        return value, grad
    return oracle


def _true_objective(gains, p, sigma2, spec, base, scale, barrier):
    rates = base + scale * power_rates(gains, p, sigma2)
    return utility.evaluate(spec, rates.ravel(), barrier)


def mm_power_solve(gains, spec, transform, p0, sigma2, p_max, config=OuterConfig(),
                   base=0.0, scale=1.0, barrier=False):
    """Monotone transform/ascent alternation for one channel realization."""
    if transform not in TRANSFORMS:
        raise ValueError(f"transform must be one of {TRANSFORMS}, got {transform!r}")
    gains = np.ascontiguousarray(gains, dtype=float)
    feasible = Box(0.0, p_max) if gains.ndim == 2 else BandSimplexBox(p_max)
    p = feasible.project(np.array(p0, dtype=float))
    p_floor = SQRT_SLOPE_FLOOR * p_max
    true = _true_objective(gains, p, sigma2, spec, base, scale, barrier)
    trace_true = [true]
    trace_aux = []
    aux_gap = []
    inner_iters = []
    stalled = 0
    it = 0
    for it in range(1, config.max_outer + 1):
        x = qft_aux(gains, p, sigma2) if transform == "qft" else lft_aux(gains, p, sigma2)
        oracle = _pc_oracle(gains, x, sigma2, spec, transform, base, scale, barrier, p_floor)
        aux_now, _ = oracle(p)
        aux_gap.append(abs(aux_now - true))
        res = maximize(oracle, feasible, p, config.inner)
        p = res.point
        prev = true
        true = _true_objective(gains, p, sigma2, spec, base, scale, barrier)
        trace_true.append(true)
        trace_aux.append(res.value)
        inner_iters.append(res.iterations)
        if true - prev <= config.tol_rel * (1.0 + abs(prev)):
            stalled += 1
            if stalled >= config.patience:
                break
        else:
            stalled = 0
    return PowerResult(p=p, trace_true=np.array(trace_true), trace_aux=np.array(trace_aux),
                       aux_gap=np.array(aux_gap), inner_iterations=inner_iters,
                       outer_iterations=it)


def shortterm_run(gains, spec, transform, p0, sigma2, p_max, config=OuterConfig(),
                  barrier=False):
    """Single-slot hybrid-utility power control (box or band-simplex feasible set)."""
    return mm_power_solve(gains, spec, transform, p0, sigma2, p_max, config,
                          base=0.0, scale=1.0, barrier=barrier)


@dataclass
class SlotRecord:
    slot: int
    rates: np.ndarray
    rbar: np.ndarray
    powers: np.ndarray
    objective: float          # percentile utility of rbar after the slot
    trace_true: np.ndarray    # per-outer-iteration objective within the slot


@dataclass
class LongTermResult:
    rbar: np.ndarray
    objective: np.ndarray     # per-slot utility of the averaged rates
    slots: list


def longterm_run(gains_stream, kq, transform, alpha, sigma2, p_max,
                 config=OuterConfig(), p0=None, rng=None, init="random",
                 keep_slots=True):
    """Ergodic percentile scheduling: per-slot surrogate solve + averaging commit.

    `gains_stream` iterates per-slot (K, K) gain matrices. With
    init="random" (the default) every slot restarts its powers uniformly at
    random in [0, p_max] drawn from `rng`; init="warm" reuses the previous
    slot's solution. The random restart matters for the quadratic
    transform: a power that reaches exactly zero has auxiliary x = 0, which
    freezes its surrogate, so warm starts can never revive a muted user.
    The first slot uses `p0` when given.
    """
    if init not in ("random", "warm"):
        raise ValueError("init must be 'random' or 'warm'")
    rbar = None
    p = None
    spec = None
    objective = []
    slots = []
    for n, gains in enumerate(gains_stream):
        gains = np.ascontiguousarray(gains, dtype=float)
        k = gains.shape[0]
        if rbar is None:
            rbar = np.zeros(k)
            utility._check_k(kq, k)
            spec = utility.SumSmallest(kq)
            if p0 is not None:
                start = np.array(p0, dtype=float)
            elif rng is not None:
                start = rng.uniform(0.0, p_max, size=k)
            else:
                raise ValueError("provide p0 or rng for the first slot")
        elif init == "random":
            if rng is None:
                raise ValueError("init='random' needs an rng")
            start = rng.uniform(0.0, p_max, size=k)
        else:
            start = p
        res = mm_power_solve(gains, spec, transform, start, sigma2, p_max, config,
                             base=(1.0 - alpha) * rbar, scale=alpha)
        p = res.p
        rates = power_rates(gains, p, sigma2)
        rbar = ewma_update(rbar, rates, alpha)
        objective.append(res.trace_true[-1])
        if keep_slots:
            slots.append(SlotRecord(slot=n, rates=rates, rbar=rbar.copy(), powers=p.copy(),
                                    objective=res.trace_true[-1], trace_true=res.trace_true))
    return LongTermResult(rbar=rbar, objective=np.array(objective), slots=slots)
