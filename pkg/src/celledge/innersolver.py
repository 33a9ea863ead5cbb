"""Projected supergradient ascent over simple convex feasible sets.

This is the workhorse inside every outer MM iteration: the surrogate
objectives are concave but non-smooth (sums of k smallest), so the solver
uses diminishing steps eta_t = eta0 / sqrt(t) and returns the best iterate
seen, which keeps the outer loops monotone even when the subproblem is
solved inexactly.

Oracles map a decision array to (value, gradient) with the gradient shaped
like the decision array. Complex decision variables are understood through
their real parameterization (each complex entry is a re/im coordinate
pair); the oracle must return 2 * d(value)/d(conj z), which is exactly the
ascent direction in those real coordinates written as a complex array.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SolverAbort(RuntimeError):
    """Oracle produced a non-finite value or gradient; carries the iterate."""

    def __init__(self, message, iterate=None):
        super().__init__(message)
        self.iterate = iterate


@dataclass(frozen=True)
class Schedule:
    max_iters: int = 3000
    tol_rel: float = 1e-6
    patience: int = 200
    step_scale: float = 0.1


@dataclass
class AscentResult:
    point: np.ndarray
    value: float
    trace: np.ndarray  # best-so-far values, one entry per evaluation
    iterations: int


class Box:
    """Coordinate box [lo, hi]^n."""

    def __init__(self, lo, hi):
        self.lo = float(lo)
        self.hi = float(hi)
        self.scale = self.hi - self.lo

    def project(self, x):
        return np.clip(x, self.lo, self.hi)


class PerBSBall:
    """Per-BS transmit power ball for (K, M) complex beamformer arrays."""

    def __init__(self, p_max, serving, n_cells):
        self.p_max = float(p_max)
        self.serving = np.asarray(serving, dtype=np.intp)
        self.n_cells = int(n_cells)
        self.scale = float(p_max)

    def project(self, v):
        power = np.zeros(self.n_cells)
        np.add.at(power, self.serving, (np.abs(v) ** 2).sum(axis=1))
        shrink = np.ones(self.n_cells)
        over = power > self.p_max
        shrink[over] = np.sqrt(self.p_max / power[over])
        return v * shrink[self.serving, None]


def project_capped_simplex(row, cap):
    """Euclidean projection of a vector onto {p >= 0, sum(p) <= cap}."""
    clipped = np.maximum(row, 0.0)
    total = clipped.sum()
    if total <= cap:
        return clipped
    # water-level threshold on the raw entries
    u = np.sort(row)[::-1]
    css = np.cumsum(u) - cap
    j = np.arange(1, row.size + 1)
    rho = np.nonzero(u - css / j > 0)[0][-1]
    tau = css[rho] / (rho + 1.0)
    return np.maximum(row - tau, 0.0)


class BandSimplexBox:
    """Per-user band powers (K, F): p >= 0 and sum over bands <= p_max."""

    def __init__(self, p_max):
        self.p_max = float(p_max)
        self.scale = float(p_max)

    def project(self, p):
        out = np.empty_like(p)
        for k in range(p.shape[0]):
            out[k] = project_capped_simplex(p[k], self.p_max)
        return out


def _grad_norm(g):
    return float(np.sqrt(np.vdot(g, g).real))


def _checked(oracle, x):
    value, grad = oracle(x)
    if not np.isfinite(value):
        raise SolverAbort(f"oracle value is not finite ({value})", iterate=x)
    if not np.all(np.isfinite(grad)):
        raise SolverAbort("oracle gradient has non-finite entries", iterate=x)
    return float(value), grad


def maximize(oracle, feasible, start, schedule=Schedule()):
    """Projected supergradient ascent; returns the best feasible iterate."""
    x = feasible.project(np.array(start, copy=True))
    value, grad = _checked(oracle, x)
    best_x = x.copy()
    best_v = value
    trace = np.empty(schedule.max_iters + 1)
    trace[0] = best_v
    eta0 = schedule.step_scale * feasible.scale / (_grad_norm(grad) + 1e-12)
    window_ref = best_v
    stalled = 0
    t = 0
    for t in range(1, schedule.max_iters + 1):
        x = feasible.project(x + (eta0 / np.sqrt(t)) * grad)
        value, grad = _checked(oracle, x)
        if value > best_v:
            best_v = value
            best_x = x.copy()
        trace[t] = best_v
        if best_v > window_ref + schedule.tol_rel * (1.0 + abs(window_ref)):
            window_ref = best_v
            stalled = 0
        else:
            stalled += 1
            if stalled >= schedule.patience:
                break
    return AscentResult(point=best_x, value=best_v, trace=trace[: t + 1], iterations=t)
