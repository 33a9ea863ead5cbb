"""Timing comparison of the numba kernels against the numpy fallback."""

from __future__ import annotations

import time

import numpy as np

from .kernels import _numpy_impl


def _load_backends():
    backends = {"numpy": _numpy_impl}
    try:
        from .kernels import _numba_impl
        backends["numba"] = _numba_impl
    except ImportError:
        pass
    return backends


def _bf_instance(rng, k, n, m):
    hs = (rng.standard_normal((k, k, n, m)) + 1j * rng.standard_normal((k, k, n, m))) / np.sqrt(2)
    v = (rng.standard_normal((k, m)) + 1j * rng.standard_normal((k, m))) / np.sqrt(2)
    chi = (rng.standard_normal((k, n)) + 1j * rng.standard_normal((k, n))) / np.sqrt(2)
    coef = rng.uniform(0.0, 1.0, k)
    return hs, v, chi, coef


def _time(fn, args, min_seconds=0.2):
    fn(*args)  # warm-up (and jit compile)
    n = 0
    t0 = time.perf_counter()
    while True:
        fn(*args)
        n += 1
        dt = time.perf_counter() - t0
        if dt >= min_seconds:
            return dt / n


def run_benchmark(k=35, n=2, m=8, k_power=140, seed=0, min_seconds=0.2):
    """Return rows (kernel, backend, microseconds/call) for the hot kernels."""
    rng = np.random.default_rng(seed)
    hs, v, chi, coef = _bf_instance(rng, k, n, m)
    u = chi.copy()
    gains = rng.uniform(0.0, 1.0, (k_power, k_power))
    p = rng.uniform(0.0, 1.0, k_power)
    x = rng.uniform(0.1, 1.0, k_power)
    lam = rng.uniform(0.0, 1.0, k_power)
    cases = [
        ("bf_true_rates", lambda impl: (impl.bf_true_rates, (hs, v, 1.0))),
        ("bf_aux_prelog", lambda impl: (impl.bf_aux_prelog, (hs, v, chi, 1.0))),
        ("bf_aux_grad", lambda impl: (impl.bf_aux_grad, (hs, v, chi, coef))),
        ("bf_mse_values", lambda impl: (impl.bf_mse_values, (hs, v, u, 1.0))),
        ("bf_mse_grad", lambda impl: (impl.bf_mse_grad, (hs, v, u, coef))),
        ("pc_sinr", lambda impl: (impl.pc_sinr, (gains, p, 1.0))),
        ("pc_qft_grad", lambda impl: (impl.pc_qft_grad, (gains, p, x, lam, 1e-12))),
        ("pc_lft_grad", lambda impl: (impl.pc_lft_grad, (gains, p, x, lam, 1.0))),
    ]
    rows = []
    for name, pick in cases:
        for backend, impl in _load_backends().items():
            fn, args = pick(impl)
            rows.append((name, backend, 1e6 * _time(fn, args, min_seconds)))
    return rows


def format_benchmark(rows):
    by_kernel = {}
    for name, backend, us in rows:
        by_kernel.setdefault(name, {})[backend] = us
    lines = [f"{'kernel':<16}{'numpy us':>12}{'numba us':>12}{'speedup':>10}"]
    for name, vals in by_kernel.items():
        np_us = vals.get("numpy", float("nan"))
        nb_us = vals.get("numba", float("nan"))
        speed = np_us / nb_us if nb_us and nb_us == nb_us else float("nan")
        lines.append(f"{name:<16}{np_us:>12.1f}{nb_us:>12.1f}{speed:>10.2f}")
    return "\n".join(lines)
