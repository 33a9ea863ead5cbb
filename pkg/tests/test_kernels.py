"""Backend agreement: the numba kernels must reproduce the numpy fallback."""

import numpy as np
import pytest

from celledge.kernels import _numpy_impl as ref

nb = pytest.importorskip("celledge.kernels._numba_impl")


def instance(seed, k=7, n=2, m=5):
    rng = np.random.default_rng(seed)
    hs = (rng.standard_normal((k, k, n, m)) + 1j * rng.standard_normal((k, k, n, m))) / np.sqrt(2)
    v = (rng.standard_normal((k, m)) + 1j * rng.standard_normal((k, m))) / np.sqrt(2)
    chi = (rng.standard_normal((k, n)) + 1j * rng.standard_normal((k, n))) / np.sqrt(2)
    coef = rng.uniform(0.0, 1.0, k)
    return hs, v, chi, coef


@pytest.mark.parametrize("seed", range(5))
def test_beamforming_kernels_agree(seed):
    hs, v, chi, coef = instance(seed)
    s2 = 0.8
    assert np.allclose(nb.bf_true_rates(hs, v, s2), ref.bf_true_rates(hs, v, s2), atol=1e-12)
    assert np.allclose(nb.bf_chi_opt(hs, v, s2), ref.bf_chi_opt(hs, v, s2), atol=1e-12)
    assert np.allclose(nb.bf_aux_prelog(hs, v, chi, s2), ref.bf_aux_prelog(hs, v, chi, s2),
                       atol=1e-10)
    assert np.allclose(nb.bf_aux_grad(hs, v, chi, coef), ref.bf_aux_grad(hs, v, chi, coef),
                       atol=1e-12)
    u_nb, e_nb = nb.bf_mmse_receivers(hs, v, s2)
    u_np, e_np = ref.bf_mmse_receivers(hs, v, s2)
    assert np.allclose(u_nb, u_np, atol=1e-12)
    assert np.allclose(e_nb, e_np, atol=1e-12)
    assert np.allclose(nb.bf_mse_values(hs, v, u_np, s2), ref.bf_mse_values(hs, v, u_np, s2),
                       atol=1e-12)
    assert np.allclose(nb.bf_mse_grad(hs, v, u_np, coef), ref.bf_mse_grad(hs, v, u_np, coef),
                       atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_power_kernels_agree(seed):
    rng = np.random.default_rng(100 + seed)
    k = 12
    gains = rng.uniform(0.0, 1.0, (k, k))
    p = rng.uniform(0.0, 2.0, k)
    p[rng.integers(0, k)] = 0.0
    x = rng.uniform(0.0, 1.0, k)
    coef = rng.uniform(0.0, 1.0, k)
    s2 = 0.5
    a_nb, b_nb = nb.pc_sinr(gains, p, s2)
    a_np, b_np = ref.pc_sinr(gains, p, s2)
    assert np.allclose(a_nb, a_np, atol=1e-14)
    assert np.allclose(b_nb, b_np, atol=1e-12)
    assert np.allclose(nb.pc_qft_grad(gains, p, x, coef, 1e-12),
                       ref.pc_qft_grad(gains, p, x, coef, 1e-12), atol=1e-10)
    assert np.allclose(nb.pc_lft_grad(gains, p, x, coef, s2),
                       ref.pc_lft_grad(gains, p, x, coef, s2), atol=1e-10)


def test_backend_selection_reports():
    from celledge import kernels
    assert kernels.BACKEND in ("numba", "numpy")
    for name in kernels.KERNEL_NAMES:
        assert hasattr(kernels, name)


def test_benchmark_smoke():
    from celledge.benchmark import format_benchmark, run_benchmark
    rows = run_benchmark(k=4, n=2, m=3, k_power=8, min_seconds=0.01)
    text = format_benchmark(rows)
    assert "bf_true_rates" in text and "pc_sinr" in text
