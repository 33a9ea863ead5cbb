import numpy as np
import pytest

from celledge import netmodel as nm
from celledge import kernels


def small_scenario(seed=0, **kw):
    return nm.build_hex_topology(kw.pop("cells", 7), kw.pop("users", 2),
                                 nm.rng_for(seed, 0), **kw)


def test_seven_cell_adjacency_exactly_inter_site():
    sc = small_scenario()
    # under reuse-7 wrap-around every pair of distinct BSs is adjacent
    for a in range(7):
        for b in range(a + 1, 7):
            d = nm.wrap_distance(sc.bs_xy[a], sc.bs_xy[b], sc.wrap_xy)
            assert d == pytest.approx(2000.0, abs=1e-9)


def test_wrap_translation_invariance():
    sc = small_scenario()
    lattice = sc.wrap_xy[1]
    d0 = nm.wrap_distance(sc.user_xy[:, None, :], sc.bs_xy[None, :, :], sc.wrap_xy)
    d1 = nm.wrap_distance(sc.user_xy[:, None, :] + lattice, sc.bs_xy[None, :, :] + lattice,
                          sc.wrap_xy)
    assert np.allclose(d0, d1, atol=1e-9)


def test_users_inside_hexagon():
    sc = nm.build_hex_topology(1, 2, nm.rng_for(3, 0))
    circumradius = sc.inter_site_m / np.sqrt(3.0)
    d = np.linalg.norm(sc.user_xy - sc.bs_xy[0], axis=1)
    assert np.all(d <= circumradius + 1e-9)
    sc7 = small_scenario(seed=4, users=5)
    dist = nm.bs_user_distances(sc7)
    # every user is closest to its serving BS
    assert np.array_equal(np.argmin(dist, axis=1), sc7.serving)


def test_topology_determinism():
    a = small_scenario(seed=9)
    b = small_scenario(seed=9)
    assert np.array_equal(a.user_xy, b.user_xy)
    c = small_scenario(seed=10)
    assert not np.array_equal(a.user_xy, c.user_xy)


def test_unsupported_cell_count():
    with pytest.raises(ValueError):
        nm.build_hex_topology(3, 2, nm.rng_for(0, 0))


def test_pathloss_values():
    assert nm.pathloss_amplitude(0.0) == 1.0
    assert nm.pathloss_amplitude(0.392, 0.392, 3.76) == pytest.approx(2.0 ** -1.88, rel=1e-12)
    assert nm.pathloss_amplitude(2000.0) < nm.pathloss_amplitude(1000.0)


def test_noise_and_power_constants():
    assert nm.noise_power_watts() == pytest.approx(1.0024e-10, rel=1e-3)
    assert nm.dbm_to_watts(43.0) == pytest.approx(19.9526, rel=1e-4)


def test_channel_determinism_and_scaling():
    sc = small_scenario(seed=5, tx_antennas=4, rx_antennas=2)
    h1 = nm.sample_channels(sc, nm.rng_for(5, 0, 7))
    h2 = nm.sample_channels(sc, nm.rng_for(5, 0, 7))
    assert np.array_equal(h1, h2)
    h3 = nm.sample_channels(sc, nm.rng_for(5, 0, 8))
    assert not np.array_equal(h1, h3)


def test_channel_unit_variance_after_pathloss_removal():
    sc = small_scenario(seed=6, users=3, tx_antennas=8, rx_antennas=2)
    amp = nm.pathloss_amplitude(nm.bs_user_distances(sc), sc.pathloss_d0_m, sc.pathloss_exp)
    samples = []
    for rep in range(450):
        h = nm.sample_channels(sc, nm.rng_for(6, 0, rep))
        samples.append((h / amp[:, :, None, None]).ravel())
    z = np.concatenate(samples)
    assert z.size > 1e6
    assert np.var(z) == pytest.approx(1.0, rel=0.01)


def test_channel_entries_are_scaled_normals():
    # construction contract: entry = pathloss amplitude times a CN(0,1) draw
    sc = small_scenario(seed=15, users=2, tx_antennas=3, rx_antennas=2)
    h = nm.sample_channels(sc, nm.rng_for(15, 0, 0))
    amp = nm.pathloss_amplitude(nm.bs_user_distances(sc), sc.pathloss_d0_m, sc.pathloss_exp)
    rng = nm.rng_for(15, 0, 0)
    z = (rng.standard_normal(h.shape) + 1j * rng.standard_normal(h.shape)) / np.sqrt(2)
    assert np.array_equal(h, amp[:, :, None, None] * z)


def test_interference_covariance_trivial_cases():
    # one user: empty interference sum
    sc = nm.build_hex_topology(1, 1, nm.rng_for(7, 0), tx_antennas=2, rx_antennas=2)
    h = nm.sample_channels(sc, nm.rng_for(7, 0, 0))
    hs = nm.gather_serving(h, sc.serving)
    v = np.ones((1, 2), dtype=complex)
    cov = nm.interference_covariance(hs, v, 0, sigma2=1.3)
    assert np.allclose(cov, 1.3 * np.eye(2))
    # two scalar users with h = v = 1: covariance 1 + |1*1|^2 = 2
    hs2 = np.ones((2, 2, 1, 1), dtype=complex)
    v2 = np.ones((2, 1), dtype=complex)
    assert np.allclose(nm.interference_covariance(hs2, v2, 0, 1.0), [[2.0]])


def test_rates_zero_beamformer_and_snr_one():
    hs = np.ones((1, 1, 1, 1), dtype=complex)
    assert nm.user_rates(hs, np.zeros((1, 1), dtype=complex), 1.0)[0] == 0.0
    # p |h|^2 / sigma^2 = 1 -> log 2
    assert nm.user_rates(hs, np.ones((1, 1), dtype=complex), 1.0)[0] == pytest.approx(np.log(2.0))


def test_rate_matches_mmse_substitution_identity():
    # independent route: rate = -log(mmse) with the all-signal covariance
    rng = np.random.default_rng(8)
    for _ in range(50):
        k, n, m = 4, 2, 3
        hs = (rng.standard_normal((k, k, n, m)) + 1j * rng.standard_normal((k, k, n, m)))
        v = (rng.standard_normal((k, m)) + 1j * rng.standard_normal((k, m)))
        rates = nm.user_rates(hs, v, 1.0)
        _, e = kernels.bf_mmse_receivers(hs, v, 1.0)
        assert np.allclose(rates, -np.log(e), rtol=1e-10, atol=1e-12)


def test_mimo_scalar_agreement():
    sc = small_scenario(seed=11, users=2, tx_antennas=1, rx_antennas=1)
    h = nm.sample_channels(sc, nm.rng_for(11, 0, 0))
    hs = nm.gather_serving(h, sc.serving)
    rng = np.random.default_rng(0)
    p = rng.uniform(0, sc.p_max_w, sc.n_users)
    v = np.sqrt(p)[:, None].astype(complex)
    gains = np.abs(hs[:, :, 0, 0]) ** 2
    r_bf = nm.user_rates(hs, v, sc.noise_power_w)
    r_pc = nm.power_rates(gains, p, sc.noise_power_w)
    assert np.allclose(r_bf, r_pc, atol=1e-12)


def test_sinr_components_examples():
    gains = np.array([[1.0, 0.5], [0.3, 2.0]])
    a, b = nm.sinr_components(gains, np.zeros(2), sigma2=0.7)
    assert np.allclose(a, 0.0)
    assert np.allclose(b, 0.7)
    a, b = nm.sinr_components(gains, np.ones(2), sigma2=1.0)
    assert a[0] == pytest.approx(1.0)
    assert b[0] == pytest.approx(1.5)
    rates = nm.power_rates(gains, np.ones(2), 1.0)
    assert rates[0] == pytest.approx(np.log1p(1.0 / 1.5))


def test_scalar_channels_shapes_and_determinism():
    sc = small_scenario(seed=12, users=2)
    c1 = nm.sample_scalar_channels(sc, 3, nm.rng_for(12, 0, 0))
    c2 = nm.sample_scalar_channels(sc, 3, nm.rng_for(12, 0, 0))
    assert c1.shape == (3, 14, 14)
    assert np.array_equal(c1, c2)


def test_scenario_json_round_trip():
    sc = small_scenario(seed=13, users=3, tx_antennas=4, rx_antennas=2)
    back = nm.scenario_from_json(nm.scenario_to_json(sc))
    assert back.users_per_cell == sc.users_per_cell
    assert np.array_equal(back.serving, sc.serving)
    assert np.allclose(back.user_xy, sc.user_xy)
    assert back.p_max_w == sc.p_max_w


def test_channel_dump_round_trip(tmp_path):
    sc = small_scenario(seed=14, tx_antennas=2, rx_antennas=2)
    h = nm.sample_channels(sc, nm.rng_for(14, 0, 0))
    path = tmp_path / "channels.bin"
    nm.dump_channels(path, h)
    back = nm.load_channels(path)
    assert back.shape == h.shape
    assert np.array_equal(back, h)
