import numpy as np
import pytest

from celledge import netmodel as nm, powercontrol as pc, utility as U
from celledge.beamforming import OuterConfig
from celledge.innersolver import Schedule

FAST = OuterConfig(max_outer=30, inner=Schedule(max_iters=300, patience=60))


def random_gains(rng, k):
    g = rng.uniform(0.01, 1.0, (k, k))
    g[np.arange(k), np.arange(k)] = rng.uniform(0.5, 2.0, k)
    return g


def test_qft_identity_unit_case():
    gains = np.array([[1.0]])
    p = np.array([1.0])
    # A = 1, B = sigma2 = 1 -> x = 1; aux rate log(1 + 2 - 1) = log 2 = true rate
    x = pc.qft_aux(gains, p, 1.0)
    assert x[0] == pytest.approx(1.0)
    assert pc.qft_aux_rates(gains, p, x, 1.0)[0] == pytest.approx(np.log(2.0))


def test_qft_zero_power():
    gains = np.array([[1.0]])
    p = np.zeros(1)
    x = pc.qft_aux(gains, p, 1.0)
    assert x[0] == 0.0
    assert pc.qft_aux_rates(gains, p, x, 1.0)[0] == 0.0


def test_lft_identity_unit_case():
    gains = np.array([[1.0]])
    p = np.array([1.0])
    x = pc.lft_aux(gains, p, 1.0)
    assert x[0] == pytest.approx(1.0)
    # -1 + log 2 + 1 = log 2
    assert pc.lft_aux_rates(gains, p, x, 1.0)[0] == pytest.approx(np.log(2.0))


def test_lft_zero_signal():
    gains = np.diag([0.0, 1.0]) + np.array([[0.0, 0.5], [0.5, 0.0]])
    p = np.array([1.0, 1.0])
    x = pc.lft_aux(gains, p, 1.0)
    aux = pc.lft_aux_rates(gains, p, x, 1.0)
    assert aux[0] == pytest.approx(0.0)  # A = 0 -> -1 + log 1 + 1 = 0


def test_transform_identities_random():
    rng = np.random.default_rng(0)
    for _ in range(200):
        k = int(rng.integers(1, 9))
        gains = random_gains(rng, k)
        p = rng.uniform(0.0, 2.0, k)
        s2 = float(rng.uniform(0.1, 2.0))
        true = nm.power_rates(gains, p, s2)
        xq = pc.qft_aux(gains, p, s2)
        xl = pc.lft_aux(gains, p, s2)
        assert np.allclose(pc.qft_aux_rates(gains, p, xq, s2), true, atol=1e-12)
        assert np.allclose(pc.lft_aux_rates(gains, p, xl, s2), true, atol=1e-12)


def test_transforms_are_maxima_over_x():
    rng = np.random.default_rng(1)
    gains = random_gains(rng, 4)
    p = rng.uniform(0.1, 2.0, 4)
    true = nm.power_rates(gains, p, 1.0)
    xq = pc.qft_aux(gains, p, 1.0)
    xl = pc.lft_aux(gains, p, 1.0)
    for _ in range(50):
        bump = rng.uniform(0.5, 1.5, 4)
        assert np.all(pc.qft_aux_rates(gains, p, xq * bump, 1.0) <= true + 1e-12)
        assert np.all(pc.lft_aux_rates(gains, p, xl * bump, 1.0) <= true + 1e-12)


def test_ewma():
    assert pc.ewma_update(np.zeros(1), np.ones(1), 0.3)[0] == pytest.approx(0.3)
    rbar = np.zeros(1)
    for _ in range(200):
        rbar = pc.ewma_update(rbar, np.full(1, 2.0), 0.3)
    assert rbar[0] == pytest.approx(2.0, rel=1e-12)
    with pytest.raises(ValueError):
        pc.ewma_update(np.zeros(1), np.ones(1), 1.0)


def test_ewma_stays_within_history_range():
    rng = np.random.default_rng(2)
    rbar = np.zeros(3)
    rates_hist = []
    for _ in range(40):
        r = rng.uniform(0.0, 3.0, 3)
        rates_hist.append(r)
        rbar = pc.ewma_update(rbar, r, 0.4)
    hist = np.array(rates_hist)
    # rbar is a convex combination of past rates and the zero start
    assert np.all(rbar <= hist.max(axis=0) + 1e-12)
    assert np.all(rbar >= 0.0)


def _monotone(t):
    t = np.asarray(t)
    return np.all(np.diff(t) >= -1e-9 * (1.0 + np.abs(t[:-1])))


def test_shortterm_monotone_and_tight():
    rng = np.random.default_rng(3)
    gains = random_gains(rng, 8) * 1e-6
    p0 = rng.uniform(0.0, 20.0, 8)
    for transform in ("qft", "lft"):
        res = pc.shortterm_run(gains, U.SumSmallest(2), transform, p0, 1e-10, 20.0, FAST)
        assert _monotone(res.trace_true)
        assert np.all(res.aux_gap <= 1e-8 * (1.0 + np.abs(res.trace_true[:-1])))
        assert np.all(res.p >= 0) and np.all(res.p <= 20.0 + 1e-9)


def test_multiband_symmetric_toy_matches_grid_oracle():
    # two users, no cross gains, equal per-band direct gains: the optimum
    # splits each user's budget evenly across the three bands
    f, p_max, s2, g = 3, 3.0, 1.0, 2.0
    gains = np.zeros((f, 2, 2))
    for band in range(f):
        gains[band] = np.diag([g, g])
    spec = U.MinOf((U.Sum((0, 1, 2)), U.Sum((3, 4, 5))))

    def user_rate(p_bands):
        return sum(np.log1p(g * pb / s2) for pb in p_bands)

    # brute grid over one user's simplex (the problem decouples and is symmetric)
    best = -np.inf
    grid = np.linspace(0.0, p_max, 61)
    for p1 in grid:
        for p2 in grid:
            p3 = p_max - p1 - p2
            if p3 < 0:
                continue
            best = max(best, user_rate([p1, p2, p3]))
    closed_form = user_rate([p_max / 3] * 3)
    assert best == pytest.approx(closed_form, abs=1e-3)

    rng = np.random.default_rng(4)
    p0 = rng.uniform(0, p_max / f, (2, f))
    cfg = OuterConfig(max_outer=40, inner=Schedule(max_iters=600, patience=100))
    res = pc.shortterm_run(gains, spec, "qft", p0, s2, p_max, cfg)
    assert res.trace_true[-1] == pytest.approx(closed_form, rel=1e-3)
    assert np.allclose(res.p, p_max / 3, atol=0.05)


def test_pf_percentile_keeps_everyone_on():
    rng = np.random.default_rng(5)
    k = 10
    gains = random_gains(rng, k) * 1e-6
    spec = U.SumSmallestOf(3, tuple(U.LogSum((i,)) for i in range(k)))
    p0 = rng.uniform(0.0, 20.0, k)
    res = pc.shortterm_run(gains, spec, "qft", p0, 1e-10, 20.0, FAST, barrier=True)
    assert np.all(res.p > 0.0)
    assert _monotone(res.trace_true)


def test_longterm_single_user_full_power():
    gains = [np.array([[1e-6]]) for _ in range(10)]
    res = pc.longterm_run(gains, 1, "qft", 0.3, 1e-10, 20.0, FAST,
                          p0=np.array([5.0]), rng=np.random.default_rng(0))
    for s in res.slots:
        assert s.powers[0] == pytest.approx(20.0, rel=1e-6)


def test_longterm_alpha_near_one_degenerates_to_per_slot():
    rng = np.random.default_rng(6)
    gains = random_gains(rng, 4) * 1e-6
    alpha = 1.0 - 1e-9
    res = pc.longterm_run([gains], 2, "lft", alpha, 1e-10, 20.0, FAST,
                          p0=rng.uniform(0, 20, 4))
    # with alpha ~ 1 the averaged rate equals the instantaneous rate
    assert np.allclose(res.rbar, res.slots[0].rates, rtol=1e-6)


def test_longterm_slot_traces_monotone():
    rng = np.random.default_rng(7)
    streams = [random_gains(rng, 6) * 1e-6 for _ in range(6)]
    res = pc.longterm_run(streams, 2, "qft", 0.3, 1e-10, 20.0, FAST,
                          rng=np.random.default_rng(1))
    for s in res.slots:
        assert _monotone(s.trace_true)
    assert res.objective.shape == (6,)


def test_invalid_transform():
    with pytest.raises(ValueError):
        pc.shortterm_run(np.eye(2), U.Sum(), "bad", np.ones(2), 1.0, 1.0, FAST)
