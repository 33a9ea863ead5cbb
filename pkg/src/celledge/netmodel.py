"""Network geometry, fading channels and rate evaluation.

The layout is the classic hexagonal cluster: one or seven cells, base
stations at the hexagon centers, users dropped uniformly inside their
serving cell. With seven cells the cluster wraps around, i.e. distances are
minimized over the seven torus images of each point, so every base station
sees six neighbours at exactly the inter-site distance.

Pathloss follows the COST-231-style amplitude model (1 + d/d0)^(-zeta/2);
small-scale fading is i.i.d. unit-variance circularly-symmetric Gaussian,
redrawn independently per slot (block fading). Rates are in nats per
channel use internally; reporting converts nats -> bits -> Mbps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import kernels

INTER_SITE_M = 2000.0
PATHLOSS_D0_M = 0.392
PATHLOSS_EXP = 3.76
NOISE_PSD_DBM_HZ = -143.0
BANDWIDTH_HZ = 20e6
P_MAX_DBM = 43.0

LN2 = float(np.log(2.0))


def dbm_to_watts(dbm):
    return 10.0 ** (dbm / 10.0 - 3.0)


def noise_power_watts(psd_dbm_hz=NOISE_PSD_DBM_HZ, bandwidth_hz=BANDWIDTH_HZ):
    return dbm_to_watts(psd_dbm_hz) * bandwidth_hz


def rng_for(seed, *key):
    """Deterministic child generator for (seed, key...), used per trial/slot."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


def _hex_neighbor_dirs():
    ang = np.deg2rad(60.0 * np.arange(6))
    return np.stack([np.cos(ang), np.sin(ang)], axis=1)


def hex_cluster_layout(n_cells, inter_site_m):
    """BS coordinates and wrap-around offsets for a 1- or 7-cell cluster."""
    if n_cells == 1:
        return np.zeros((1, 2)), np.zeros((1, 2))
    if n_cells != 7:
        raise ValueError(f"hex layout supports 1 or 7 cells, got {n_cells}")
    d = inter_site_m
    bs = np.vstack([np.zeros((1, 2)), d * _hex_neighbor_dirs()])
    # cluster lattice vector 2*a1 + a2 and its 60-degree rotations
    t1 = d * np.array([2.5, np.sqrt(3.0) / 2.0])
    ang = np.deg2rad(60.0 * np.arange(6))
    rot = np.stack([np.stack([np.cos(ang), -np.sin(ang)], axis=1),
                    np.stack([np.sin(ang), np.cos(ang)], axis=1)], axis=1)
    wrap = np.vstack([np.zeros((1, 2)), rot @ t1])
    return bs, wrap


@dataclass(frozen=True)
class NetworkScenario:
    n_cells: int
    users_per_cell: tuple
    inter_site_m: float
    tx_antennas: int
    rx_antennas: int
    noise_power_w: float
    bandwidth_hz: float
    p_max_w: float
    pathloss_d0_m: float
    pathloss_exp: float
    bs_xy: np.ndarray
    user_xy: np.ndarray
    serving: np.ndarray
    wrap_xy: np.ndarray

    @property
    def n_users(self):
        return int(self.serving.size)

    def users_of_cell(self, b):
        return np.nonzero(self.serving == b)[0]

    def cell_groups(self):
        return [self.users_of_cell(b) for b in range(self.n_cells)]

    def nats_to_mbps(self, x):
        return np.asarray(x) / LN2 * self.bandwidth_hz / 1e6


def wrap_distance(points_a, points_b, wrap_xy):
    """Pairwise distances min over torus images; shapes (...,2) broadcastable."""
    a = np.asarray(points_a, dtype=float)[..., None, :]
    b = np.asarray(points_b, dtype=float)[..., None, :] + wrap_xy
    return np.linalg.norm(a - b, axis=-1).min(axis=-1)


def _drop_in_hexagon(center, inter_site_m, rng):
    # rejection sampling; the hexagon is the Voronoi cell against the six
    # lattice neighbours at the inter-site distance
    rc = inter_site_m / np.sqrt(3.0)
    dirs = _hex_neighbor_dirs()
    while True:
        xy = center + rng.uniform(-rc, rc, size=2)
        if np.all((xy - center) @ dirs.T <= inter_site_m / 2.0 + 1e-12):
            return xy


def build_hex_topology(n_cells, users_per_cell, rng, *,
                       inter_site_m=INTER_SITE_M,
                       tx_antennas=1, rx_antennas=1,
                       noise_power_w=None, bandwidth_hz=BANDWIDTH_HZ,
                       p_max_w=None,
                       pathloss_d0_m=PATHLOSS_D0_M, pathloss_exp=PATHLOSS_EXP):
    """Drop a seeded scenario: hexagonal cluster plus uniform user positions."""
    if np.isscalar(users_per_cell):
        users_per_cell = (int(users_per_cell),) * n_cells
    users_per_cell = tuple(int(u) for u in users_per_cell)
    if len(users_per_cell) != n_cells or min(users_per_cell) < 1:
        raise ValueError("users_per_cell must give a positive count per cell")
    if noise_power_w is None:
        noise_power_w = noise_power_watts(NOISE_PSD_DBM_HZ, bandwidth_hz)
    if p_max_w is None:
        p_max_w = dbm_to_watts(P_MAX_DBM)
    if noise_power_w <= 0 or p_max_w <= 0:
        raise ValueError("noise power and p_max must be positive")
    bs_xy, wrap_xy = hex_cluster_layout(n_cells, inter_site_m)
    user_xy = []
    serving = []
    for b in range(n_cells):
        for _ in range(users_per_cell[b]):
            user_xy.append(_drop_in_hexagon(bs_xy[b], inter_site_m, rng))
            serving.append(b)
    return NetworkScenario(
        n_cells=n_cells, users_per_cell=users_per_cell, inter_site_m=float(inter_site_m),
        tx_antennas=int(tx_antennas), rx_antennas=int(rx_antennas),
        noise_power_w=float(noise_power_w), bandwidth_hz=float(bandwidth_hz),
        p_max_w=float(p_max_w), pathloss_d0_m=float(pathloss_d0_m),
        pathloss_exp=float(pathloss_exp),
        bs_xy=bs_xy, user_xy=np.asarray(user_xy), serving=np.asarray(serving, dtype=np.intp),
        wrap_xy=wrap_xy)


def pathloss_amplitude(d, d0=PATHLOSS_D0_M, zeta=PATHLOSS_EXP):
    """Amplitude gain (1 + d/d0)^(-zeta/2); the power gain is its square."""
    return (1.0 + np.asarray(d, dtype=float) / d0) ** (-zeta / 2.0)


def bs_user_distances(scenario):
    """(K, B) wrap-around distances between users and base stations."""
    return wrap_distance(scenario.user_xy[:, None, :], scenario.bs_xy[None, :, :],
                         scenario.wrap_xy)


def _complex_normal(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def sample_channels(scenario, rng):
    """One block-fading MIMO draw: (K, B, N, M), pathloss times CN(0,1) entries."""
    amp = pathloss_amplitude(bs_user_distances(scenario),
                             scenario.pathloss_d0_m, scenario.pathloss_exp)
    z = _complex_normal(rng, (scenario.n_users, scenario.n_cells,
                              scenario.rx_antennas, scenario.tx_antennas))
    return amp[:, :, None, None] * z


def gather_serving(h, serving):
    """Reindex (K, B, N, M) channels to (K, K, N, M): hs[i, j] = h[i, serving[j]]."""
    return np.ascontiguousarray(h[:, serving])


def sample_scalar_channels(scenario, n_bands, rng):
    """Scalar link draws for the power-control model: (F, K, K) complex.

    Entry [f, k, j] is the band-f channel from the transmitter of user j
    (its serving BS) to the receiver of user k; each pair fades
    independently.
    """
    dist = bs_user_distances(scenario)[:, scenario.serving]  # (K, K)
    amp = pathloss_amplitude(dist, scenario.pathloss_d0_m, scenario.pathloss_exp)
    z = _complex_normal(rng, (n_bands, scenario.n_users, scenario.n_users))
    return amp[None, :, :] * z


def scalar_power_gains(channels):
    return np.abs(channels) ** 2


def interference_covariance(hs, v, user, sigma2):
    """sigma^2 I plus the sum of interfering beam outer products at `user`."""
    k, _, n, _ = hs.shape
    cov = sigma2 * np.eye(n, dtype=np.complex128)
    for j in range(k):
        if j == user:
            continue
        t = hs[user, j] @ v[j]
        cov += np.outer(t, t.conj())
    return cov


def user_rates(hs, v, sigma2):
    """Per-user downlink rates in nats: log(1 + a^H B^-1 a)."""
    return kernels.bf_true_rates(np.ascontiguousarray(hs),
                                 np.ascontiguousarray(v), float(sigma2))


def bs_powers(v, serving, n_cells):
    """Transmit power spent per BS: sum of its users' beamformer norms."""
    p = np.zeros(n_cells)
    np.add.at(p, serving, (np.abs(v) ** 2).sum(axis=1))
    return p


def sinr_components(gains, p, sigma2):
    """Signal power A and interference-plus-noise power B per user.

    gains is (K, K) for single band or (F, K, K) with p (K, F) for multiband.
    """
    gains = np.asarray(gains, dtype=float)
    p = np.asarray(p, dtype=float)
    if gains.ndim == 2:
        return kernels.pc_sinr(gains, np.ascontiguousarray(p), float(sigma2))
    a = np.empty((p.shape[0], gains.shape[0]))
    b = np.empty_like(a)
    for f in range(gains.shape[0]):
        a[:, f], b[:, f] = kernels.pc_sinr(gains[f], np.ascontiguousarray(p[:, f]),
                                           float(sigma2))
    return a, b


def power_rates(gains, p, sigma2):
    """Scalar-model rates log(1 + A/B); same shapes as sinr_components."""
    a, b = sinr_components(gains, p, sigma2)
    return np.log1p(a / b)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def scenario_to_json(scenario):
    doc = {
        "n_cells": scenario.n_cells,
        "users_per_cell": list(scenario.users_per_cell),
        "inter_site_m": scenario.inter_site_m,
        "tx_antennas": scenario.tx_antennas,
        "rx_antennas": scenario.rx_antennas,
        "noise_power_w": scenario.noise_power_w,
        "bandwidth_hz": scenario.bandwidth_hz,
        "p_max_w": scenario.p_max_w,
        "pathloss_d0_m": scenario.pathloss_d0_m,
        "pathloss_exp": scenario.pathloss_exp,
        "bs_xy": scenario.bs_xy.tolist(),
        "user_xy": scenario.user_xy.tolist(),
        "serving": scenario.serving.tolist(),
        "wrap_xy": scenario.wrap_xy.tolist(),
    }
    return json.dumps(doc, indent=1)


def scenario_from_json(text):
    doc = json.loads(text)
    return NetworkScenario(
        n_cells=int(doc["n_cells"]),
        users_per_cell=tuple(doc["users_per_cell"]),
        inter_site_m=float(doc["inter_site_m"]),
        tx_antennas=int(doc["tx_antennas"]),
        rx_antennas=int(doc["rx_antennas"]),
        noise_power_w=float(doc["noise_power_w"]),
        bandwidth_hz=float(doc["bandwidth_hz"]),
        p_max_w=float(doc["p_max_w"]),
        pathloss_d0_m=float(doc["pathloss_d0_m"]),
        pathloss_exp=float(doc["pathloss_exp"]),
        bs_xy=np.asarray(doc["bs_xy"], dtype=float),
        user_xy=np.asarray(doc["user_xy"], dtype=float),
        serving=np.asarray(doc["serving"], dtype=np.intp),
        wrap_xy=np.asarray(doc["wrap_xy"], dtype=float))


def dump_channels(path, arr):
    """Binary channel dump: one-line JSON shape header, then little-endian
    interleaved re/im float64 pairs in C order."""
    arr = np.ascontiguousarray(arr, dtype=np.complex128)
    header = json.dumps({"shape": list(arr.shape), "dtype": "complex128",
                         "layout": "interleaved-re-im-float64-le"})
    with open(path, "wb") as fh:
        fh.write(header.encode("utf-8") + b"\n")
        fh.write(arr.astype("<c16").tobytes())


def load_channels(path):
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        data = np.frombuffer(fh.read(), dtype="<c16")
    return data.reshape(header["shape"]).astype(np.complex128)
