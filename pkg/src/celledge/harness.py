"""Experiment harness: JSON configs, presets, seeded trials, file outputs.

A run executes `trials` independent network drops. Trial t derives its
generator from (master seed, t), so outputs are identical for any thread
count and any scheduling. Numeric outputs (trace/CDF/summary) carry no
wall-clock data; timings are written separately.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import baselines, beamforming, netmodel, powercontrol, utility
from .innersolver import Schedule

BEAMFORMING_ALGOS = ("mqft", "sgqp-wmse", "cwsr", "zfn")
POWER_ALGOS = ("qft-power", "lft-power", "wmmse-pf", "equal",
               "random-uniform", "random-rayleigh", "random-exponential")
ALGORITHMS = BEAMFORMING_ALGOS + POWER_ALGOS


class ConfigError(ValueError):
    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


def _get(doc, path, default=None, required=False, kind=None):
    node = doc
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            if required:
                raise ConfigError(path, "missing required field")
            return default
        node = node[part]
    if kind is not None:
        try:
            node = kind(node)
        except (TypeError, ValueError) as err:
            raise ConfigError(path, f"expected {kind.__name__}: {err}") from err
    return node


@dataclass
class RunConfig:
    raw: dict
    # scenario
    cells: int
    users_per_cell: object
    tx_antennas: int
    rx_antennas: int
    inter_site_m: float
    bandwidth_hz: float
    noise_power_w: float
    p_max_w: float
    pathloss_d0_m: float
    pathloss_exp: float
    # algorithm
    algorithm: str
    inner: Schedule
    outer: beamforming.OuterConfig
    barrier: bool
    n_null: int
    wsr_iters: int
    # utility / experiment
    spec: object
    kq: int | None
    trials: int
    slots: int
    bands: int
    seed: int
    alpha: float

    @property
    def run_id(self):
        blob = json.dumps(self.raw, sort_keys=True).encode()
        return hashlib.sha1(blob).hexdigest()[:10]


def parse_config(doc):
    doc = copy.deepcopy(doc)
    cells = _get(doc, "scenario.cells", 7, kind=int)
    users = _get(doc, "scenario.users_per_cell", required=True)
    bandwidth = _get(doc, "scenario.bandwidth_hz", netmodel.BANDWIDTH_HZ, kind=float)
    noise = _get(doc, "scenario.noise_power_w")
    if noise is None:
        psd = _get(doc, "scenario.noise_psd_dbm_hz", netmodel.NOISE_PSD_DBM_HZ, kind=float)
        noise = netmodel.noise_power_watts(psd, bandwidth)
    p_max = _get(doc, "scenario.p_max_w")
    if p_max is None:
        p_max = netmodel.dbm_to_watts(_get(doc, "scenario.p_max_dbm", netmodel.P_MAX_DBM, kind=float))
    algorithm = _get(doc, "algorithm.name", required=True, kind=str)
    if algorithm not in ALGORITHMS:
        raise ConfigError("algorithm.name", f"unknown algorithm {algorithm!r}; choose from {ALGORITHMS}")
    inner = Schedule(
        max_iters=_get(doc, "algorithm.inner.max_iters", 3000, kind=int),
        tol_rel=_get(doc, "algorithm.inner.tol_rel", 1e-6, kind=float),
        patience=_get(doc, "algorithm.inner.patience", 200, kind=int),
        step_scale=_get(doc, "algorithm.inner.step_scale", 0.1, kind=float))
    outer = beamforming.OuterConfig(
        max_outer=_get(doc, "algorithm.outer.max_iters", 100, kind=int),
        tol_rel=_get(doc, "algorithm.outer.tol_rel", 1e-5, kind=float),
        patience=_get(doc, "algorithm.outer.patience", 3, kind=int),
        inner=inner)
    trials = _get(doc, "experiment.trials", 1, kind=int)
    slots = _get(doc, "experiment.slots", 1, kind=int)
    bands = _get(doc, "experiment.bands", 1, kind=int)
    seed = _get(doc, "experiment.seed", required=True, kind=int)
    alpha = _get(doc, "experiment.alpha", 0.3, kind=float)
    if trials < 1:
        raise ConfigError("experiment.trials", "must be >= 1")
    if bands < 1:
        raise ConfigError("experiment.bands", "must be >= 1")
    if slots > 1 and bands != 1:
        raise ConfigError("experiment.bands", "long-term runs are single-band")

    if np.isscalar(users):
        n_users = int(users) * cells
    else:
        n_users = int(sum(users))
    kq = _get(doc, "experiment.kq")
    if kq is None:
        q = _get(doc, "experiment.q")
        if q is not None:
            kq = utility.kq_from_percentile(float(q), n_users * bands)
    if kq is not None:
        kq = int(kq)
        if not 1 <= kq <= n_users * bands:
            raise ConfigError("experiment.kq", f"must lie in [1, {n_users * bands}]")

    spec_doc = _get(doc, "utility")
    if spec_doc is not None:
        try:
            spec = utility.from_json_dict(spec_doc)
        except (ValueError, KeyError, TypeError) as err:
            raise ConfigError("utility", str(err)) from err
    elif kq is not None:
        spec = utility.SumSmallest(kq)
    else:
        raise ConfigError("utility", "provide a utility spec or experiment.kq/q")
    if kq is None and isinstance(spec, utility.SumSmallest) and spec.over is None:
        kq = spec.k

    return RunConfig(
        raw=doc, cells=cells, users_per_cell=users,
        tx_antennas=_get(doc, "scenario.tx_antennas", 1, kind=int),
        rx_antennas=_get(doc, "scenario.rx_antennas", 1, kind=int),
        inter_site_m=_get(doc, "scenario.inter_site_m", netmodel.INTER_SITE_M, kind=float),
        bandwidth_hz=bandwidth, noise_power_w=float(noise), p_max_w=float(p_max),
        pathloss_d0_m=_get(doc, "scenario.pathloss_d0_m", netmodel.PATHLOSS_D0_M, kind=float),
        pathloss_exp=_get(doc, "scenario.pathloss_exp", netmodel.PATHLOSS_EXP, kind=float),
        algorithm=algorithm, inner=inner, outer=outer,
        barrier=bool(_get(doc, "algorithm.barrier", False)),
        n_null=_get(doc, "algorithm.n_null", 2, kind=int),
        wsr_iters=_get(doc, "algorithm.wsr_iters", 150, kind=int),
        spec=spec, kq=kq, trials=trials, slots=slots, bands=bands, seed=seed, alpha=alpha)


def load_config(path=None, preset=None, overrides=None):
    if (path is None) == (preset is None):
        raise ConfigError("config", "give exactly one of a config path or a preset name")
    doc = preset_config(preset) if preset else json.loads(Path(path).read_text())
    for dotted, value in (overrides or {}).items():
        set_by_path(doc, dotted, value)
    return parse_config(doc)


def set_by_path(doc, dotted, value):
    parts = dotted.split(".")
    node = doc
    for part in parts[:-1]:
        key = int(part) if isinstance(node, list) else part
        if isinstance(node, list):
            node = node[key]
        else:
            node = node.setdefault(key, {})
    last = parts[-1]
    if isinstance(node, list):
        node[int(last)] = value
    else:
        node[last] = value


# ---------------------------------------------------------------------------
# Trial execution
# ---------------------------------------------------------------------------


@dataclass
class TrialRecord:
    trial: int
    algorithm: str
    objective: float
    objective_mbps: float
    trace_true: np.ndarray
    trace_aux: np.ndarray
    rates_nats: np.ndarray
    rates_mbps: np.ndarray
    allocation: np.ndarray
    feasible: bool
    monotone: bool
    seconds: float
    slots: list = field(default_factory=list)  # long-term per-slot rows


def _build_scenario(cfg, rng):
    return netmodel.build_hex_topology(
        cfg.cells, cfg.users_per_cell, rng,
        inter_site_m=cfg.inter_site_m,
        tx_antennas=cfg.tx_antennas, rx_antennas=cfg.rx_antennas,
        noise_power_w=cfg.noise_power_w, bandwidth_hz=cfg.bandwidth_hz,
        p_max_w=cfg.p_max_w, pathloss_d0_m=cfg.pathloss_d0_m,
        pathloss_exp=cfg.pathloss_exp)


def _require_kq(cfg, where):
    if cfg.kq is None:
        raise ConfigError("experiment.kq", f"{where} needs a percentile size kq (or q)")
    return cfg.kq


def _beamforming_feasible(scenario, v):
    return bool(np.all(netmodel.bs_powers(v, scenario.serving, scenario.n_cells)
                       <= scenario.p_max_w * (1 + 1e-9)))


def _power_feasible(p, p_max):
    p = np.atleast_2d(np.asarray(p, dtype=float))
    return bool(np.all(p >= -1e-12) and np.all(p.sum(axis=-1) <= p_max * (1 + 1e-9)))


def _monotone(trace):
    if len(trace) < 2:
        return True
    t = np.asarray(trace, dtype=float)
    return bool(np.all(np.diff(t) >= -1e-9 * (1.0 + np.abs(t[:-1]))))


def run_trial(cfg, trial):
    t0 = time.perf_counter()
    rng = netmodel.rng_for(cfg.seed, trial)
    scenario = _build_scenario(cfg, rng)
    k = scenario.n_users
    sigma2 = scenario.noise_power_w
    slot_rows = []

    if cfg.algorithm in BEAMFORMING_ALGOS:
        h = netmodel.sample_channels(scenario, rng)
        hs = netmodel.gather_serving(h, scenario.serving)
        v0 = beamforming.matched_filter_init(h, scenario)
        trace_aux = np.array([])
        if cfg.algorithm == "mqft":
            res = beamforming.qt_run(scenario, h, cfg.spec, v0, cfg.outer, cfg.barrier)
            v, trace, trace_aux = res.v, res.trace_true, res.trace_aux
        elif cfg.algorithm == "sgqp-wmse":
            res = beamforming.wmse_run(scenario, h, _require_kq(cfg, "sgqp-wmse"), v0, cfg.outer)
            v, trace, trace_aux = res.v, res.trace_true, res.trace_aux
        elif cfg.algorithm == "cwsr":
            weights = baselines.cwsr_weights(h, scenario.serving)
            wres = baselines.wmmse_wsr_beamforming(scenario, h, weights, v0, cfg.wsr_iters)
            v = wres.solution
            trace = np.array([utility.evaluate(cfg.spec, netmodel.user_rates(hs, v0, sigma2), cfg.barrier),
                              utility.evaluate(cfg.spec, netmodel.user_rates(hs, v, sigma2), cfg.barrier)])
        else:  # zfn
            v = baselines.zf_nulling(h, scenario, cfg.n_null)
            trace = np.array([utility.evaluate(cfg.spec, netmodel.user_rates(hs, v, sigma2), cfg.barrier)])
        rates = netmodel.user_rates(hs, v, sigma2)
        objective = utility.evaluate(cfg.spec, rates, cfg.barrier)
        allocation = v
        feasible = _beamforming_feasible(scenario, v)
    else:
        gains = netmodel.scalar_power_gains(
            netmodel.sample_scalar_channels(scenario, cfg.bands, rng))
        single = cfg.bands == 1
        gains_run = gains[0] if single else gains
        p0 = rng.uniform(0.0, scenario.p_max_w / cfg.bands, size=(k, cfg.bands))
        if single:
            p0 = p0[:, 0]
        if cfg.algorithm in ("qft-power", "lft-power"):
            transform = "qft" if cfg.algorithm == "qft-power" else "lft"
            if cfg.slots == 1:
                res = powercontrol.shortterm_run(gains_run, cfg.spec, transform, p0,
                                                 sigma2, scenario.p_max_w, cfg.outer,
                                                 cfg.barrier)
                p, trace, trace_aux = res.p, res.trace_true, res.trace_aux
                rates = netmodel.power_rates(gains_run, p, sigma2)
                objective = utility.evaluate(cfg.spec, np.ravel(rates), cfg.barrier)
            else:
                stream = (netmodel.scalar_power_gains(
                    netmodel.sample_scalar_channels(scenario, 1, netmodel.rng_for(cfg.seed, trial, 0, n)))[0]
                    for n in range(cfg.slots))
                res = powercontrol.longterm_run(stream, _require_kq(cfg, "long-term"),
                                                transform, cfg.alpha, sigma2,
                                                scenario.p_max_w, cfg.outer, p0=p0,
                                                rng=netmodel.rng_for(cfg.seed, trial, 1))
                p, trace, trace_aux = res.slots[-1].powers, res.objective, np.array([])
                rates = res.rbar
                objective = utility.sum_smallest(rates, cfg.kq)
                slot_rows = [(s.slot, s.rates, s.rbar, s.powers) for s in res.slots]
        elif cfg.algorithm == "wmmse-pf":
            kq = _require_kq(cfg, "wmmse-pf")
            stream = (netmodel.scalar_power_gains(
                netmodel.sample_scalar_channels(scenario, 1, netmodel.rng_for(cfg.seed, trial, 0, n)))[0]
                for n in range(cfg.slots))
            res = baselines.pf_wmmse_longterm(stream, cfg.alpha, sigma2, scenario.p_max_w)
            p = res.powers
            rates = res.rbar
            objective = utility.sum_smallest(rates, kq)
            trace = np.array([objective])
            trace_aux = np.array([])
        else:
            if cfg.algorithm == "equal":
                p = baselines.equal_power(scenario.p_max_w, k, cfg.bands)
            else:
                policy = cfg.algorithm.split("-", 1)[1]
                p = baselines.random_power(policy, scenario.p_max_w, k, cfg.bands, rng)
            if single:
                p = p[:, 0]
            rates = netmodel.power_rates(gains_run, p, sigma2)
            objective = utility.evaluate(cfg.spec, np.ravel(rates), cfg.barrier)
            trace = np.array([objective])
            trace_aux = np.array([])
        allocation = p
        feasible = _power_feasible(np.asarray(p).reshape(k, -1), scenario.p_max_w)

    rates = np.ravel(rates)
    return TrialRecord(
        trial=trial, algorithm=cfg.algorithm,
        objective=float(objective),
        objective_mbps=float(scenario.nats_to_mbps(objective)),
        trace_true=np.asarray(trace, dtype=float),
        trace_aux=np.asarray(trace_aux, dtype=float),
        rates_nats=rates, rates_mbps=np.asarray(scenario.nats_to_mbps(rates)),
        allocation=np.asarray(allocation),
        feasible=feasible, monotone=_monotone(trace),
        seconds=time.perf_counter() - t0,
        slots=slot_rows)


@dataclass
class RunResult:
    config: RunConfig
    records: list
    summary: dict


def _summary(cfg, records):
    objs = np.array([r.objective for r in records])
    mbps = np.array([r.objective_mbps for r in records])
    order = np.sort(mbps)
    return {
        "run_id": cfg.run_id,
        "algorithm": cfg.algorithm,
        "trials": len(records),
        "objective_nats": {
            "mean": float(objs.mean()), "std": float(objs.std()),
            "p05": float(np.percentile(objs, 5)), "p50": float(np.percentile(objs, 50)),
            "p95": float(np.percentile(objs, 95)),
        },
        "objective_mbps": {
            "mean": float(mbps.mean()), "std": float(mbps.std()),
            "p05": float(np.percentile(mbps, 5)), "p50": float(np.percentile(mbps, 50)),
            "p95": float(np.percentile(mbps, 95)),
        },
        "cdf": {
            "value_mbps": [float(v) for v in order],
            "empirical_cdf": [float(c) for c in (np.arange(1, order.size + 1) / order.size)],
        },
        "all_monotone": bool(all(r.monotone for r in records)),
        "all_feasible": bool(all(r.feasible for r in records)),
    }


def run(cfg, threads=1):
    """Execute all trials (thread pool size `threads`; results are
    deterministic regardless)."""
    if threads <= 1:
        records = [run_trial(cfg, t) for t in range(cfg.trials)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(lambda t: run_trial(cfg, t), range(cfg.trials)))
    records.sort(key=lambda r: r.trial)
    return RunResult(config=cfg, records=records, summary=_summary(cfg, records))


def sweep(cfg, param, values, threads=1):
    """Re-run the config once per parameter value with common random numbers."""
    out = []
    for value in values:
        doc = copy.deepcopy(cfg.raw)
        set_by_path(doc, param, value)
        out.append((value, run(parse_config(doc), threads)))
    return out


# ---------------------------------------------------------------------------
# Output files
# ---------------------------------------------------------------------------


def emit(result, outdir, formats=("csv", "json")):
    """Write trace/CDF/summary (deterministic) plus timings (wall clock).

    Returns the list of written paths.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    cfg = result.config
    run_id = cfg.run_id
    paths = []
    if "csv" in formats:
        trace_path = outdir / "trace.csv"
        with open(trace_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["run_id", "trial", "outer_iter", "objective_true",
                        "objective_aux", "feasible"])
            for rec in result.records:
                aux = rec.trace_aux
                for i, val in enumerate(rec.trace_true):
                    a = aux[i - 1] if 0 < i <= aux.size else val
                    w.writerow([run_id, rec.trial, i, f"{val:.12e}", f"{a:.12e}",
                                int(rec.feasible)])
        paths.append(trace_path)
        cdf_path = outdir / "cdf.csv"
        with open(cdf_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["value_mbps", "empirical_cdf"])
            for v, c in zip(result.summary["cdf"]["value_mbps"],
                            result.summary["cdf"]["empirical_cdf"]):
                w.writerow([f"{v:.12e}", f"{c:.6f}"])
        paths.append(cdf_path)
        if any(rec.slots for rec in result.records):
            slot_path = outdir / "slots.csv"
            with open(slot_path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["run_id", "trial", "slot", "user", "rate_nats",
                            "rbar_nats", "power_w"])
                for rec in result.records:
                    for slot, rates, rbar, powers in rec.slots:
                        for u in range(len(rates)):
                            w.writerow([run_id, rec.trial, slot, u,
                                        f"{rates[u]:.12e}", f"{rbar[u]:.12e}",
                                        f"{powers[u]:.12e}"])
            paths.append(slot_path)
        timing_path = outdir / "timings.csv"
        with open(timing_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["run_id", "trial", "seconds"])
            for rec in result.records:
                w.writerow([run_id, rec.trial, f"{rec.seconds:.6f}"])
        paths.append(timing_path)
    if "json" in formats:
        summary_path = outdir / "summary.json"
        doc = dict(result.summary)
        doc["final_rates_nats"] = [r.rates_nats.tolist() for r in result.records]
        doc["final_rates_mbps"] = [r.rates_mbps.tolist() for r in result.records]
        summary_path.write_text(json.dumps(doc, indent=1, sort_keys=True))
        paths.append(summary_path)
    return paths


# ---------------------------------------------------------------------------
# Presets (paper-scale experiment families)
# ---------------------------------------------------------------------------


def _base_scenario(users_per_cell, tx, rx):
    return {
        "cells": 7, "users_per_cell": users_per_cell,
        "tx_antennas": tx, "rx_antennas": rx,
        "inter_site_m": 2000.0, "bandwidth_hz": 20e6,
        "noise_psd_dbm_hz": -143.0, "p_max_dbm": 43.0,
        "pathloss_d0_m": 0.392, "pathloss_exp": 3.76,
    }


def preset_config(name):
    presets = {
        # 7 cells, K=35, M=8, N=2, percentile size 2 from q=5.7
        "fig1": {
            "scenario": _base_scenario(5, 8, 2),
            "algorithm": {"name": "mqft",
                          "inner": {"max_iters": 600, "patience": 80}},
            "experiment": {"trials": 5, "seed": 2024, "q": 5.7},
        },
        "fig2": {
            "scenario": _base_scenario(5, 8, 2),
            "algorithm": {"name": "sgqp-wmse",
                          "inner": {"max_iters": 600, "patience": 80}},
            "experiment": {"trials": 5, "seed": 2024, "q": 5.7},
        },
        # K=14 single-antenna comparison family (run with algorithm.name in
        # {mqft, sgqp-wmse, cwsr, zfn}, e.g. via sweep --param algorithm.name)
        "fig3": {
            "scenario": _base_scenario(2, 4, 1),
            "algorithm": {"name": "mqft", "n_null": 2,
                          "inner": {"max_iters": 500, "patience": 80}},
            "experiment": {"trials": 10, "seed": 33, "kq": 2},
        },
        # K=56 power control, sum-rate + w * 25th-percentile tradeoff
        "fig4": {
            "scenario": _base_scenario(8, 1, 1),
            "algorithm": {"name": "qft-power",
                          "inner": {"max_iters": 400, "patience": 60}},
            "utility": {"wsum": [[1.0, {"sum": "all"}],
                                 [10.0, {"slqp": {"kq": 14, "over": "all"}}]]},
            "experiment": {"trials": 20, "seed": 44, "kq": 14},
        },
        # K=140 per-cell 10th-percentile hybrids (minimum across cells)
        "fig5": {
            "scenario": _base_scenario(20, 1, 1),
            "algorithm": {"name": "qft-power",
                          "inner": {"max_iters": 400, "patience": 60}},
            "utility": {"minof": [{"slqp": {"kq": 2, "over": list(range(20 * b, 20 * (b + 1)))}}
                                  for b in range(7)]},
            "experiment": {"trials": 10, "seed": 55},
        },
        # K=140 long-term ergodic 20th percentile, alpha = 0.30
        "table1": {
            "scenario": _base_scenario(20, 1, 1),
            "algorithm": {"name": "qft-power",
                          "inner": {"max_iters": 200, "patience": 40},
                          "outer": {"max_iters": 20}},
            "experiment": {"trials": 10, "seed": 77, "slots": 200,
                           "alpha": 0.30, "q": 20.0},
        },
        # K=56, F=3 multi-band max-min vs power level (sweep scenario.p_max_dbm)
        "fig8": {
            "scenario": _base_scenario(8, 1, 1),
            "algorithm": {"name": "qft-power",
                          "inner": {"max_iters": 400, "patience": 60}},
            "utility": {"minof": [{"sum": [3 * k, 3 * k + 1, 3 * k + 2]}
                                  for k in range(56)]},
            "experiment": {"trials": 100, "seed": 88, "bands": 3},
        },
    }
    presets["fig7"] = copy.deepcopy(presets["table1"])
    if name not in presets:
        raise ConfigError("preset", f"unknown preset {name!r}; choose from {sorted(presets)}")
    return copy.deepcopy(presets[name])
