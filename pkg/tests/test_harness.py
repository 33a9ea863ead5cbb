import json

import numpy as np
import pytest

from celledge import harness
from celledge.cli import main as cli_main


def tiny_config(**extra):
    doc = {
        "scenario": {"cells": 1, "users_per_cell": 3, "tx_antennas": 2, "rx_antennas": 1},
        "algorithm": {"name": "mqft",
                      "inner": {"max_iters": 60, "patience": 20},
                      "outer": {"max_iters": 6}},
        "experiment": {"trials": 2, "seed": 7, "kq": 2},
    }
    doc.update(extra)
    return doc


def test_config_validation_errors():
    with pytest.raises(harness.ConfigError, match="experiment.seed"):
        harness.parse_config({"scenario": {"users_per_cell": 2},
                              "algorithm": {"name": "mqft"},
                              "experiment": {"kq": 1}})
    with pytest.raises(harness.ConfigError, match="algorithm.name"):
        harness.parse_config(tiny_config(algorithm={"name": "gradient-descent"}))
    with pytest.raises(harness.ConfigError, match="experiment.kq"):
        harness.parse_config(tiny_config(experiment={"trials": 1, "seed": 1, "kq": 99}))
    with pytest.raises(harness.ConfigError, match="utility"):
        harness.parse_config(tiny_config(experiment={"trials": 1, "seed": 1}))
    bad = tiny_config()
    bad["utility"] = {"nonsense": 3}
    with pytest.raises(harness.ConfigError, match="utility"):
        harness.parse_config(bad)
    with pytest.raises(harness.ConfigError, match="experiment.bands"):
        harness.parse_config(tiny_config(
            experiment={"trials": 1, "seed": 1, "kq": 1, "slots": 5, "bands": 3}))


def test_q_to_kq():
    cfg = harness.parse_config(tiny_config(experiment={"trials": 1, "seed": 1, "q": 40.0}))
    assert cfg.kq == 2  # ceil(0.4 * 3)


def test_run_records_and_summary():
    cfg = harness.parse_config(tiny_config())
    result = harness.run(cfg)
    assert len(result.records) == 2
    for rec in result.records:
        assert rec.feasible and rec.monotone
        assert rec.trace_true.size >= 2
        assert rec.rates_nats.shape == (3,)
        assert rec.objective_mbps == pytest.approx(
            rec.objective / np.log(2) * 20e6 / 1e6, rel=1e-12)
    cdf = result.summary["cdf"]["empirical_cdf"]
    assert cdf[-1] == 1.0
    assert result.summary["cdf"]["value_mbps"] == sorted(result.summary["cdf"]["value_mbps"])


def test_determinism_across_threads(tmp_path):
    cfg = harness.parse_config(tiny_config())
    out1 = harness.emit(harness.run(cfg, threads=1), tmp_path / "a")
    out2 = harness.emit(harness.run(cfg, threads=4), tmp_path / "b")
    for p1, p2 in zip(out1, out2):
        if p1.name == "timings.csv":
            continue
        assert p1.read_bytes() == p2.read_bytes(), p1.name


def test_determinism_across_processes(tmp_path):
    import subprocess
    import sys

    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(tiny_config()))
    for sub in ("p1", "p2"):
        proc = subprocess.run(
            [sys.executable, "-m", "celledge.cli", "run", "--config", str(cfg_path),
             "--out", str(tmp_path / sub)],
            capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
    for name in ("trace.csv", "cdf.csv", "summary.json"):
        assert (tmp_path / "p1" / name).read_bytes() == (tmp_path / "p2" / name).read_bytes()


def test_emit_idempotent_and_trace_rows(tmp_path):
    cfg = harness.parse_config(tiny_config())
    result = harness.run(cfg)
    paths = harness.emit(result, tmp_path)
    trace = (tmp_path / "trace.csv").read_text().strip().splitlines()
    expected_rows = sum(rec.trace_true.size for rec in result.records)
    assert len(trace) == 1 + expected_rows
    before = {p.name: p.read_bytes() for p in paths if p.name != "timings.csv"}
    harness.emit(result, tmp_path)
    for p in paths:
        if p.name != "timings.csv":
            assert p.read_bytes() == before[p.name]


def test_all_algorithms_execute():
    for name in harness.ALGORITHMS:
        doc = tiny_config()
        doc["algorithm"] = {"name": name, "n_null": 1,
                            "inner": {"max_iters": 40, "patience": 15},
                            "outer": {"max_iters": 4}}
        doc["experiment"] = {"trials": 1, "seed": 3, "kq": 2,
                             "slots": 3 if name in ("wmmse-pf", "qft-power", "lft-power") else 1,
                             "bands": 1}
        if name in ("mqft", "sgqp-wmse", "cwsr", "zfn"):
            doc["scenario"] = {"cells": 1, "users_per_cell": 2, "tx_antennas": 3,
                               "rx_antennas": 1}
        else:
            doc["scenario"] = {"cells": 1, "users_per_cell": 3, "tx_antennas": 1,
                               "rx_antennas": 1}
        result = harness.run(harness.parse_config(doc))
        assert result.records[0].feasible, name


def test_multiband_algorithms_execute():
    for name in ("qft-power", "lft-power", "equal", "random-uniform",
                 "random-rayleigh", "random-exponential"):
        doc = {
            "scenario": {"cells": 1, "users_per_cell": 2, "tx_antennas": 1, "rx_antennas": 1},
            "algorithm": {"name": name, "inner": {"max_iters": 40, "patience": 15},
                          "outer": {"max_iters": 4}},
            "utility": {"minof": [{"sum": [0, 1, 2]}, {"sum": [3, 4, 5]}]},
            "experiment": {"trials": 1, "seed": 5, "bands": 3},
        }
        result = harness.run(harness.parse_config(doc))
        rec = result.records[0]
        assert rec.feasible, name
        assert rec.rates_nats.shape == (6,)


def test_longterm_slots_csv(tmp_path):
    doc = tiny_config(algorithm={"name": "qft-power",
                                 "inner": {"max_iters": 40, "patience": 15},
                                 "outer": {"max_iters": 4}})
    doc["scenario"]["tx_antennas"] = 1
    doc["experiment"] = {"trials": 1, "seed": 9, "kq": 2, "slots": 4}
    result = harness.run(harness.parse_config(doc))
    harness.emit(result, tmp_path)
    lines = (tmp_path / "slots.csv").read_text().strip().splitlines()
    assert lines[0] == "run_id,trial,slot,user,rate_nats,rbar_nats,power_w"
    assert len(lines) == 1 + 4 * 3  # slots x users


def test_sweep_single_value_matches_run(tmp_path):
    cfg = harness.parse_config(tiny_config())
    swept = harness.sweep(cfg, "experiment.kq", [2])
    direct = harness.run(cfg)
    assert swept[0][1].summary["objective_nats"] == direct.summary["objective_nats"]


def test_sweep_list_path():
    doc = tiny_config(algorithm={"name": "qft-power",
                                 "inner": {"max_iters": 40, "patience": 15},
                                 "outer": {"max_iters": 4}})
    doc["scenario"]["tx_antennas"] = 1
    doc["utility"] = {"wsum": [[1.0, {"sum": "all"}], [5.0, {"slqp": {"kq": 1, "over": "all"}}]]}
    cfg = harness.parse_config(doc)
    out = harness.sweep(cfg, "utility.wsum.1.0", [0.0, 10.0])
    assert len(out) == 2
    assert out[0][1].config.raw["utility"]["wsum"][1][0] == 0.0


def test_presets_match_experiment_families():
    fig1 = harness.parse_config(harness.preset_config("fig1"))
    assert fig1.cells == 7 and fig1.users_per_cell == 5
    assert fig1.tx_antennas == 8 and fig1.rx_antennas == 2
    assert fig1.kq == 2 and fig1.algorithm == "mqft"
    table1 = harness.parse_config(harness.preset_config("table1"))
    assert table1.users_per_cell == 20 and table1.kq == 28
    assert table1.alpha == pytest.approx(0.30) and table1.slots == 200
    fig8 = harness.parse_config(harness.preset_config("fig8"))
    assert fig8.bands == 3
    with pytest.raises(harness.ConfigError):
        harness.preset_config("fig99")


def test_cli_run_and_errors(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(tiny_config()))
    assert cli_main(["run", "--config", str(cfg_path), "--out", str(tmp_path / "out"),
                     "--trials", "1"]) == 0
    assert (tmp_path / "out" / "trace.csv").exists()
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"algorithm": {"name": "nope"},
                               "scenario": {"users_per_cell": 1},
                               "experiment": {"seed": 1, "kq": 1}}))
    assert cli_main(["run", "--config", str(bad), "--out", str(tmp_path / "o2")]) == 2
    assert cli_main(["run", "--preset", "fig1", "--config", str(cfg_path)]) == 2


def test_cli_sweep(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(tiny_config()))
    rc = cli_main(["sweep", "--config", str(cfg_path), "--out", str(tmp_path / "sw"),
                   "--param", "experiment.kq", "--values", "1,2"])
    assert rc == 0
    assert (tmp_path / "sw" / "experiment_kq=1" / "cdf.csv").exists()
