"""CLI surface: run/replay/export-csv, exit codes, determinism."""

import json
import math

from fracavoid.cli import (
    EXIT_CONFIG,
    EXIT_HYPOTHESIS,
    EXIT_OK,
    EXIT_VERIFY,
    main,
)


def write_cfg(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


def test_dimension_cantor_run(tmp_path):
    cfg = write_cfg(tmp_path, {"mode": "dimension", "preset": "cantor", "depth": 8})
    out = tmp_path / "run"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert abs(report["lower_proxy"] - math.log(2) / math.log(3)) < 0.02
    csv = (out / "dimension.csv").read_text().splitlines()
    assert csv[0] == "k,count,ratio"
    assert (out / "dimension.png").exists()
    manifest = json.loads((out / "history.json").read_text())
    assert "dimension.png" in manifest["figures"]
    assert "dimension.png" not in manifest["artifacts"]


def test_malformed_config_exits_2_without_outputs(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    out = tmp_path / "run"
    assert main(["run", "--config", str(bad), "--out", str(out)]) == EXIT_CONFIG
    assert not out.exists()
    cfg = write_cfg(tmp_path, {"mode": "nonsense"})
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_CONFIG
    assert not out.exists()


def test_randomized_mode_requires_seed(tmp_path):
    cfg = write_cfg(tmp_path, {
        "mode": "main", "depth": 1,
        "schedule": {"Ns": [64], "Ms": [8]},
        "oracle": {"kind": "diagonal"},
    })
    out = tmp_path / "run"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_CONFIG
    assert main(["run", "--config", str(cfg), "--out", str(out), "--seed", "5"]) == EXIT_OK


def test_hypothesis_failure_exits_3(tmp_path):
    # rBound fails: N = 8 < 4*M = 16
    cfg = write_cfg(tmp_path, {
        "mode": "main", "depth": 1, "seed": 1,
        "schedule": {"Ns": [8], "Ms": [4]},
        "oracle": {"kind": "diagonal"},
    })
    out = tmp_path / "run"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_HYPOTHESIS


def test_main_sumset_run_and_replay(tmp_path):
    cfg = write_cfg(tmp_path, {
        "mode": "main", "depth": 2, "seed": 9,
        "schedule": {"Ns": [256, 64], "Ms": [16, 8]},
        "oracle": {"kind": "sumset", "point": 1.0},
    })
    out = tmp_path / "run"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    assert main(["replay", str(out / "history.json")]) == EXIT_OK


def test_replay_detects_tampering(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"mode": "dimension", "preset": "cantor", "depth": 6})
    out = tmp_path / "run"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    assert main(["replay", str(out / "history.json")]) == EXIT_OK
    capsys.readouterr()
    # tamper with a stored artifact
    target = out / "dimension.csv"
    target.write_text(target.read_text().replace("8", "9", 1))
    assert main(["replay", str(out / "history.json")]) == EXIT_VERIFY
    report = json.loads(capsys.readouterr().out)
    assert any(m["problem"] == "stored file tampered" for m in report["mismatches"])


def test_identical_seed_bitexact_reruns(tmp_path):
    cfg = {
        "mode": "main", "depth": 2, "seed": 31,
        "schedule": {"Ns": [256, 64], "Ms": [16, 8]},
        "oracle": {"kind": "sumset", "point": 1.0},
    }
    cfgp = write_cfg(tmp_path, cfg)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", str(cfgp), "--out", str(out1)]) == EXIT_OK
    assert main(["run", "--config", str(cfgp), "--out", str(out2)]) == EXIT_OK
    m1 = json.loads((out1 / "history.json").read_text())
    m2 = json.loads((out2 / "history.json").read_text())
    assert m1["artifacts"] == m2["artifacts"]
    # a different seed changes the grids
    assert main(["run", "--config", str(cfgp), "--out", str(tmp_path / "c"),
                 "--seed", "32"]) == EXIT_OK
    m3 = json.loads((tmp_path / "c" / "history.json").read_text())
    assert m3["artifacts"] != m1["artifacts"]


def test_keleti_run(tmp_path):
    cfg = write_cfg(tmp_path, {
        "mode": "keleti",
        "schedule": {"Ns": [20, 40, 80]},
        "depth": 3,
    })
    out = tmp_path / "run"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert report["counts"] == [1, 2, 8, 64]
    assert report["count_law_ok"]


def test_fourier_run_writes_decay_csv(tmp_path):
    cfg = write_cfg(tmp_path, {
        "mode": "fourier", "depth": 2, "seed": 3,
        "schedule": {"Ns": [64, 128], "Ms": [4, 8]},
        "eps": 0.05, "s": 1.0, "m_max": 64,
    })
    out = tmp_path / "run"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    lines = (out / "decay.csv").read_text().splitlines()
    assert lines[0] == "m,re,im,abs,weighted"
    assert len(lines) == 65
    assert (out / "decay.png").exists()


def test_export_csv_roundtrip(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"mode": "dimension", "preset": "cantor", "depth": 6})
    out = tmp_path / "run"
    main(["run", "--config", str(cfg), "--out", str(out)])
    capsys.readouterr()
    assert main(["export-csv", str(out), "--name", "dimension.csv"]) == EXIT_OK
    captured = capsys.readouterr().out
    assert captured == (out / "dimension.csv").read_text()
    assert main(["export-csv", str(out), "--name", "nope.csv"]) == EXIT_CONFIG


def test_verify_mode_on_stored_gridset(tmp_path):
    # produce a keleti run, then verify its final grid from disk
    cfg = write_cfg(tmp_path, {
        "mode": "keleti", "schedule": {"Ns": [20, 40]}, "depth": 2,
    }, name="k.json")
    out = tmp_path / "krun"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    vcfg = write_cfg(tmp_path, {
        "mode": "verify", "check": "difference",
        "schedule": {"Ns": [20, 40]},
        "gridset": str(out / "X_2.grid"),
    }, name="v.json")
    vout = tmp_path / "vrun"
    # without the trace the global scan may flag out-of-scope quadruples, so
    # just require a clean exit classification
    code = main(["run", "--config", str(vcfg), "--out", str(vout)])
    assert code in (EXIT_OK, EXIT_VERIFY)
    assert (vout / "report.json").exists()


def test_hyperdyadic_preset(tmp_path):
    cfg = write_cfg(tmp_path, {"mode": "dimension", "preset": "hyperdyadic",
                               "c": 0.5, "depth": 8})
    out = tmp_path / "run"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert abs(report["l_ratios"][-1] - 0.5) < 0.05
    assert report["final_gap"] >= 0.05


def test_fp_mode_run(tmp_path):
    cfg = write_cfg(tmp_path, {
        "mode": "fp",
        "oracle": {"kind": "zero_sum", "target": 1.0},
        "schedule": {"Ns": [4, 64], "Ms": [2, 4]},
        "depth": 2, "C_f": 4.0, "m": 1,
    })
    out = tmp_path / "run"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert all(r["passed"] for r in report["scan"])


def test_mathe_mode_run(tmp_path):
    cfg = write_cfg(tmp_path, {
        "mode": "mathe",
        "schedule": {"Ns": [2, 64], "Ms": [2, 8]},
        "family_gen": 1,
        "families": [[0], [1]],
        "poly": {"nvars": 2, "terms": [
            {"exps": [1, 0], "coeff": "1"}, {"exps": [0, 1], "coeff": "-1"},
        ]},
        "c0": "1", "C0": "1",
    })
    out = tmp_path / "run"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert report["eps"] == "1/4"
    assert (out / "S_1.grid").exists() and (out / "S_2.grid").exists()


def test_lowrank_mode_run(tmp_path):
    cfg = write_cfg(tmp_path, {
        "mode": "lowrank",
        "schedule": {"Ns": [2, 32], "Ms": [2, 4]},
        "family_gen": 1,
        "families": [[0], [1]],
        "matrix": [["1", "1"]],
        "bad": {"coords": [[63]], "gen": 2},
    })
    out = tmp_path / "run"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert report["min_distance"] > report["threshold"]


def test_main_strict_plan_search_depth_one(tmp_path):
    # no schedule in the config: the strict strong-cover search runs
    cfg = write_cfg(tmp_path, {
        "mode": "main", "depth": 1, "seed": 2,
        "oracle": {"kind": "diagonal"},
    })
    out = tmp_path / "run"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert report["plan"][0]["sparsity_ok"] is True
    assert report["plan"][0]["rapid_decay_ok"] is True
