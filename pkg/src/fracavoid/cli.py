"""Command-line surface: run configs, replay for determinism, export CSVs.

A run is fully determined by (config, seed): the manifest records a sha256
per text artifact and `replay` re-derives everything and compares digests
bit for bit.  Figures are rendered next to the delimited outputs but stay
outside the determinism manifest.

Exit codes: 0 all checks passed; 1 a verifier found violations or a replay
mismatched; 2 config parse error (no partial outputs); 3 budget or
hypothesis failure, with a structured diagnostic on stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import tempfile
from fractions import Fraction
from pathlib import Path

import numpy as np

from fracavoid import __version__
from fracavoid.avoidance import (
    AvoidanceError,
    Poly,
    lowrank_step,
    mathe_step,
)
from fracavoid.configs import (
    CurveSpec,
    IsoscelesOracle,
    diagonal_band_cover,
    explicit_cover,
    load_curve,
    point_cover,
    sumset_cover,
    translate_config,
    zero_set_cover,
)
from fracavoid.construct import (
    build_strong_cover,
    cantor_state,
    dimension_report,
    fp_processed_scan,
    iterate_fp,
    iterate_keleti,
    iterate_main,
    plan_from_schedule,
)
from fracavoid.dimension import hyperdyadic_demo, minkowski_estimate
from fracavoid.dyadic import (
    BranchingSchedule,
    BudgetError,
    GridSet,
    read_gridset,
    thicken,
    write_gridset,
)
from fracavoid.fourier import decay_profile, fourier_pipeline, telescoping_increments
from fracavoid.measure import canonical_weights, frostman_exponent, write_weight_tree
from fracavoid.verify import (
    VerifyBudgetError,
    assert_avoids,
    difference_check,
    isosceles_check,
    sumset_check,
)

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_CONFIG = 2
EXIT_HYPOTHESIS = 3

RANDOMIZED_MODES = {"main", "fourier"}


class ConfigError(ValueError):
    pass


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def _dump_json(obj, path: Path):
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n",
                    encoding="ascii")


def _schedule_from_config(cfg, d=1) -> BranchingSchedule:
    spec = cfg.get("schedule")
    if spec is None:
        raise ConfigError("missing schedule")
    return BranchingSchedule(
        d,
        spec["Ns"],
        spec.get("Ms"),
        max_bits=cfg.get("budget_bits"),
        require_power_of_two=spec.get("require_power_of_two", False),
    )


def _curve_from_config(spec) -> CurveSpec:
    if "curve_file" in spec:
        return load_curve(spec["curve_file"], spec.get("lipschitz"))
    samples = spec["curve"]
    ts = tuple(row[0] for row in samples)
    values = tuple(tuple(row[1:]) for row in samples)
    lip = spec.get("lipschitz")
    if lip is None:
        tarr = np.asarray(ts)
        varr = np.asarray(values, dtype=float)
        lip = float((np.linalg.norm(np.diff(varr, axis=0), axis=1) / np.diff(tarr)).max())
    return CurveSpec(ts, values, lip)


def _oracle_from_config(spec):
    kind = spec.get("kind")
    if kind == "sumset":
        return sumset_cover(point_cover(spec.get("points", [spec.get("point", 1.0)])))
    if kind == "diagonal":
        return diagonal_band_cover()
    if kind == "isosceles":
        return IsoscelesOracle(_curve_from_config(spec))
    if kind == "zero_sum":
        target = float(spec.get("target", 1.0))
        return zero_set_cover(
            lambda p, t=target: p[:, 0] + p[:, 1] - t, math.sqrt(2.0), n=2, d=1, m=1,
        )
    if kind == "translate":
        return translate_config()
    if kind == "explicit":
        covers = {int(k): v for k, v in spec.get("covers", {}).items()}
        return explicit_cover(covers, n=spec.get("n", 2), d=spec.get("d", 1),
                              s=spec.get("s", 0.0))
    if kind == "empty":
        return explicit_cover({}, n=spec.get("n", 2), d=spec.get("d", 1),
                              s=spec.get("s", 0.0))
    raise ConfigError(f"unknown oracle kind {kind!r}")


def _validate(cfg: dict):
    mode = cfg.get("mode")
    if mode not in {"main", "keleti", "fp", "mathe", "lowrank", "fourier",
                    "dimension", "verify"}:
        raise ConfigError(f"unknown mode {mode!r}")
    if mode in RANDOMIZED_MODES and cfg.get("seed") is None:
        raise ConfigError(f"mode {mode} is randomized and needs an explicit seed")
    return mode


def _strip_elapsed(obj):
    if isinstance(obj, dict):
        return {k: _strip_elapsed(v) for k, v in obj.items() if k != "elapsed"}
    if isinstance(obj, list):
        return [_strip_elapsed(v) for v in obj]
    return obj


# ---------------------------------------------------------------------------
# mode runners: each returns (reports dict, ok bool); artifacts written to out


def _run_main(cfg, out: Path):
    oracle = _oracle_from_config(cfg["oracle"])
    depth = int(cfg["depth"])
    if "schedule" in cfg:
        schedule = _schedule_from_config(cfg, d=oracle.d)
        plan = plan_from_schedule([oracle], schedule, cfg.get("eps"))
    else:
        plan = build_strong_cover([oracle], cfg.get("eps") or
                                  (lambda k: min((oracle.d * oracle.n - oracle.s) / 2.5,
                                                 1.0 / (k + 1))),
                                  depth)
        schedule = plan.schedule
    state = iterate_main(plan, depth, seed=int(cfg["seed"]),
                         retries=int(cfg.get("retries", 64)))
    artifacts = {}
    for g in state.grids:
        name = f"X_{g.k}.grid"
        write_gridset(g, out / name)
        artifacts[name] = None
    tree = canonical_weights(state.grids)
    write_weight_tree(tree, out / "weights.wt")
    artifacts["weights.wt"] = None
    report = dimension_report(state, plan)
    report["plan"] = [
        {"tag": st.oracle.tag, "N": st.N, "M": st.M, "eps": st.eps,
         "cover_count": st.cover_count, "sparsity_ok": st.sparsity_ok,
         "rapid_decay_ok": st.rapid_decay_ok}
        for st in plan.steps
    ]
    report["step_reports"] = [
        {"trials": r.trials, "collisions": r.collision_count, "deleted": r.deleted,
         "min_kept": r.min_kept, "cells_per_parent": r.cells_per_parent}
        for r in state.reports
    ]
    report["certified"] = state.meta.get("certified")
    ok = all(c["passed"] for c in report["certified"])
    checks = {}
    kind = cfg["oracle"].get("kind")
    if kind == "sumset":
        pts = cfg["oracle"].get("points", [cfg["oracle"].get("point", 1.0)])
        ycov = thicken(pts, state.k, schedule)
        rep = sumset_check(state.X, ycov, budget=int(cfg.get("verify_budget", 10**7)))
        checks["sumset_check"] = _strip_elapsed(rep.to_dict())
        ok = ok and rep.passed
    elif kind == "isosceles":
        rep = isosceles_check(state.X, _curve_from_config(cfg["oracle"]),
                              budget=int(cfg.get("verify_budget", 10**7)))
        checks["isosceles_check"] = _strip_elapsed(rep.to_dict())
        ok = ok and rep.passed
    report["checks"] = checks
    _dump_json(report, out / "report.json")
    artifacts["report.json"] = None

    from fracavoid.plots import counts_figure

    counts_figure([g.k for g in state.grids[1:]], [len(g) for g in state.grids[1:]],
                  out / "counts.png", title="kept cubes per generation")
    return report, artifacts, ["counts.png"], ok


def _run_keleti(cfg, out: Path):
    schedule = _schedule_from_config(cfg)
    depth = int(cfg.get("depth", schedule.depth))
    state = iterate_keleti(schedule, depth)
    artifacts = {}
    for g in state.grids:
        name = f"X_{g.k}.grid"
        write_gridset(g, out / name)
        artifacts[name] = None
    tree = canonical_weights(state.grids)
    write_weight_tree(tree, out / "weights.wt")
    artifacts["weights.wt"] = None
    rep = difference_check(state.X, trace=state.trace,
                           budget=int(cfg.get("verify_budget", 10**7)))
    counts_ok = all(
        len(state.grids[k]) * 10**k == schedule.D(k) for k in range(1, depth + 1)
    )
    report = {
        "counts": [len(g) for g in state.grids],
        "count_law_ok": counts_ok,
        "difference_check": _strip_elapsed(rep.to_dict()),
        "trace": [{"step": t, "generation": c.k, "coord": int(c.coords[0])}
                  for t, c in state.trace],
        "frostman_exponent": frostman_exponent(tree).s,
    }
    _dump_json(report, out / "report.json")
    artifacts["report.json"] = None
    from fracavoid.plots import counts_figure

    counts_figure(list(range(1, depth + 1)), report["counts"][1:],
                  out / "counts.png", title="translate-avoiding construction")
    return report, artifacts, ["counts.png"], rep.passed and counts_ok


def _run_fp(cfg, out: Path):
    oracle = _oracle_from_config(cfg["oracle"])
    schedule = _schedule_from_config(cfg, d=oracle.d)
    depth = int(cfg.get("depth", schedule.depth))
    state = iterate_fp(oracle, schedule, depth,
                       queue_cap=int(cfg.get("queue_cap", 10_000)),
                       C_f=float(cfg.get("C_f", 4.0)), m=int(cfg.get("m", 1)))
    artifacts = {}
    for g in state.grids:
        name = f"X_{g.k}.grid"
        write_gridset(g, out / name)
        artifacts[name] = None
    scan = fp_processed_scan(state, oracle)
    report = {
        "processed": len(state.trace),
        "queue_remaining": len(state.queue),
        "queue_truncated": state.queue_truncated,
        "scan": scan,
        "hypothesis": state.meta["hypothesis"],
    }
    _dump_json(report, out / "report.json")
    artifacts["report.json"] = None
    return report, artifacts, [], all(r["passed"] for r in scan)


def _poly_from_config(spec) -> Poly:
    terms = {tuple(t["exps"]): Fraction(str(t["coeff"])) for t in spec["terms"]}
    return Poly(int(spec["nvars"]), terms)


def _run_mathe(cfg, out: Path):
    schedule = _schedule_from_config(cfg)
    fam_gen = int(cfg["family_gen"])
    families = [GridSet(schedule, fam_gen, np.asarray(f).reshape(-1, 1))
                for f in cfg["families"]]
    f = _poly_from_config(cfg["poly"])
    eps = Fraction(str(cfg["eps"])) if "eps" in cfg else None
    Ss, rep = mathe_step(families, f, Fraction(str(cfg["c0"])),
                         Fraction(str(cfg["C0"])), schedule, eps=eps)
    artifacts = {}
    for i, S in enumerate(Ss, start=1):
        name = f"S_{i}.grid"
        write_gridset(S, out / name)
        artifacts[name] = None
    report = {
        "delta": str(rep.delta), "eps": str(rep.eps),
        "window": [str(rep.window[0]), str(rep.window[1])],
        "min_distance": str(rep.min_distance),
        "required_distance": str(rep.required_distance),
        "hypothesis": rep.hypothesis,
    }
    _dump_json(report, out / "report.json")
    artifacts["report.json"] = None
    return report, artifacts, [], rep.min_distance >= rep.required_distance


def _run_lowrank(cfg, out: Path):
    schedule = _schedule_from_config(cfg)
    fam_gen = int(cfg["family_gen"])
    families = [GridSet(schedule, fam_gen, np.asarray(f).reshape(-1, 1))
                for f in cfg["families"]]
    matrix = [[Fraction(str(x)) for x in row] for row in cfg["matrix"]]
    bad_spec = cfg.get("bad", {"coords": [], "gen": fam_gen + 1})
    m = len(matrix)
    coords = np.asarray(bad_spec["coords"], dtype=np.int64).reshape(-1, m)
    B = GridSet(schedule, int(bad_spec["gen"]), coords, d=m, n=1)
    Ss, rep = lowrank_step(families, matrix, B, s=float(cfg.get("s", 0.0)),
                           eps=float(cfg.get("eps", 0.0)), schedule=schedule)
    artifacts = {}
    for i, S in enumerate(Ss, start=1):
        name = f"S_{i}.grid"
        write_gridset(S, out / name)
        artifacts[name] = None
    report = {
        "offset": list(rep.offset),
        "lattice_constant": rep.lattice_constant,
        "min_keep_rate": rep.min_keep_rate,
        "min_distance": rep.min_distance,
        "threshold": rep.threshold,
        "hypothesis": rep.hypothesis,
    }
    _dump_json(report, out / "report.json")
    artifacts["report.json"] = None
    return report, artifacts, [], rep.min_distance > rep.threshold


def _run_fourier(cfg, out: Path):
    schedule = _schedule_from_config(cfg)
    depth = int(cfg.get("depth", schedule.depth))
    s = float(cfg.get("s", 1.0))
    n = int(cfg.get("n", 2))
    eps = cfg.get("eps", 0.05)
    eps_seq = eps if isinstance(eps, list) else [float(eps)] * depth
    oracle = _oracle_from_config(cfg["oracle"]) if "oracle" in cfg else None
    result = fourier_pipeline(oracle, schedule, depth, seed=int(cfg["seed"]),
                              s=s, eps_seq=eps_seq, n=n,
                              retries=int(cfg.get("retries", 64)),
                              strict=bool(cfg.get("strict", False)))
    artifacts = {}
    for g in result["grids"]:
        name = f"X_{g.k}.grid"
        write_gridset(g, out / name)
        artifacts[name] = None
    alpha = float(cfg.get("alpha", (n - s) / (2 * n) - (eps_seq[0] if eps_seq else 0)))
    m_max = int(cfg.get("m_max", schedule.D(1)))
    prof = decay_profile(result["mollified"][-1], alpha, m_max)
    with open(out / "decay.csv", "w", encoding="ascii") as fh:
        fh.write("m,re,im,abs,weighted\n")
        for m, re, im, mag, wt in prof["rows"]:
            fh.write(f"{m},{re!r},{im!r},{mag!r},{wt!r}\n")
    artifacts["decay.csv"] = None
    increments = telescoping_increments(result["mollified"], alpha, m_max)
    report = {
        "alpha": alpha,
        "m_max": m_max,
        "statistic": prof["statistic"],
        "increments": increments,
        "per_coefficient_exponent": (n - s) / (2 * n),
        "set_level_exponent": (n - s) / n,
        "steps": [
            {"trials": r.trials, "deviation": r.deviation, "threshold": r.threshold,
             "threshold_met": r.threshold_met, "certified": r.certified,
             "size_conditions": {k: v["ok"] for k, v in r.size_conditions.items()}}
            for r in result["reports"]
        ],
    }
    _dump_json(report, out / "report.json")
    artifacts["report.json"] = None
    from fracavoid.plots import decay_figure

    decay_figure(prof["rows"], alpha, out / "decay.png", title="transform decay")
    return report, artifacts, ["decay.png"], True


def _run_dimension(cfg, out: Path):
    preset = cfg.get("preset")
    artifacts = {}
    figures = []
    if preset == "cantor":
        depth = int(cfg.get("depth", 8))
        state = cantor_state(depth, keep=tuple(cfg.get("keep", (0, 2))),
                             N=int(cfg.get("N", 3)))
        est = minkowski_estimate(state.grids[1:], window=int(cfg.get("window", 3)))
        tree = canonical_weights(state.grids)
        fr = frostman_exponent(tree)
        report = {
            "ratios": est.ratios,
            "lower_proxy": est.lower_proxy,
            "upper_proxy": est.upper_proxy,
            "frostman_exponent": fr.s,
            "reference": math.log(2) / math.log(3),
        }
        rows = est.rows()
        ok = True
        from fracavoid.plots import ratio_figure

        ratio_figure(est.ks, est.ratios, out / "dimension.png",
                     reference=report["reference"], title="keep-cells calibration")
        figures.append("dimension.png")
    elif preset == "hyperdyadic":
        demo = hyperdyadic_demo(float(cfg.get("c", 0.5)), int(cfg.get("depth", 8)),
                                max_bits=cfg.get("budget_bits"))
        report = {
            "Ns": demo.Ns, "Ms": demo.Ms, "counts": demo.counts,
            "l_ratios": demo.l_ratios, "r_ratios": demo.r_ratios,
            "final_gap": demo.final_gap,
        }
        rows = list(zip(range(1, len(demo.counts) + 1), demo.counts, demo.l_ratios))
        ok = demo.final_gap >= 0.05
        from fracavoid.plots import two_scale_figure

        c = demo.c
        two_scale_figure(list(range(1, len(demo.counts) + 1)), demo.l_ratios,
                         demo.r_ratios, out / "dimension.png",
                         refs=(1 - c, (1 - c) / (1 - c + c * 2**c)),
                         title="two-scale ratio mismatch")
        figures.append("dimension.png")
    elif "gridset" in cfg:
        schedule = _schedule_from_config(cfg)
        grid = read_gridset(cfg["gridset"], schedule)
        est = minkowski_estimate(grid, window=int(cfg.get("window", 3)))
        report = {"ratios": est.ratios, "lower_proxy": est.lower_proxy,
                  "upper_proxy": est.upper_proxy}
        rows = est.rows()
        ok = True
        from fracavoid.plots import ratio_figure

        ratio_figure(est.ks, est.ratios, out / "dimension.png")
        figures.append("dimension.png")
    else:
        raise ConfigError("dimension mode needs a preset or a gridset")
    with open(out / "dimension.csv", "w", encoding="ascii") as fh:
        fh.write("k,count,ratio\n")
        for k, count, ratio in rows:
            fh.write(f"{k},{count},{ratio!r}\n")
    artifacts["dimension.csv"] = None
    _dump_json(report, out / "report.json")
    artifacts["report.json"] = None
    return report, artifacts, figures, ok


def _run_verify(cfg, out: Path):
    schedule = _schedule_from_config(cfg)
    check = cfg.get("check")
    grid = read_gridset(cfg["gridset"], schedule)
    budget = int(cfg.get("verify_budget", 10**7))
    if check == "difference":
        rep = difference_check(grid, budget=budget)
    elif check == "sumset":
        ycov = thicken(cfg.get("points", [1.0]), grid.k, schedule)
        rep = sumset_check(grid, ycov, budget=budget)
    elif check == "isosceles":
        rep = isosceles_check(grid, _curve_from_config(cfg), budget=budget)
    elif check == "avoids":
        bad = read_gridset(cfg["bad"], schedule)
        rep = assert_avoids(grid, bad, int(cfg.get("n", bad.dim // grid.dim)),
                            budget=budget)
    else:
        raise ConfigError(f"unknown check {check!r}")
    report = _strip_elapsed(rep.to_dict())
    _dump_json(report, out / "report.json")
    return report, {"report.json": None}, [], rep.passed


_RUNNERS = {
    "main": _run_main,
    "keleti": _run_keleti,
    "fp": _run_fp,
    "mathe": _run_mathe,
    "lowrank": _run_lowrank,
    "fourier": _run_fourier,
    "dimension": _run_dimension,
    "verify": _run_verify,
}


def run_config(cfg: dict, out_dir) -> tuple[int, dict]:
    mode = _validate(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report, artifacts, figures, ok = _RUNNERS[mode](cfg, out)
    manifest = {
        "version": f"fracavoid {__version__}",
        "config": cfg,
        "artifacts": {name: _sha256(out / name) for name in artifacts},
        "figures": figures,
        "passed": bool(ok),
    }
    _dump_json(manifest, out / "history.json")
    return (EXIT_OK if ok else EXIT_VERIFY), manifest


def replay(history_path, threads: int | None = None) -> tuple[int, dict]:
    """Re-derive a run from its manifest and compare artifact digests."""
    history_path = Path(history_path)
    try:
        manifest = json.loads(history_path.read_text())
        cfg = manifest["config"]
        stored = manifest["artifacts"]
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        raise ConfigError(f"corrupted history: {exc}") from exc
    run_dir = history_path.parent
    mismatches = []
    for name, digest in stored.items():
        path = run_dir / name
        if not path.exists():
            mismatches.append({"artifact": name, "problem": "missing"})
        elif _sha256(path) != digest:
            mismatches.append({"artifact": name, "problem": "stored file tampered"})
    with tempfile.TemporaryDirectory() as tmp:
        code, fresh = run_config(cfg, tmp)
        for name, digest in stored.items():
            if fresh["artifacts"].get(name) != digest:
                mismatches.append({"artifact": name,
                                   "problem": "re-derivation differs"})
    report = {"history": str(history_path), "mismatches": mismatches,
              "passed": not mismatches and code == EXIT_OK}
    return (EXIT_OK if report["passed"] else EXIT_VERIFY), report


def export_csv(run_dir, name, out=None) -> int:
    src = Path(run_dir) / name
    if not src.exists():
        print(f"no CSV artifact {name!r} in {run_dir}", file=sys.stderr)
        return EXIT_CONFIG
    data = src.read_text()
    if out:
        Path(out).write_text(data)
    else:
        sys.stdout.write(data)
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fracavoid",
        description="build and certify pattern-avoiding fractal sets",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a run config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--seed", type=int, default=None, help="override the seed")
    p_run.add_argument("--depth", type=int, default=None)
    p_run.add_argument("--threads", type=int, default=1,
                       help="worker budget; results are independent of it")

    p_rep = sub.add_parser("replay", help="re-derive a run and compare digests")
    p_rep.add_argument("history")
    p_rep.add_argument("--threads", type=int, default=1)

    p_csv = sub.add_parser("export-csv", help="print a CSV artifact from a run")
    p_csv.add_argument("run_dir")
    p_csv.add_argument("--name", default="dimension.csv")
    p_csv.add_argument("--out", default=None)

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            try:
                cfg = json.loads(Path(args.config).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                print(f"config error: {exc}", file=sys.stderr)
                return EXIT_CONFIG
            if args.seed is not None:
                cfg["seed"] = args.seed
            if args.depth is not None:
                cfg["depth"] = args.depth
            out = args.out or cfg.get("out_dir")
            if not out:
                print("config error: no output directory", file=sys.stderr)
                return EXIT_CONFIG
            try:
                _validate(cfg)
            except ConfigError as exc:
                print(f"config error: {exc}", file=sys.stderr)
                return EXIT_CONFIG
            code, manifest = run_config(cfg, out)
            print(json.dumps({"passed": manifest["passed"], "out": str(out)}))
            return code
        if args.command == "replay":
            code, report = replay(args.history)
            print(json.dumps(report, sort_keys=True))
            return code
        if args.command == "export-csv":
            return export_csv(args.run_dir, args.name, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BudgetError, AvoidanceError, VerifyBudgetError) as exc:
        diagnostic = {"error": type(exc).__name__, "detail": str(exc)}
        print(json.dumps(diagnostic), file=sys.stderr)
        return EXIT_HYPOTHESIS
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
