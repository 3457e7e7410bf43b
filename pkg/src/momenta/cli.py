"""Command-line front-end: problem files in, result/trace files out.

Subcommands
-----------
solve-pop FILE        Lasserre-relax and solve a POP (JSON).
nonminimal FILE       Solve a residual-minimizing problem (JSON).
consensus ...         Consensus maximization from a file or a planted synth task.
rigid ...             Rigid-registration noise/point-count sweeps.
autocalib ...         Autocalibration accuracy / outlier experiments.
nrsfm ...             Quartic-system hierarchy experiments.
synth ...             Write synthetic datasets + ground-truth sidecars.
verify JSON CSV       Recompute the CSV summary from per-trial records.

Every run embeds its resolved configuration and seeds in the results file;
wall-clock timings live under separate "timing" keys so that everything else
is bitwise reproducible from (inputs, seed, options).  MOMENTA_LOG controls
logging verbosity.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger("momenta")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER_LIMIT = 3


def _setup_logging():
    level = os.environ.get("MOMENTA_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(name)s %(levelname)s %(message)s")


@dataclass
class ExperimentConfig:
    """Resolved experiment description embedded in every results file."""

    task: str
    inputs: list = field(default_factory=list)
    sweep: dict = field(default_factory=dict)     # axis name -> list of values
    options: dict = field(default_factory=dict)   # norm, order, eps, limits...
    seed: int = 0
    trials: int = 1
    out: str | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be positive")
        for axis, vals in self.sweep.items():
            if not list(vals):
                raise ValueError(f"sweep axis {axis} is empty")

    def to_json(self):
        # output path and parallelism are execution details, not experiment
        # identity; omitting them keeps result files byte-identical across
        # directories and job counts
        opts = {k: v for k, v in self.options.items() if k != "jobs"}
        return {"task": self.task, "inputs": list(self.inputs),
                "sweep": {k: list(v) for k, v in self.sweep.items()},
                "options": opts, "seed": self.seed,
                "trials": self.trials}


def write_json(obj, path: Path | None):
    text = json.dumps(obj, indent=1, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)


def strip_timing(obj):
    """Remove wall-clock fields so payloads compare bitwise across runs."""
    if isinstance(obj, dict):
        return {k: strip_timing(v) for k, v in obj.items()
                if k not in ("timing", "elapsed", "seconds")}
    if isinstance(obj, list):
        return [strip_timing(v) for v in obj]
    return obj


def summarize(records, sweep_axis, metrics):
    """One CSV row per sweep value: mean/median/max for each metric.

    Metric columns are emitted in sorted order so summaries recomputed from
    the (key-sorted) JSON records reproduce the CSV byte for byte."""
    rows = []
    metrics = sorted(metrics)
    values = sorted({r[sweep_axis] for r in records})
    for v in values:
        sel = [r for r in records if r[sweep_axis] == v]
        row = {"sweep": sweep_axis, "value": v, "n": len(sel)}
        for m in metrics:
            xs = np.array([float(r[m]) for r in sel])
            row[f"{m}_mean"] = float(np.mean(xs))
            row[f"{m}_median"] = float(np.median(xs))
            row[f"{m}_max"] = float(np.max(xs))
        rows.append(row)
    return rows


def rows_to_csv(rows) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: repr(v) if isinstance(v, float) else v
                         for k, v in r.items()})
    return buf.getvalue()


def _parse_range(text: str):
    """'0:0.05:5' -> start:step:stop(inclusive, percent); or comma list."""
    if ":" in text:
        a, step, b = (float(t) for t in text.split(":"))
        n = int(round((b - a) / step)) + 1
        return [a + i * step for i in range(n)]
    return [float(t) for t in text.split(",")]


# --------------------------------------------------------------------------
# experiment runners
# --------------------------------------------------------------------------

def run(config: ExperimentConfig) -> int:
    """Execute an experiment; returns a process exit code."""
    runner = {
        "pop": _run_pop,
        "nonminimal": _run_nonminimal,
        "consensus": _run_consensus,
        "rigid": _run_rigid,
        "autocalib": _run_autocalib,
        "nrsfm": _run_nrsfm,
        "synth": _run_synth,
    }.get(config.task)
    if runner is None:
        log.error("unknown task %s", config.task)
        return EXIT_VALIDATION
    try:
        return runner(config)
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        log.error("validation error: %s", exc)
        return EXIT_VALIDATION


def _out_path(config, name) -> Path | None:
    if config.out is None:
        return None
    out = Path(config.out)
    if out.suffix == ".json":
        return out
    return out / name


def _run_pop(config: ExperimentConfig) -> int:
    from .relax import Pop, solve_pop
    pop = Pop.from_json(json.loads(Path(config.inputs[0]).read_text()))
    s = int(config.options.get("order", 0))
    sol = solve_pop(pop, s=s)
    payload = {"config": config.to_json(), "solution": sol.to_json(),
               "timing": {"seconds": sol.solve_seconds}}
    write_json(payload, _out_path(config, "pop_result.json"))
    return EXIT_OK if sol.status == "optimal" else EXIT_SOLVER_LIMIT


def _run_nonminimal(config: ExperimentConfig) -> int:
    from .relax import NonMinimalProblem, solve_nonminimal
    prob = NonMinimalProblem.from_json(json.loads(Path(config.inputs[0]).read_text()))
    if "norm" in config.options:
        prob.norm = config.options["norm"]
    if "order" in config.options:
        prob.order = int(config.options["order"])
    sol = solve_nonminimal(prob)
    payload = {"config": config.to_json(), "solution": sol.to_json(),
               "timing": {"seconds": sol.solve_seconds}}
    write_json(payload, _out_path(config, "nonminimal_result.json"))
    return EXIT_OK if sol.status == "optimal" else EXIT_SOLVER_LIMIT


def _consensus_instance(config: ExperimentConfig):
    from .consensus import ConsensusProblem
    from .vision.autocalib import autocalib_consensus_problem, synth_fundamentals
    from .vision.rigid import rigid_consensus_problem, synth_rigid
    opts = config.options
    sub = opts.get("synth_task")
    if sub is None:
        prob = ConsensusProblem.from_json(json.loads(Path(config.inputs[0]).read_text()))
        if opts.get("box"):
            from .relax import Box
            lo, hi = opts["box"]
            prob.box = Box([lo] * prob.nvars, [hi] * prob.nvars)
        if opts.get("big_m") is not None:
            prob.big_m = np.full(prob.m, float(opts["big_m"]))
        prob.node_limit = int(opts.get("node_limit", prob.node_limit))
        prob.time_limit = opts.get("time_limit", prob.time_limit)
        return prob, None
    if sub == "rigid":
        inl = int(opts.get("inliers", 10))
        out = int(opts.get("outliers", 20))
        noise = float(opts.get("noise", 0.01))
        n = inl + out
        corrs, gt = synth_rigid(n, noise, out / n, seed=config.seed)
        eps = opts.get("eps", "auto")
        if eps in (None, "auto"):
            # 3 sigma per axis, converted to the Euclidean group threshold
            eps = 3.0 * np.sqrt(3.0) * gt.noise_sigma_abs
        prob = rigid_consensus_problem(
            corrs, float(eps),
            node_limit=int(opts.get("node_limit", 100000)),
            time_limit=opts.get("time_limit"))
        return prob, gt.inlier_mask
    if sub == "autocalib":
        inl = int(opts.get("inliers", 5))
        out = int(opts.get("outliers", 5))
        Fs, gt = synth_fundamentals(inl + out, outlier_count=out, seed=config.seed)
        eps = opts.get("eps", "auto")
        if eps in (None, "auto"):
            eps = 1e-4
        prob = autocalib_consensus_problem(
            Fs, float(eps),
            node_limit=int(opts.get("node_limit", 100000)),
            time_limit=opts.get("time_limit"))
        return prob, gt.inlier_mask
    raise ValueError(f"unknown consensus synth task {sub}")


def _run_consensus(config: ExperimentConfig) -> int:
    from .consensus import maximize_consensus
    prob, planted = _consensus_instance(config)
    t0 = time.perf_counter()
    res = maximize_consensus(prob)
    payload = {"config": config.to_json(), "result": res.to_json(),
               "timing": {"seconds": time.perf_counter() - t0}}
    if planted is not None:
        payload["planted_mask"] = [bool(b) for b in planted]
        payload["planted_recovered"] = bool(
            np.array_equal(res.inlier_mask, planted))
    write_json(payload, _out_path(config, "consensus_result.json"))
    if res.status == "infeasible":
        return EXIT_VALIDATION
    return EXIT_OK if res.certified else EXIT_SOLVER_LIMIT


def _map_trials(tasks, jobs: int):
    """Run the per-trial closures, possibly in parallel; results keep the
    deterministic task order regardless of scheduling (BLAS is pinned to one
    thread for the whole sweep so outputs are scheduling-independent)."""
    if jobs <= 1:
        return [t() for t in tasks]
    from concurrent.futures import ThreadPoolExecutor
    from threadpoolctl import threadpool_limits
    with threadpool_limits(limits=1):
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(t) for t in tasks]
            return [f.result() for f in futures]


def _run_rigid(config: ExperimentConfig) -> int:
    from .vision.rigid import (estimate_rigid, rotation_angle_deg, synth_rigid)
    opts = config.options
    minimal = bool(opts.get("minimal", False))
    noise_axis = config.sweep.get("noise", [float(opts.get("noise", 0.01))])
    points_axis = config.sweep.get("points",
                                   [3 if minimal else int(opts.get("points", 10))])

    def make_task(noise, npts, seed):
        def task():
            corrs, gt = synth_rigid(int(npts), float(noise) / 100.0
                                    if opts.get("noise_percent") else float(noise),
                                    0.0, seed)
            t0 = time.perf_counter()
            est, sol = estimate_rigid(corrs)
            dt = time.perf_counter() - t0
            return ({"noise": float(noise), "points": int(npts), "seed": seed,
                     "rot_err_deg": rotation_angle_deg(est.R, gt.R),
                     "trans_err": float(np.linalg.norm(est.t - gt.t)),
                     "rank_gap": sol.rank_gap,
                     "status": sol.status}, dt)
        return task

    tasks = [make_task(noise, npts, config.seed + trial)
             for noise in noise_axis for npts in points_axis
             for trial in range(config.trials)]
    results = _map_trials(tasks, int(opts.get("jobs", 1)))
    records = [r for r, _ in results]
    timings = [dt for _, dt in results]
    axis = "noise" if len(noise_axis) > 1 or len(points_axis) == 1 else "points"
    rows = summarize(records, axis, ["rot_err_deg", "trans_err", "rank_gap"])
    payload = {"config": config.to_json(), "trials": records,
               "summary": rows, "timing": {"seconds": sum(timings)}}
    write_json(payload, _out_path(config, "rigid_results.json"))
    if config.out is not None:
        csv_path = _out_path(config, "rigid_summary.csv")
        csv_path.write_text(rows_to_csv(rows))
    return EXIT_OK


def _run_autocalib(config: ExperimentConfig) -> int:
    from .relax import solve_nonminimal
    from .vision.autocalib import (autocalib_problem, calibration_errors,
                                   recover_K, synth_fundamentals)
    views_axis = config.sweep.get("views", [int(config.options.get("views", 10))])
    records = []
    t_all = 0.0
    for views in views_axis:
        for trial in range(config.trials):
            seed = config.seed + trial
            Fs, gt = synth_fundamentals(int(views), seed=seed)
            t0 = time.perf_counter()
            sol = solve_nonminimal(autocalib_problem(Fs))
            t_all += time.perf_counter() - t0
            rec = recover_K(sol.x)
            errs = calibration_errors(rec.K, gt.K)
            records.append({"views": int(views), "seed": seed,
                            "df": errs["df"], "duv": errs["duv"], "ds": errs["ds"],
                            "rank_gap": sol.rank_gap, "status": sol.status})
    rows = summarize(records, "views", ["df", "duv", "ds"])
    payload = {"config": config.to_json(), "trials": records, "summary": rows,
               "timing": {"seconds": t_all}}
    write_json(payload, _out_path(config, "autocalib_results.json"))
    if config.out is not None:
        _out_path(config, "autocalib_summary.csv").write_text(rows_to_csv(rows))
    return EXIT_OK


def _run_nrsfm(config: ExperimentConfig) -> int:
    from .vision.nrsfm import nrsfm_solve, synth_quartic_system
    opts = config.options
    order_axis = config.sweep.get("order", [int(opts.get("order", 1))])
    records = []
    t_all = 0.0
    for s in order_axis:
        for trial in range(config.trials):
            seed = config.seed + trial
            sys_, gt = synth_quartic_system(int(opts.get("npolys", 3)),
                                            noise=float(opts.get("noise", 0.0)),
                                            seed=seed)
            t0 = time.perf_counter()
            sol = nrsfm_solve(sys_, s=int(s))
            t_all += time.perf_counter() - t0
            records.append({"order": int(s), "seed": seed,
                            "param_err": float(np.linalg.norm(sol.x - gt.k)),
                            "objective": sol.objective,
                            "rank_gap": sol.rank_gap, "status": sol.status})
    rows = summarize(records, "order", ["param_err", "rank_gap"])
    payload = {"config": config.to_json(), "trials": records, "summary": rows,
               "timing": {"seconds": t_all}}
    write_json(payload, _out_path(config, "nrsfm_results.json"))
    if config.out is not None:
        _out_path(config, "nrsfm_summary.csv").write_text(rows_to_csv(rows))
    return EXIT_OK


def _run_synth(config: ExperimentConfig) -> int:
    opts = config.options
    sub = opts["synth_task"]
    out = Path(config.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    if sub == "rigid":
        from .vision.rigid import synth_rigid
        corrs, gt = synth_rigid(int(opts.get("n", 20)),
                                float(opts.get("noise", 0.0)),
                                float(opts.get("outlier_frac", 0.0)), config.seed)
        lines = ["ux,uy,uz,vx,vy,vz"]
        for c in corrs:
            lines.append(",".join(repr(v) for v in (*c.u, *c.v)))
        (out / "correspondences.csv").write_text("\n".join(lines) + "\n")
        write_json({"config": config.to_json(), "ground_truth": gt.to_json()},
                   out / "ground_truth.json")
    elif sub == "fundamentals":
        from .vision.autocalib import synth_fundamentals
        Fs, gt = synth_fundamentals(int(opts.get("n", 10)),
                                    outlier_count=int(opts.get("outliers", 0)),
                                    seed=config.seed)
        write_json({"matrices": [F.F.tolist() for F in Fs]},
                   out / "fundamentals.json")
        write_json({"config": config.to_json(), "ground_truth": gt.to_json()},
                   out / "ground_truth.json")
    elif sub == "quartics":
        from .vision.nrsfm import synth_quartic_system
        sys_, gt = synth_quartic_system(int(opts.get("n", 3)),
                                        noise=float(opts.get("noise", 0.0)),
                                        seed=config.seed)
        write_json(sys_.to_json(), out / "quartics.json")
        write_json({"config": config.to_json(), "ground_truth": gt.to_json()},
                   out / "ground_truth.json")
    else:
        raise ValueError(f"unknown synth task {sub}")
    return EXIT_OK


def _run_verify(args) -> int:
    payload = json.loads(Path(args.results).read_text())
    records = payload.get("trials", [])
    if not records:
        log.error("no per-trial records in %s", args.results)
        return EXIT_VALIDATION
    rows = payload.get("summary", [])
    if not rows:
        log.error("no summary in %s", args.results)
        return EXIT_VALIDATION
    axis = rows[0]["sweep"]
    metrics = [k.rsplit("_", 1)[0] for k in rows[0] if k.endswith("_mean")]
    recomputed = rows_to_csv(summarize(records, axis, metrics))
    on_disk = Path(args.csv).read_text()
    if recomputed == on_disk:
        print("verify: OK")
        return EXIT_OK
    print("verify: MISMATCH")
    return EXIT_VALIDATION


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="momenta")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--trials", type=int, default=1)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--out", "-o", default=None)

    p = sub.add_parser("solve-pop")
    p.add_argument("file")
    p.add_argument("--order", type=int, default=0)
    common(p)

    p = sub.add_parser("nonminimal")
    p.add_argument("file")
    p.add_argument("--norm", choices=["l1", "l2", "linf"], default=None)
    p.add_argument("--order", type=int, default=None)
    common(p)

    p = sub.add_parser("consensus")
    p.add_argument("file", nargs="?", default=None)
    p.add_argument("--task", choices=["rigid", "autocalib"], default=None)
    p.add_argument("--inliers", type=int, default=10)
    p.add_argument("--outliers", type=int, default=20)
    p.add_argument("--noise", type=float, default=0.01)
    p.add_argument("--eps", default="auto")
    p.add_argument("--big-m", dest="big_m", type=float, default=None)
    p.add_argument("--box", default=None,
                   help="uniform per-variable bounds lo:hi (overrides the file)")
    p.add_argument("--node-limit", dest="node_limit", type=int, default=100000)
    p.add_argument("--time-limit", dest="time_limit", type=float, default=None)
    common(p)

    p = sub.add_parser("rigid")
    p.add_argument("--minimal", action="store_true")
    p.add_argument("--noise", default="1.0",
                   help="percent noise sweep start:step:stop or comma list")
    p.add_argument("--points", default=None, help="comma list of point counts")
    common(p)

    p = sub.add_parser("autocalib")
    p.add_argument("--views", type=int, default=10)
    common(p)

    p = sub.add_parser("nrsfm")
    p.add_argument("--npolys", type=int, default=3)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--order", default="1", help="comma list of hierarchy orders")
    common(p)

    p = sub.add_parser("synth")
    p.add_argument("what", choices=["rigid", "fundamentals", "quartics"])
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--outlier-frac", dest="outlier_frac", type=float, default=0.0)
    p.add_argument("--outliers", type=int, default=0)
    common(p)

    p = sub.add_parser("verify")
    p.add_argument("results")
    p.add_argument("csv")
    return ap


def config_from_args(args) -> ExperimentConfig:
    cmd = args.command
    if cmd == "solve-pop":
        return ExperimentConfig("pop", [args.file], {}, {"order": args.order},
                                args.seed, args.trials, args.out)
    if cmd == "nonminimal":
        opts = {}
        if args.norm:
            opts["norm"] = args.norm
        if args.order is not None:
            opts["order"] = args.order
        return ExperimentConfig("nonminimal", [args.file], {}, opts,
                                args.seed, args.trials, args.out)
    if cmd == "consensus":
        opts = {"eps": args.eps, "node_limit": args.node_limit,
                "time_limit": args.time_limit, "inliers": args.inliers,
                "outliers": args.outliers, "noise": args.noise}
        if args.box:
            lo, hi = (float(t) for t in args.box.split(":"))
            opts["box"] = [lo, hi]
        if args.big_m is not None:
            opts["big_m"] = args.big_m
        inputs = []
        if args.task:
            opts["synth_task"] = args.task
        elif args.file:
            inputs = [args.file]
        else:
            raise ValueError("consensus needs a problem file or --task")
        return ExperimentConfig("consensus", inputs, {}, opts,
                                args.seed, args.trials, args.out)
    if cmd == "rigid":
        sweep = {"noise": _parse_range(args.noise)}
        opts = {"minimal": args.minimal, "noise_percent": True,
                "jobs": args.jobs}
        if args.points:
            sweep["points"] = [int(v) for v in args.points.split(",")]
        return ExperimentConfig("rigid", [], sweep, opts,
                                args.seed, args.trials, args.out)
    if cmd == "autocalib":
        return ExperimentConfig("autocalib", [], {}, {"views": args.views},
                                args.seed, args.trials, args.out)
    if cmd == "nrsfm":
        sweep = {"order": [int(v) for v in str(args.order).split(",")]}
        return ExperimentConfig("nrsfm", [], sweep,
                                {"npolys": args.npolys, "noise": args.noise},
                                args.seed, args.trials, args.out)
    if cmd == "synth":
        return ExperimentConfig("synth", [], {},
                                {"synth_task": args.what, "n": args.n,
                                 "noise": args.noise,
                                 "outlier_frac": args.outlier_frac,
                                 "outliers": args.outliers},
                                args.seed, args.trials, args.out)
    raise ValueError(cmd)


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    if args.command == "verify":
        return _run_verify(args)
    try:
        config = config_from_args(args)
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
