"""Command-line front end.

Subcommands: ``run``, ``verify``, ``sweep``, ``compare``, ``schedule-audit``.
Exit codes: 0 success / all checks pass, 1 check failure, 2 usage or
config error, 3 numeric divergence, 4 I/O error. Relative output paths
are resolved under ``$ANCHORED_GDA_OUTDIR`` when it is set.
"""

from __future__ import annotations

import argparse
import itertools
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import problems, schedules, solver, trace as trace_io, verify
from .errors import (AnchoredGDAError, DataError, DivergenceError,
                     NumericError, UsageError)
from .problems import ProblemSpec
from .report import CheckResult

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_DIVERGENCE = 3
EXIT_IO = 4

SWEEP_CAP = 10_000


def _out_path(path: str) -> str:
    base = os.environ.get("ANCHORED_GDA_OUTDIR")
    if base and not os.path.isabs(path):
        return os.path.join(base, path)
    return path


# ---------------------------------------------------------------------------
# problem / config parsing


def _matrix(value, rows, cols, label):
    M = np.asarray(value, dtype=float)
    if M.shape != (rows, cols):
        raise UsageError(f"{label} must be {rows}x{cols}, got {M.shape}")
    return M


def problem_from_dict(spec: dict) -> ProblemSpec:
    """Build a problem from an inline/JSON definition.

    Matrices are row-major nested arrays; K and the saddle point are
    derived, not declared.
    """
    kind = spec.get("kind")
    name = spec.get("name", "")
    seed = spec.get("seed")
    if kind == "bilinear":
        A = np.atleast_2d(np.asarray(spec["A"], dtype=float))
        return problems.bilinear(A, name=name, seed=seed)
    if kind == "quadratic-saddle":
        A = np.atleast_2d(np.asarray(spec["A"], dtype=float))
        n, m = A.shape
        P = _matrix(spec.get("P", np.zeros((n, n))), n, n, "P")
        Q = _matrix(spec.get("Q", np.zeros((m, m))), m, m, "Q")
        return problems.quadratic_saddle(P, Q, A, name=name, seed=seed)
    raise UsageError(f"unknown problem kind {kind!r}")


def _random_coupling(n: int, m: int, seed: int, orthogonal: bool) -> np.ndarray:
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, m))
    if orthogonal and n == m:
        A, _ = np.linalg.qr(A)
    return A


def parse_problem(text: str) -> ProblemSpec:
    """Parse a --problem argument.

    Accepts a built-in name (``bilinear-2d``), a path to a JSON problem
    file, or an inline spec like ``bilinear:n=1,m=1,a=1`` /
    ``quadratic-saddle:n=5,m=5,a=1,pq=0.1`` (``seed=S`` draws a random
    coupling instead of a scaled identity).
    """
    text = text.strip()
    if text in problems.BUILTIN_PROBLEMS:
        return problems.BUILTIN_PROBLEMS[text]()
    if text.endswith(".json") or os.path.sep in text:
        try:
            with open(text) as fh:
                return problem_from_dict(json.load(fh))
        except OSError as exc:
            raise UsageError(f"cannot read problem file {text}: {exc}")
        except (json.JSONDecodeError, KeyError) as exc:
            raise UsageError(f"bad problem file {text}: {exc}")
    kind, _, params_text = text.partition(":")
    params = {}
    for item in filter(None, params_text.split(",")):
        key, _, value = item.partition("=")
        try:
            params[key.strip()] = float(value)
        except ValueError:
            raise UsageError(f"bad problem parameter {item!r}")
    n = int(params.pop("n", 1))
    m = int(params.pop("m", 1))
    a = params.pop("a", 1.0)
    seed = params.pop("seed", None)
    if kind == "bilinear":
        if params:
            raise UsageError(f"unexpected problem parameters {sorted(params)}")
        A = (_random_coupling(n, m, int(seed), orthogonal=True)
             if seed is not None else a * np.eye(n, m))
        return problems.bilinear(A, name=text,
                                 seed=None if seed is None else int(seed))
    if kind == "quadratic-saddle":
        pq = params.pop("pq", 0.0)
        if params:
            raise UsageError(f"unexpected problem parameters {sorted(params)}")
        A = (_random_coupling(n, m, int(seed), orthogonal=False)
             if seed is not None else a * np.eye(n, m))
        return problems.quadratic_saddle(pq * np.eye(n), pq * np.eye(m), A,
                                         name=text,
                                         seed=None if seed is None else int(seed))
    raise UsageError(f"unknown problem spec {text!r}")


def parse_z0(text: str, problem: ProblemSpec) -> np.ndarray:
    """z0 presets: ``ones``, ``e1``, ``saddle``, or a comma list of floats."""
    if text == "ones":
        return np.ones(problem.dim)
    if text == "e1":
        z = np.zeros(problem.dim)
        z[0] = 1.0
        return z
    if text == "saddle":
        return problem.saddle.copy()
    try:
        z = np.array([float(v) for v in text.split(",")], dtype=float)
    except ValueError:
        raise UsageError(f"bad z0 {text!r}")
    if z.size != problem.dim:
        raise UsageError(f"z0 has {z.size} entries, problem needs {problem.dim}")
    return z


def load_experiment_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise UsageError(f"bad config {path}: {exc}")
    if not isinstance(cfg, dict):
        raise UsageError(f"config {path} must be a JSON object")
    return cfg


def _resolve_experiment(args) -> tuple[ProblemSpec, schedules.Schedule,
                                       np.ndarray, dict]:
    """Merge config file and CLI flags (flags win) into a run setup."""
    cfg = load_experiment_config(args.config) if getattr(args, "config", None) \
        else {}
    problem_spec = getattr(args, "problem", None) or cfg.get("problem")
    if problem_spec is None:
        raise UsageError("no problem given (use --problem or a config file)")
    if isinstance(problem_spec, dict):
        problem = problem_from_dict(problem_spec)
    else:
        problem = parse_problem(str(problem_spec))
    schedule_text = getattr(args, "schedule", None) or cfg.get("schedule")
    if not schedule_text:
        raise UsageError("no schedule given (use --schedule or a config file)")
    schedule = schedules.parse_schedule(schedule_text, problem.lipschitz_K)
    z0_spec = getattr(args, "z0", None) or cfg.get("z0", "ones")
    z0 = (np.asarray(z0_spec, dtype=float) if isinstance(z0_spec, list)
          else parse_z0(str(z0_spec), problem))
    if z0.size != problem.dim:
        raise UsageError(f"z0 has {z0.size} entries, problem needs "
                         f"{problem.dim}")
    T = getattr(args, "steps", None)
    if T is None:
        T = cfg.get("T")
    if T is None:
        raise UsageError("no iteration count given (use --steps or T in config)")
    stride = getattr(args, "record_every", None)
    if stride is None:
        stride = cfg.get("record_every", 1)
    cfg_merged = {
        "T": int(T),
        "record_every": int(stride),
        "checks": cfg.get("checks", "all"),
        "out": getattr(args, "out", None) or cfg.get("out"),
        "report_out": getattr(args, "report_out", None) or
        cfg.get("report_out"),
    }
    return problem, schedule, z0, cfg_merged


# ---------------------------------------------------------------------------
# subcommands


def cmd_run(args) -> int:
    problem, schedule, z0, cfg = _resolve_experiment(args)
    started = time.perf_counter()
    try:
        result = solver.run(problem, schedule, z0, cfg["T"],
                            record_every=cfg["record_every"])
    except DivergenceError as exc:
        if cfg["out"] and exc.partial_trace is not None:
            _write_trace(exc.partial_trace, cfg["out"])
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    elapsed = time.perf_counter() - started
    if cfg["out"]:
        _write_trace(result, cfg["out"])
    final = result.rows[-1]
    print(f"run ok: T={cfg['T']} final_grad_norm_sq={final.grad_norm_sq:.6e} "
          f"wall={elapsed:.3f}s")
    return EXIT_OK


def _write_trace(result, out):
    path = _out_path(out)
    try:
        trace_io.write_csv(result, path)
    except OSError as exc:
        raise _IOFailure(f"cannot write {path}: {exc}")


class _IOFailure(Exception):
    pass


def cmd_verify(args) -> int:
    result = trace_io.read_csv(args.trace)
    problem = parse_problem(args.problem) if args.problem else None
    if problem is not None:
        mismatches = []
        if abs(result.K - problem.lipschitz_K) > 1e-9 * max(1.0, problem.lipschitz_K):
            mismatches.append(f"K: trace={result.K} problem={problem.lipschitz_K}")
        if args.schedule:
            schedule = schedules.parse_schedule(args.schedule,
                                                problem.lipschitz_K)
            if schedule.gamma is not None and result.gamma is not None and \
                    schedule.gamma != result.gamma:
                mismatches.append(f"gamma: trace={result.gamma} "
                                  f"schedule={schedule.gamma}")
        if mismatches:
            raise UsageError("trace/config mismatch: " + "; ".join(mismatches))
    if args.schedule:
        schedule = schedules.parse_schedule(
            args.schedule, problem.lipschitz_K if problem else result.K)
    else:
        schedule = schedules.parse_schedule(result.schedule_str, result.K)
    if problem is not None and args.z0:
        # restores the identity check after a CSV round-trip
        result.iterates[0] = parse_z0(args.z0, problem)
    checks = args.checks.split(",") if args.checks else ["all"]
    window = None
    if args.rate_window:
        lo, _, hi = args.rate_window.partition(":")
        window = (int(lo), int(hi))
    report = verify.verification_report(result, schedule, problem=problem,
                                        checks=checks, rate_window=window)
    text = json.dumps(report, indent=2)
    if args.report_out:
        path = _out_path(args.report_out)
        try:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        except OSError as exc:
            raise _IOFailure(f"cannot write {path}: {exc}")
    else:
        print(text)
    for check in report["checks"]:
        status = ("inapplicable" if not check["applicable"]
                  else "pass" if check["passed"] else "FAIL")
        margin = check["worst_margin"]
        margin = "n/a" if margin is None else f"{margin:.3e}"
        print(f"{check['name']}: {status} (worst margin {margin} "
              f"at t={check['worst_t']})", file=sys.stderr)
    return EXIT_OK if report["all_passed"] else EXIT_CHECK_FAILED


def _sweep_cell(problem, schedule_text, z0, T, record_every):
    """One sweep grid cell; returns a flat summary row."""
    schedule = schedules.parse_schedule(schedule_text, problem.lipschitz_K)
    row = {"schedule": schedule_text, "T": T,
           "gamma": "" if schedule.gamma is None else schedule.gamma,
           "p": "" if schedule.p is None else schedule.p,
           "diverged": 0, "final_grad_norm_sq": "", "slope": "",
           "checks_passed": "", "checks_total": ""}
    try:
        result = solver.run(problem, schedule, z0, T, record_every=record_every)
    except DivergenceError as exc:
        row["diverged"] = exc.t
        return row
    row["final_grad_norm_sq"] = result.rows[-1].grad_norm_sq
    report = verify.verification_report(
        result, schedule, problem=problem,
        checks=["bounded_iterates", "diff_contraction", "last_iterate_rate"]
        if schedule.variant != schedules.PLAIN_GDA else ["bounded_iterates"])
    applicable = [c for c in report["checks"] if c["applicable"]]
    row["checks_passed"] = sum(c["passed"] for c in applicable)
    row["checks_total"] = len(applicable)
    try:
        lo = 1000 if T > 2000 else 1
        row["slope"] = round(verify.fit_rate(result, lo, T).slope, 6)
    except AnchoredGDAError:
        pass
    return row


def cmd_sweep(args) -> int:
    problem, schedule, z0, cfg = _resolve_experiment(args)
    base_text = schedule.describe()
    gammas = [float(g) for g in args.gamma.split(",")] if args.gamma else [None]
    ps = [float(p) for p in args.p.split(",")] if args.p else [None]
    Ts = [int(t) for t in args.T_list.split(",")] if args.T_list else [cfg["T"]]
    cells = []
    for g, p, T in itertools.product(gammas, ps, Ts):
        text = base_text
        if g is not None:
            text = _override_param(text, "gamma", g)
        if p is not None:
            text = _override_param(text, "p", p)
        cells.append((text, T))
    if len(cells) > SWEEP_CAP:
        raise UsageError(f"sweep would run {len(cells)} cells, cap is {SWEEP_CAP}")
    worker = lambda cell: _sweep_cell(problem, cell[0], z0, cell[1],
                                      cfg["record_every"])
    if args.parallel > 1:
        with ProcessPoolExecutor(max_workers=args.parallel) as pool:
            rows = list(pool.map(_sweep_cell,
                                 *zip(*[(problem, c[0], z0, c[1],
                                         cfg["record_every"]) for c in cells])))
    else:
        rows = [worker(c) for c in cells]
    rows.sort(key=lambda r: (str(r["schedule"]), r["T"]))
    header = ["schedule", "gamma", "p", "T", "final_grad_norm_sq", "slope",
              "checks_passed", "checks_total", "diverged"]
    lines = [",".join(header)]
    lines += [",".join(str(r[k]) for k in header) for r in rows]
    text = "\n".join(lines) + "\n"
    if cfg["out"]:
        path = _out_path(cfg["out"])
        try:
            with open(path, "w") as fh:
                fh.write(text)
        except OSError as exc:
            raise _IOFailure(f"cannot write {path}: {exc}")
    else:
        print(text, end="")
    return EXIT_OK


def _override_param(schedule_text: str, key: str, value: float) -> str:
    variant, _, params_text = schedule_text.partition(":")
    params = dict(item.split("=") for item in params_text.split(",") if item)
    if key not in params:
        raise UsageError(f"schedule {schedule_text!r} has no parameter {key!r}")
    params[key] = f"{value:g}"
    return variant + ":" + ",".join(f"{k}={v}" for k, v in params.items())


def cmd_compare(args) -> int:
    if len(args.configs) < 2:
        raise UsageError("compare needs at least 2 configs")
    setups = []
    for path in args.configs:
        ns = argparse.Namespace(config=path, problem=None, schedule=None,
                                z0=None, steps=None, record_every=None,
                                out=None, report_out=None)
        setups.append(_resolve_experiment(ns))
    problem0, _, z00, cfg0 = setups[0]
    for problem, _, z0, cfg in setups[1:]:
        if problem.name != problem0.name or problem.kind != problem0.kind or \
                not np.array_equal(problem.A, problem0.A):
            raise UsageError("compare configs use different problems")
        if not np.array_equal(z0, z00):
            raise UsageError("compare configs use different z0")
    columns = {}
    slopes = {}
    labels = []
    for problem, schedule, z0, cfg in setups:
        label = schedule.describe()
        labels.append(label)
        try:
            result = solver.run(problem, schedule, z0, cfg["T"],
                                record_every=cfg["record_every"])
        except DivergenceError as exc:
            result = exc.partial_trace
            slopes[label] = f"diverged at t={exc.t}"
        columns[label] = {r.t: r.grad_norm_sq for r in result.rows}
        if label not in slopes:
            try:
                lo = 1000 if cfg["T"] > 2000 else 1
                slopes[label] = f"{verify.fit_rate(result, lo, cfg['T']).slope:.6f}"
            except AnchoredGDAError as exc:
                slopes[label] = f"no fit ({exc})"
    all_t = sorted(set().union(*[set(c) for c in columns.values()]))
    lines = [f"# problem: {problem0.name}"]
    lines += [f"# slope[{lab}]: {slopes[lab]}" for lab in labels]
    lines.append(",".join(["t"] + [f"grad_norm_sq[{lab}]" for lab in labels]))
    for t in all_t:
        vals = [("" if t not in columns[lab] else
                 format(columns[lab][t], ".17g")) for lab in labels]
        lines.append(",".join([str(t)] + vals))
    text = "\n".join(lines) + "\n"
    if args.out:
        path = _out_path(args.out)
        try:
            with open(path, "w") as fh:
                fh.write(text)
        except OSError as exc:
            raise _IOFailure(f"cannot write {path}: {exc}")
    else:
        print(text, end="")
    return EXIT_OK


def cmd_schedule_audit(args) -> int:
    gammas = [float(g) for g in args.gamma.split(",")]
    results = []
    for g in gammas:
        schedule = schedules.Schedule(schedules.ANCHORED_NEW, gamma=g,
                                      lipschitz_K=args.k)
        contraction = schedules.check_contraction_bound(schedule, args.t_max)
        error_coeff = schedules.check_error_coefficient_bound(schedule,
                                                              args.t_max)
        results += [(g, contraction), (g, error_coeff)]
        # expansion residuals must stay bounded across a dyadic grid; the
        # grid caps at 2^16 where float64 cancellation starts to dominate
        # the fourth-order residual (r1*(t+g)^2 -> 1.5g, r2*(t+g)^4 -> ~0.7g)
        grid = [2 ** k for k in range(6, 17) if 2 ** k <= args.t_max] or [1]
        products = [schedules.asymptotic_residuals(schedule, t) for t in grid]
        r1p = max(r1 * (t + g) ** 2 for t, (r1, _) in zip(grid, products))
        r2p = max(r2 * (t + g) ** 4 for t, (_, r2) in zip(grid, products))
        results.append((g, CheckResult(
            name="asymptotic_residuals",
            passed=r1p <= 2.0 * g and r2p <= g,
            worst_margin=min(2.0 * g - r1p, g - r2p),
            worst_t=grid[-1] if grid else 1,
            detail=f"max r1*(t+g)^2={r1p:.4g}, max r2*(t+g)^4={r2p:.4g}")))
    ok = True
    for g, check in results:
        status = "pass" if check.passed else "FAIL"
        ok = ok and check.passed
        print(f"gamma={g:g} {check.name}: {status} "
              f"(worst margin {check.worst_margin:.6e} at t={check.worst_t}; "
              f"{check.detail})")
    if args.per_t:
        schedule = schedules.Schedule(schedules.ANCHORED_NEW, gamma=gammas[0],
                                      lipschitz_K=args.k)
        for t in range(1, min(args.t_max, 20) + 1):
            c = schedules.difference_coefficients(schedule, t)
            bound = 1.0 - schedules.CONTRACTION_NUMERATOR / (t + 1 + gammas[0])
            print(f"t={t} contraction={c.contraction:.9f} "
                  f"margin={bound - c.contraction:.9f} E_err={c.E_err:.3e}")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anchored-gda",
        description="Anchored GDA solver and rate-verification harness")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute one experiment, write a trace")
    _add_experiment_flags(run_p)
    run_p.set_defaults(func=cmd_run)

    verify_p = sub.add_parser("verify", help="check a trace against the bounds")
    verify_p.add_argument("trace", help="path to a trace CSV")
    verify_p.add_argument("--problem", help="problem name/spec/file for "
                          "consistency and identity checks")
    verify_p.add_argument("--schedule")
    verify_p.add_argument("--z0", help="initial point used for the trace")
    verify_p.add_argument("--checks", help="comma list of check names (default all)")
    verify_p.add_argument("--rate-window", help="LO:HI window for the rate fit")
    verify_p.add_argument("--report-out")
    verify_p.set_defaults(func=cmd_verify)

    sweep_p = sub.add_parser("sweep", help="run a parameter grid")
    _add_experiment_flags(sweep_p)
    sweep_p.add_argument("--gamma", help="comma list of gamma values")
    sweep_p.add_argument("--p", help="comma list of p values")
    sweep_p.add_argument("--T-list", dest="T_list", help="comma list of horizons")
    sweep_p.add_argument("--parallel", type=int, default=1)
    sweep_p.set_defaults(func=cmd_sweep)

    compare_p = sub.add_parser("compare",
                               help="side-by-side grad-norm columns")
    compare_p.add_argument("configs", nargs="+")
    compare_p.add_argument("--out")
    compare_p.set_defaults(func=cmd_compare)

    audit_p = sub.add_parser("schedule-audit",
                             help="trace-free scalar scan of the coefficient "
                                  "bounds")
    audit_p.add_argument("--gamma", default="2,4,8")
    audit_p.add_argument("--t-max", dest="t_max", type=int, default=1_000_000)
    audit_p.add_argument("--k", type=float, default=1.0,
                         help="Lipschitz constant used in the scan")
    audit_p.add_argument("--per-t", action="store_true",
                         help="print per-t margins for the first gamma")
    audit_p.set_defaults(func=cmd_schedule_audit)

    return parser


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--problem", help="problem name, spec string, or JSON file")
    p.add_argument("--schedule", help="e.g. anchored-new:gamma=2")
    p.add_argument("--z0", help="ones | e1 | saddle | comma list")
    p.add_argument("--steps", type=int, help="iteration horizon T")
    p.add_argument("--record-every", type=int, dest="record_every")
    p.add_argument("--out", help="trace/summary CSV output path")
    p.add_argument("--report-out", dest="report_out")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (UsageError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (_IOFailure, OSError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
