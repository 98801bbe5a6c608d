"""Numerical checkers for the convergence analysis.

Each checker validates one quantitative claim against a recorded trace:

* ``check_one_step``            one-step squared-distance inequality
* ``check_bounded_iterates``    12x boundedness of ||z_t - z*||^2
* ``check_difference_identity`` exactness of the difference recurrence
* ``check_diff_contraction``    ||z_{t+1} - z_t|| <= E/(t+gamma)
* ``check_last_iterate_rate``   ||G(z_t)||^2 <= C/t (and C/(t+gamma))

Tolerance policy: identity checks use 1e-12 relative residual (exact
algebra, rounding is the only permissible error); inequality checks use
1e-10 relative slack on the favorable side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import schedules
from .errors import DataError, DegenerateFitError, UsageError
from .problems import ProblemSpec, as_vector, operator_matrix
from .report import CheckResult, all_passed
from .schedules import ANCHORED_NEW, PLAIN_GDA, Schedule
from .trace import Trace

IDENTITY_TOL = 1e-12
INEQUALITY_TOL = 1e-10


@dataclass(frozen=True)
class Constants:
    """Explicit constants of the O(1/t) last-iterate bound.

    D = (sqrt(12) + 1) ||z_0 - z*||
    E = max(||d_1|| (1 + gamma), 20 gamma D),  d_1 = z_2 - z_1
    C = K^2 (E + gamma D)^2
    """

    D: float
    E: float
    C: float
    gamma: float
    K: float
    d1_norm: float
    z0_dist: float

    def to_dict(self) -> dict:
        return {"D": self.D, "E": self.E, "C": self.C,
                "gamma": self.gamma, "K": self.K}


@dataclass(frozen=True)
class RateFit:
    """Least-squares slope of log grad_norm_sq against log t."""

    slope: float
    intercept: float
    r_squared: float
    t_from: int
    t_to: int

    def to_dict(self) -> dict:
        return {"slope": self.slope, "r_squared": self.r_squared,
                "window": [self.t_from, self.t_to]}


def _is_dense(trace: Trace) -> bool:
    ts = np.array([r.t for r in trace.rows])
    return ts.size >= 2 and bool(np.all(np.diff(ts) == 1))


def _inapplicable(name: str, detail: str) -> CheckResult:
    return CheckResult(name=name, passed=True, worst_margin=math.inf,
                       worst_t=-1, detail=detail, applicable=False)


def compute_constants(trace: Trace, schedule: Schedule) -> Constants:
    """Derive (D, E, C) from a recorded run.

    Needs ||z_0 - z*|| (row t=0) and d_1 = z_2 - z_1 (full iterates at
    t=1,2, or the diff_norm recorded at t=1).
    """
    if schedule.variant == PLAIN_GDA:
        raise UsageError("constants are undefined for plain-gda")
    gamma = schedule.gamma
    K = schedule.lipschitz_K if schedule.variant == ANCHORED_NEW else trace.K
    row0 = trace.row_at(0)
    if row0.dist_opt_sq is None:
        raise DataError("constants need dist_opt_sq at t=0 (saddle unknown)")
    z0_dist = math.sqrt(row0.dist_opt_sq)
    if 1 in trace.iterates and 2 in trace.iterates:
        d1_norm = float(np.linalg.norm(trace.iterates[2] - trace.iterates[1]))
    else:
        row1 = trace.row_at(1)
        if row1.diff_norm is None:
            raise DataError("constants need iterates (or diff_norm) at t=1,2")
        d1_norm = row1.diff_norm
    D = (math.sqrt(12.0) + 1.0) * z0_dist
    E = max(d1_norm * (1.0 + gamma), 20.0 * gamma * D)
    C = K ** 2 * (E + gamma * D) ** 2
    return Constants(D=D, E=E, C=C, gamma=gamma, K=K,
                     d1_norm=d1_norm, z0_dist=z0_dist)


def check_one_step(trace: Trace, schedule: Schedule,
                   one_step_factor: float = 1.5) -> CheckResult:
    """Per-step distance inequality over a stride-1 trace:

    ||z_{t+1}-z*||^2 <= (1 - b_t + 1.5 a_t^2 K^2) ||z_t-z*||^2
                        + (b_t + 2 b_t^2) ||z_0-z*||^2
    """
    if schedule.variant != ANCHORED_NEW:
        raise UsageError("one-step check requires an anchored-new schedule")
    ts, dist = trace.column("dist_opt_sq")
    if dist.size == 0:
        raise DataError("one-step check needs dist_opt_sq")
    if trace.stride() != 1 or not np.all(np.diff(ts) == 1):
        raise DataError("one-step check needs a stride-1 trace")
    K = schedule.lipschitz_K
    t = ts[:-1].astype(float)
    a = np.asarray(schedules.alpha(schedule, t))
    b = np.asarray(schedules.beta(schedule, t))
    rhs = (1.0 - b + one_step_factor * a ** 2 * K ** 2) * dist[:-1] \
        + (b + 2.0 * b ** 2) * dist[0]
    margins = rhs - dist[1:]
    scale = np.maximum(np.abs(rhs), np.abs(dist[1:]))
    i = int(np.argmin(margins))
    passed = bool(np.all(margins >= -INEQUALITY_TOL * np.maximum(scale, 1e-300)))
    return CheckResult(name="one_step", passed=passed,
                       worst_margin=float(margins[i]), worst_t=int(ts[i]),
                       detail=f"{margins.size} steps checked")


def check_bounded_iterates(trace: Trace) -> CheckResult:
    """Lemma-of-boundedness check: ||z_t-z*||^2 <= 12 ||z_0-z*||^2 and
    ||z_t-z_0|| <= D at every recorded t."""
    ts, dist = trace.column("dist_opt_sq")
    if dist.size == 0:
        raise DataError("bounded-iterates check needs dist_opt_sq")
    d0 = dist[0]
    margins = 12.0 * d0 - dist
    i = int(np.argmin(margins))
    tol = INEQUALITY_TOL * max(12.0 * d0, 1e-300)
    passed = bool(np.all(margins >= -tol))
    D = (math.sqrt(12.0) + 1.0) * math.sqrt(d0)
    ts_a, anchor = trace.column("dist_anchor")
    anchor_ok = bool(np.all(D - anchor >= -INEQUALITY_TOL * max(D, 1e-300)))
    max_ratio = float(dist.max() / d0) if d0 > 0 else 0.0
    return CheckResult(
        name="bounded_iterates",
        passed=passed and anchor_ok,
        worst_margin=float(margins[i]),
        worst_t=int(ts[i]),
        detail=(f"max ||z_t-z*||^2 / ||z_0-z*||^2 = {max_ratio:.6g}; "
                f"anchor distance bound {'ok' if anchor_ok else 'VIOLATED'}"),
    )


def check_difference_identity(problem: ProblemSpec, schedule: Schedule,
                              z0, t_list, dtype=np.float64) -> CheckResult:
    """Machine-precision witness that the difference recurrence is exact.

    For each t, z_{t+2} - z_{t+1} is computed (a) by stepping the update
    rule and (b) from A (z_{t+1}-z_t) - alpha_{t+1} (G(z_{t+1})-G(z_t)) +
    E_err (z_0-z_t). The residual must be <= 1e-12 relative. Pass
    ``dtype=np.longdouble`` for the extended-precision path.
    """
    if schedule.variant == PLAIN_GDA:
        raise UsageError("identity check requires an anchored schedule")
    t_list = sorted(int(t) for t in t_list)
    if t_list and t_list[0] < 0:
        raise UsageError("iteration indices must be >= 0")
    t_hi = (t_list[-1] if t_list else 0) + 2
    K = problem.lipschitz_K
    M = operator_matrix(problem).astype(dtype)
    z0 = as_vector(z0, problem.dim).astype(dtype)
    iterates = [z0]
    z = z0
    one = dtype(1)
    for t in range(t_hi):
        a = schedules.alpha(schedule, dtype(t))
        b = schedules.beta(schedule, dtype(t))
        z = z - a * (M @ z) + b * (z0 - z)
        iterates.append(z)
    worst = math.inf
    worst_t = t_list[0] if t_list else 0
    for t in t_list:
        zt, z1, z2 = iterates[t], iterates[t + 1], iterates[t + 2]
        a_t = schedules.alpha(schedule, dtype(t))
        a_next = schedules.alpha(schedule, dtype(t + 1))
        b_t = schedules.beta(schedule, dtype(t))
        b_next = schedules.beta(schedule, dtype(t + 1))
        ratio = (a_t - a_next) / a_t
        A = one - b_next - ratio
        E_err = ratio * b_t + b_next - b_t
        lhs = z2 - z1
        rhs = A * (z1 - zt) - a_next * (M @ z1 - M @ zt) + E_err * (z0 - zt)
        residual = float(np.linalg.norm((lhs - rhs).astype(float)))
        rel = residual / max(1.0, float(np.linalg.norm(lhs.astype(float))))
        margin = IDENTITY_TOL - rel
        if margin < worst:
            worst = margin
            worst_t = t
    return CheckResult(
        name="difference_identity",
        passed=worst >= 0.0,
        worst_margin=worst,
        worst_t=worst_t,
        detail=(f"{len(t_list)} indices, dtype={np.dtype(dtype).name}; "
                f"worst relative residual {IDENTITY_TOL - worst:.3e}"),
    )


def check_diff_contraction(trace: Trace, constants: Constants) -> CheckResult:
    """||z_{t+1} - z_t|| <= E/(t+gamma) at every recorded t >= 1."""
    ts, diffs = trace.column("diff_norm", t_min=1)
    if diffs.size == 0:
        raise DataError("diff-contraction check needs diff_norm at t >= 1")
    bounds = constants.E / (ts + constants.gamma)
    margins = bounds - diffs
    i = int(np.argmin(margins))
    passed = bool(np.all(margins >= -INEQUALITY_TOL *
                         np.maximum(bounds, 1e-300)))
    return CheckResult(name="diff_contraction", passed=passed,
                       worst_margin=float(margins[i]), worst_t=int(ts[i]),
                       detail=f"{diffs.size} rows checked, E={constants.E:.6g}")


def check_last_iterate_rate(trace: Trace, constants: Constants) -> CheckResult:
    """||G(z_t)||^2 <= C/t at every recorded t >= 1, plus the tighter
    C/(t+gamma) from which it follows; the reported margin is for the
    tighter bound."""
    ts, grad = trace.column("grad_norm_sq", t_min=1)
    if grad.size == 0:
        raise DataError("rate check needs grad_norm_sq at t >= 1")
    tight = constants.C / (ts + constants.gamma)
    stated = constants.C / ts
    margins = tight - grad
    i = int(np.argmin(margins))
    tol = INEQUALITY_TOL * np.maximum(tight, 1e-300)
    passed = bool(np.all(margins >= -tol) and
                  np.all(stated - grad >= -INEQUALITY_TOL *
                         np.maximum(stated, 1e-300)))
    return CheckResult(name="last_iterate_rate", passed=passed,
                       worst_margin=float(margins[i]), worst_t=int(ts[i]),
                       detail=f"C={constants.C:.6g}, bound C/(t+gamma)")


def fit_rate(trace: Trace, t_from: int, t_to: int) -> RateFit:
    """Empirical convergence exponent over [t_from, t_to].

    Least squares of log grad_norm_sq against log t; needs at least 10
    recorded rows with positive gradient norm in the window.
    """
    ts, grad = trace.column("grad_norm_sq", t_min=max(t_from, 1))
    mask = ts <= t_to
    ts, grad = ts[mask], grad[mask]
    if np.any(grad == 0.0):
        raise DegenerateFitError(
            "zero gradient norm in fit window (problem solved exactly)")
    if ts.size < 10:
        raise DataError(f"rate fit needs >= 10 rows in window, got {ts.size}")
    x = np.log(ts.astype(float))
    y = np.log(grad)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid ** 2)) / ss_tot
    return RateFit(slope=float(slope), intercept=float(intercept),
                   r_squared=r2, t_from=int(ts[0]), t_to=int(ts[-1]))


TRACE_CHECKS = ("one_step", "bounded_iterates", "difference_identity",
                "diff_contraction", "last_iterate_rate")


def verification_report(trace: Trace, schedule: Schedule,
                        problem: ProblemSpec | None = None,
                        checks=("all",),
                        rate_window: tuple[int, int] | None = None,
                        identity_t_list=range(0, 101)) -> dict:
    """Run the selected checks and assemble a JSON-compatible report.

    Checks that cannot apply (plain-gda constants, stride > 1 for the
    one-step inequality, missing problem definition for the identity
    check) are marked inapplicable rather than failed.
    """
    selected = set(TRACE_CHECKS) if "all" in checks else set(checks)
    unknown = selected - set(TRACE_CHECKS)
    if unknown:
        raise UsageError(f"unknown checks: {sorted(unknown)}")
    results: list[CheckResult] = []
    constants = None
    if schedule.variant != PLAIN_GDA:
        try:
            constants = compute_constants(trace, schedule)
        except DataError:
            constants = None

    if "one_step" in selected:
        if schedule.variant != ANCHORED_NEW:
            results.append(_inapplicable(
                "one_step", f"requires anchored-new, got {schedule.variant}"))
        elif not _is_dense(trace):
            results.append(_inapplicable("one_step", "requires a stride-1 trace"))
        else:
            results.append(check_one_step(trace, schedule))
    if "bounded_iterates" in selected:
        results.append(check_bounded_iterates(trace))
    if "difference_identity" in selected:
        if schedule.variant == PLAIN_GDA:
            results.append(_inapplicable(
                "difference_identity", "requires an anchored schedule"))
        elif problem is None or 0 not in trace.iterates:
            results.append(_inapplicable(
                "difference_identity",
                "needs the problem definition and z0 to re-run iterates"))
        else:
            results.append(check_difference_identity(
                problem, schedule, trace.iterates[0], identity_t_list))
    needs_constants = selected & {"diff_contraction", "last_iterate_rate"}
    for name in sorted(needs_constants):
        if constants is None:
            results.append(_inapplicable(
                name, "constants undefined for this schedule/trace"))
        elif name == "diff_contraction":
            results.append(check_diff_contraction(trace, constants))
        else:
            results.append(check_last_iterate_rate(trace, constants))

    results.sort(key=lambda r: r.name)
    report = {
        "problem": trace.problem_id,
        "schedule": trace.schedule_str,
        "constants": constants.to_dict() if constants else None,
        "checks": [r.to_dict() for r in results],
        "all_passed": all_passed(results),
    }
    if rate_window is not None:
        try:
            report["rate_fit"] = fit_rate(trace, *rate_window).to_dict()
        except (DataError, DegenerateFitError) as exc:
            report["rate_fit"] = {"error": str(exc)}
    return report
