"""The anchored update loop and trace recording.

Update rule (applied in a fixed evaluation order so reruns are bitwise
identical):

    z_{t+1} = z_t - alpha_t G(z_t) + beta_t (z_0 - z_t)

The run is unconstrained and has no stopping criterion; it executes a
fixed horizon T and halts early only on divergence (any coordinate above
``DIVERGENCE_LIMIT`` in magnitude, expected for plain GDA on bilinear
games).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import schedules
from .errors import DataError, DivergenceError, NumericError, UsageError
from .problems import ProblemSpec, as_vector, operator_matrix
from .schedules import Schedule
from .trace import Trace, TraceRow

DIVERGENCE_LIMIT = 1e150

# rows kept regardless of stride: d_1 = z_2 - z_1 needs t in {1, 2}; the
# last-iterate claims need T-1 and T
_ALWAYS_KEPT = (0, 1, 2)


@dataclass(frozen=True)
class IterateState:
    """Solver state after t steps."""

    t: int
    z_t: np.ndarray
    z0: np.ndarray
    z_prev: np.ndarray | None = None


def step(state: IterateState, problem: ProblemSpec,
         schedule: Schedule) -> IterateState:
    """One anchored update; returns the state at t+1."""
    z = as_vector(state.z_t, problem.dim)
    z0 = as_vector(state.z0, problem.dim)
    g = operator_matrix(problem) @ z
    a = schedules.alpha(schedule, state.t)
    b = schedules.beta(schedule, state.t)
    z_next = z - a * g + b * (z0 - z)
    if not np.all(np.isfinite(z_next)):
        bad = int(np.flatnonzero(~np.isfinite(z_next))[0])
        raise NumericError(
            f"non-finite iterate at t={state.t + 1}, coordinate {bad}"
        )
    return IterateState(t=state.t + 1, z_t=z_next, z0=z0, z_prev=z)


def _check_schedule_K(problem: ProblemSpec, schedule: Schedule) -> None:
    if schedule.variant != schedules.ANCHORED_NEW:
        return
    K_s, K_p = schedule.lipschitz_K, problem.lipschitz_K
    if abs(K_s - K_p) > 1e-12 * max(1.0, K_p):
        raise UsageError(
            f"schedule K={K_s} does not match problem K={K_p}"
        )


def run(problem: ProblemSpec, schedule: Schedule, z0, T: int,
        record_every: int = 1,
        divergence_limit: float = DIVERGENCE_LIMIT) -> Trace:
    """Iterate the update T times and record a trace.

    Rows are recorded at t = 0 mod record_every plus t in {0, 1, 2, T-1, T}
    always; full iterate vectors are kept only at those five indices.
    Deterministic: identical inputs give bitwise-identical traces.

    Raises DivergenceError (with the partial trace attached) when a
    coordinate exceeds ``divergence_limit`` or goes non-finite.
    """
    if T < 1:
        raise UsageError("T must be >= 1")
    if record_every < 1:
        raise UsageError("record_every must be >= 1")
    _check_schedule_K(problem, schedule)
    z0 = as_vector(z0, problem.dim).copy()
    M = operator_matrix(problem)
    saddle = problem.saddle
    kept = set(_ALWAYS_KEPT) | {T - 1, T}
    ts = np.arange(T)
    alphas = np.asarray(schedules.alpha(schedule, ts), dtype=float).reshape(T)
    betas = np.asarray(schedules.beta(schedule, ts), dtype=float).reshape(T)

    trace = Trace(
        problem_id=problem.name,
        schedule_str=schedule.describe(),
        T=T,
        K=problem.lipschitz_K,
        gamma=schedule.gamma,
        seed=problem.seed,
    )

    def record(t, z, g, z_next):
        trace.rows.append(TraceRow(
            t=t,
            grad_norm_sq=float(g @ g),
            dist_opt_sq=float(np.sum((z - saddle) ** 2)),
            diff_norm=None if z_next is None else
            float(np.linalg.norm(z_next - z)),
            dist_anchor=float(np.linalg.norm(z - z0)),
        ))

    z = z0.copy()
    for t in range(T):
        g = M @ z
        z_next = z - alphas[t] * g + betas[t] * (z0 - z)
        if t in kept:
            trace.iterates[t] = z.copy()
        if t % record_every == 0 or t in kept:
            record(t, z, g, z_next)
        if not np.all(np.isfinite(z_next)) or \
                np.abs(z_next).max() > divergence_limit:
            raise DivergenceError(
                f"divergence at t={t + 1}: iterate magnitude exceeded "
                f"{divergence_limit:g}",
                t=t + 1, partial_trace=trace,
            )
        z = z_next
    trace.iterates[T] = z.copy()
    record(T, z, M @ z, None)
    return trace


def reconstruct_gradient_norm(row: TraceRow, schedule: Schedule) -> float:
    """Upper bound on ||G(z_t)|| rebuilt from recorded norms.

    Rearranging the update rule, alpha_t G(z_t) = (z_t - z_{t+1}) +
    beta_t (z_0 - z_t), so by the triangle inequality

        ||G(z_t)|| <= diff_norm / alpha_t + (beta_t / alpha_t) dist_anchor.
    """
    if row.diff_norm is None:
        raise DataError(f"row t={row.t} has no diff_norm")
    a = schedules.alpha(schedule, row.t)
    b = schedules.beta(schedule, row.t)
    return row.diff_norm / a + (b / a) * row.dist_anchor
