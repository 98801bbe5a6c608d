"""Per-iteration trace records and their CSV serialization.

A trace stores norms, not iterate vectors, except at t in {0, 1, 2, T-1, T}
where the full vectors are kept for identity checks and for the base-case
difference d_1 = z_2 - z_1. The CSV format is::

    # problem: bilinear-2d
    # schedule: anchored-new:gamma=2
    # T: 100000
    # K: 1
    # gamma: 2
    t,grad_norm_sq,dist_opt_sq,diff_norm,dist_anchor
    0,2,2,0.41421356237309515,0

with 17-significant-digit decimals and absent values as empty fields.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

COLUMNS = ("t", "grad_norm_sq", "dist_opt_sq", "diff_norm", "dist_anchor")


@dataclass(frozen=True)
class TraceRow:
    t: int
    grad_norm_sq: float
    dist_opt_sq: float | None  # absent when the saddle point is unknown
    diff_norm: float | None    # absent on the final row
    dist_anchor: float


@dataclass
class Trace:
    """A recorded run: metadata header plus per-iteration rows."""

    problem_id: str
    schedule_str: str
    T: int
    K: float
    gamma: float | None
    rows: list[TraceRow] = field(default_factory=list)
    # full iterate vectors at t in {0, 1, 2, T-1, T}; lost on CSV round-trip
    iterates: dict[int, np.ndarray] = field(default_factory=dict)
    seed: int | None = None

    def row_at(self, t: int) -> TraceRow:
        for row in self.rows:
            if row.t == t:
                return row
        raise DataError(f"trace has no row at t={t}")

    def stride(self) -> int:
        """Smallest gap between consecutive recorded t (1 = dense)."""
        if len(self.rows) < 2:
            raise DataError("trace has fewer than 2 rows")
        ts = np.array([r.t for r in self.rows])
        return int(np.diff(ts).min())

    def column(self, name: str, t_min: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """(t, values) arrays for one column, skipping absent entries."""
        if name not in COLUMNS[1:]:
            raise DataError(f"unknown trace column {name!r}")
        ts, vals = [], []
        for row in self.rows:
            v = getattr(row, name)
            if v is not None and row.t >= t_min:
                ts.append(row.t)
                vals.append(v)
        return np.array(ts, dtype=int), np.array(vals, dtype=float)


def _fmt(value: float | None) -> str:
    return "" if value is None else format(value, ".17g")


def write_csv(trace: Trace, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"# problem: {trace.problem_id}\n")
        fh.write(f"# schedule: {trace.schedule_str}\n")
        fh.write(f"# T: {trace.T}\n")
        fh.write(f"# K: {_fmt(trace.K)}\n")
        gamma = "" if trace.gamma is None else _fmt(trace.gamma)
        fh.write(f"# gamma: {gamma}\n")
        if trace.seed is not None:
            fh.write(f"# seed: {trace.seed}\n")
        fh.write(",".join(COLUMNS) + "\n")
        for row in trace.rows:
            fh.write(",".join([
                str(row.t),
                _fmt(row.grad_norm_sq),
                _fmt(row.dist_opt_sq),
                _fmt(row.diff_norm),
                _fmt(row.dist_anchor),
            ]) + "\n")


def read_csv(path) -> Trace:
    """Parse a trace CSV; raises DataError with a line number on bad input."""
    meta: dict[str, str] = {}
    rows: list[TraceRow] = []
    header_seen = False
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                meta[key.strip()] = value.strip()
                continue
            if not header_seen:
                if line != ",".join(COLUMNS):
                    raise DataError(f"{path}:{lineno}: bad header {line!r}")
                header_seen = True
                continue
            parts = line.split(",")
            if len(parts) != len(COLUMNS):
                raise DataError(
                    f"{path}:{lineno}: expected {len(COLUMNS)} fields, "
                    f"got {len(parts)}"
                )
            try:
                rows.append(TraceRow(
                    t=int(parts[0]),
                    grad_norm_sq=float(parts[1]),
                    dist_opt_sq=float(parts[2]) if parts[2] else None,
                    diff_norm=float(parts[3]) if parts[3] else None,
                    dist_anchor=float(parts[4]),
                ))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}")
    if not header_seen:
        raise DataError(f"{path}: no header line found")
    try:
        trace = Trace(
            problem_id=meta.get("problem", ""),
            schedule_str=meta.get("schedule", ""),
            T=int(meta["T"]),
            K=float(meta["K"]),
            gamma=float(meta["gamma"]) if meta.get("gamma") else None,
            rows=rows,
            seed=int(meta["seed"]) if meta.get("seed") else None,
        )
    except (KeyError, ValueError) as exc:
        raise DataError(f"{path}: bad or missing metadata ({exc})")
    ts = [r.t for r in rows]
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise DataError(f"{path}: row indices are not strictly increasing")
    return trace
