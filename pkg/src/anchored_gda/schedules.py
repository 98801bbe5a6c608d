"""Step-size and anchoring schedules, and their difference coefficients.

Three variants:

* ``anchored-new``:  alpha_t = 1 / (K sqrt(t + gamma)),  beta_t = gamma / (t + gamma)
* ``anchored-ryu``:  alpha_t = (1 - p) / (t + 1)^p,      beta_t = (1 - p) gamma / (t + 1)
* ``plain-gda``:     alpha_t = const,                    beta_t = 0

The one-step difference recurrence

    z_{t+2} - z_{t+1} = A (z_{t+1} - z_t)
                        - alpha_{t+1} (G(z_{t+1}) - G(z_t))
                        + E_err (z_0 - z_t)

holds exactly with A = 1 - beta_{t+1} - (alpha_t - alpha_{t+1}) / alpha_t
and E_err = ((alpha_t - alpha_{t+1}) / alpha_t) beta_t + beta_{t+1} - beta_t.
For anchored-new these coefficients obey the scan-verified bounds

    sqrt(A^2 + alpha_{t+1}^2 K^2) <= 1 - 1.15 / (t + 1 + gamma)
    |E_err| <= gamma / (t + gamma)^2
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .report import CheckResult

ANCHORED_NEW = "anchored-new"
ANCHORED_RYU = "anchored-ryu"
PLAIN_GDA = "plain-gda"

CONTRACTION_NUMERATOR = 1.15


@dataclass(frozen=True)
class Schedule:
    """An immutable (alpha_t, beta_t) pair tagged with its variant."""

    variant: str
    gamma: float | None = None
    p: float | None = None
    lipschitz_K: float | None = None
    const_alpha: float | None = None

    def __post_init__(self):
        if self.variant == ANCHORED_NEW:
            if self.gamma is None or self.gamma < 2:
                raise UsageError("anchored-new requires gamma >= 2")
            if self.lipschitz_K is None or self.lipschitz_K <= 0:
                raise UsageError("anchored-new requires lipschitz_K > 0")
        elif self.variant == ANCHORED_RYU:
            if self.gamma is None or self.gamma < 2:
                raise UsageError("anchored-ryu requires gamma >= 2")
            if self.p is None or not (0.5 < self.p < 1.0):
                raise UsageError("anchored-ryu requires p in (1/2, 1)")
            if (1.0 - self.p) * self.gamma > 1.0:
                # beta_0 > 1: overshoot past the anchor on the first step
                warnings.warn(
                    f"anchored-ryu with (1-p)*gamma = "
                    f"{(1 - self.p) * self.gamma:.3f} > 1 gives beta_0 > 1",
                    stacklevel=2,
                )
        elif self.variant == PLAIN_GDA:
            if self.const_alpha is None or self.const_alpha <= 0:
                raise UsageError("plain-gda requires const_alpha > 0")
        else:
            raise UsageError(f"unknown schedule variant {self.variant!r}")

    def describe(self) -> str:
        """Canonical schedule string (round-trips through parse_schedule)."""
        if self.variant == ANCHORED_NEW:
            return f"anchored-new:gamma={self.gamma:g}"
        if self.variant == ANCHORED_RYU:
            return f"anchored-ryu:p={self.p:g},gamma={self.gamma:g}"
        return f"plain-gda:alpha={self.const_alpha:g}"


@dataclass(frozen=True)
class DifferenceCoefficients:
    """Exact coefficients of the difference recurrence at step t."""

    A: float
    E_err: float
    contraction: float  # sqrt(A^2 + alpha_{t+1}^2 K^2)
    t: int


def _as_float(t):
    # keep caller-supplied float dtypes (e.g. longdouble) for the
    # extended-precision identity checks
    t = np.asarray(t)
    return t if t.dtype.kind == "f" else t.astype(float)


def alpha(schedule: Schedule, t):
    """Step size alpha_t; accepts a scalar or an integer array."""
    t = _as_float(t)
    if np.any(t < 0):
        raise UsageError("iteration index must be >= 0")
    if schedule.variant == ANCHORED_NEW:
        out = 1.0 / (schedule.lipschitz_K * np.sqrt(t + schedule.gamma))
    elif schedule.variant == ANCHORED_RYU:
        out = (1.0 - schedule.p) / (t + 1.0) ** schedule.p
    else:
        out = np.full_like(t, schedule.const_alpha)
    return out if out.ndim else out[()]


def beta(schedule: Schedule, t):
    """Anchoring coefficient beta_t; accepts a scalar or an integer array."""
    t = _as_float(t)
    if np.any(t < 0):
        raise UsageError("iteration index must be >= 0")
    if schedule.variant == ANCHORED_NEW:
        out = schedule.gamma / (t + schedule.gamma)
    elif schedule.variant == ANCHORED_RYU:
        out = (1.0 - schedule.p) * schedule.gamma / (t + 1.0)
    else:
        out = np.zeros_like(t)
    return out if out.ndim else out[()]


def _coefficient_arrays(schedule: Schedule, t, K: float):
    """Vectorized (A, E_err, contraction) over an array of indices."""
    t = np.asarray(t, dtype=float)
    a_t = alpha(schedule, t)
    a_next = alpha(schedule, t + 1)
    b_t = beta(schedule, t)
    b_next = beta(schedule, t + 1)
    ratio = (a_t - a_next) / a_t
    A = 1.0 - b_next - ratio
    E_err = ratio * b_t + b_next - b_t
    contraction = np.sqrt(A * A + (a_next * K) ** 2)
    return A, E_err, contraction


def _resolve_K(schedule: Schedule, K: float | None) -> float:
    if schedule.variant == ANCHORED_NEW:
        return schedule.lipschitz_K
    if K is None:
        raise UsageError("anchored-ryu coefficients need an explicit K")
    return float(K)


def difference_coefficients(schedule: Schedule, t: int,
                            K: float | None = None) -> DifferenceCoefficients:
    """Exact A, E_err, and contraction factor at step t.

    K is taken from the schedule for anchored-new and must be supplied by
    the caller for anchored-ryu.
    """
    if schedule.variant == PLAIN_GDA:
        raise UsageError("plain-gda has no difference coefficients")
    if t < 0:
        raise UsageError("iteration index must be >= 0")
    K = _resolve_K(schedule, K)
    A, E_err, contraction = _coefficient_arrays(schedule, t, K)
    return DifferenceCoefficients(float(A), float(E_err), float(contraction), t)


_SCAN_CHUNK = 1_000_000


def _scan_margin(schedule: Schedule, t_max: int, margin_fn) -> CheckResult:
    if schedule.variant != ANCHORED_NEW:
        raise UsageError("scan checks require a anchored-new schedule")
    if t_max < 1:
        raise UsageError("t_max must be >= 1")
    worst = np.inf
    worst_t = 1
    for start in range(1, t_max + 1, _SCAN_CHUNK):
        t = np.arange(start, min(start + _SCAN_CHUNK, t_max + 1))
        margins = margin_fn(t)
        i = int(np.argmin(margins))
        if margins[i] < worst:
            worst = float(margins[i])
            worst_t = int(t[i])
    return CheckResult(
        name=margin_fn.__name__.lstrip("_"),
        passed=worst >= 0.0,
        worst_margin=worst,
        worst_t=worst_t,
        detail=f"scanned t in [1, {t_max}], gamma={schedule.gamma:g}",
    )


def check_contraction_bound(schedule: Schedule, t_max: int,
                            bound_numerator: float = CONTRACTION_NUMERATOR,
                            ) -> CheckResult:
    """Scan t in [1, t_max]: contraction(t) <= 1 - 1.15/(t+1+gamma)?

    Returns the minimum margin (bound minus contraction) and where it
    occurs; passes iff the margin never goes negative.
    """
    K = schedule.lipschitz_K if schedule.variant == ANCHORED_NEW else None

    def contraction_bound(t):
        _, _, contraction = _coefficient_arrays(schedule, t, K)
        return (1.0 - bound_numerator / (t + 1 + schedule.gamma)) - contraction

    return _scan_margin(schedule, t_max, contraction_bound)


def check_error_coefficient_bound(schedule: Schedule, t_max: int) -> CheckResult:
    """Scan t in [1, t_max]: |E_err(t)| <= gamma/(t+gamma)^2?"""
    K = schedule.lipschitz_K if schedule.variant == ANCHORED_NEW else None

    def error_coefficient_bound(t):
        _, E_err, _ = _coefficient_arrays(schedule, t, K)
        return schedule.gamma / (t + schedule.gamma) ** 2 - np.abs(E_err)

    return _scan_margin(schedule, t_max, error_coefficient_bound)


def asymptotic_residuals(schedule: Schedule, t: int) -> tuple[float, float]:
    """Residuals of the large-t expansions of the contraction and E_err.

    r1 = |contraction(t) - (1 - gamma/(t+gamma))|
    r2 = |E_err(t) + gamma/(2(t+gamma)^2) - 5 gamma/(8(t+gamma)^3)|

    r1*(t+gamma)^2 and r2*(t+gamma)^4 should stay bounded as t grows.
    """
    if schedule.variant != ANCHORED_NEW:
        raise UsageError("asymptotic residuals require an anchored-new schedule")
    if t < 1:
        raise UsageError("t must be >= 1")
    c = difference_coefficients(schedule, t)
    g = schedule.gamma
    r1 = abs(c.contraction - (1.0 - g / (t + g)))
    r2 = abs(c.E_err + g / (2.0 * (t + g) ** 2) - 5.0 * g / (8.0 * (t + g) ** 3))
    return r1, r2


def parse_schedule(text: str, lipschitz_K: float | None = None) -> Schedule:
    """Parse a schedule string like ``anchored-new:gamma=2``.

    Grammar: ``anchored-new:gamma=G``, ``anchored-ryu:p=P,gamma=G``,
    ``plain-gda:alpha=A``. K is injected from the problem, never parsed.
    """
    variant, _, params_text = text.strip().partition(":")
    params = {}
    if params_text:
        for item in params_text.split(","):
            key, _, value = item.partition("=")
            if not value:
                raise UsageError(f"bad schedule parameter {item!r} in {text!r}")
            try:
                params[key.strip()] = float(value)
            except ValueError:
                raise UsageError(f"bad schedule parameter {item!r} in {text!r}")
    try:
        if variant == ANCHORED_NEW:
            if lipschitz_K is None:
                raise UsageError("anchored-new schedule needs the problem's K")
            return Schedule(ANCHORED_NEW, gamma=params.pop("gamma"),
                            lipschitz_K=lipschitz_K, **_none_left(params))
        if variant == ANCHORED_RYU:
            return Schedule(ANCHORED_RYU, p=params.pop("p"),
                            gamma=params.pop("gamma"), **_none_left(params))
        if variant == PLAIN_GDA:
            return Schedule(PLAIN_GDA, const_alpha=params.pop("alpha"),
                            **_none_left(params))
    except KeyError as exc:
        raise UsageError(f"schedule {text!r} is missing parameter {exc}")
    raise UsageError(f"unknown schedule variant {variant!r}")


def _none_left(params: dict) -> dict:
    if params:
        raise UsageError(f"unexpected schedule parameters {sorted(params)}")
    return {}
