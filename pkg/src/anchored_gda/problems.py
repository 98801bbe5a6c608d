"""Built-in saddle-point problem families.

Two families with closed-form gradient operators and a known saddle point
at the origin:

* ``bilinear``:          L(x, y) = x^T A y
* ``quadratic-saddle``:  L(x, y) = 1/2 x^T P x + x^T A y - 1/2 y^T Q y

Both operators are linear, G(z) = M z, so the tight Lipschitz constant is
the largest singular value of M.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError, UsageError

# saddle residual must satisfy ||G(z*)|| <= SADDLE_TOL * max(1, K ||z*||)
SADDLE_TOL = 1e-12
PSD_TOL = 1e-10
LIPSCHITZ_REL_TOL = 1e-9


@dataclass(frozen=True)
class Point:
    """A point z = (x, y) in R^n x R^m, stored as one flat vector."""

    coords: np.ndarray
    split: int  # index separating the x-block from the y-block

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        object.__setattr__(self, "coords", coords)
        if coords.ndim != 1:
            raise UsageError("Point coords must be a 1-D vector")
        if not (1 <= self.split < coords.size):
            raise UsageError(
                f"split index {self.split} must leave non-empty x and y blocks "
                f"(length {coords.size})"
            )
        if not np.all(np.isfinite(coords)):
            raise UsageError("Point coords must be finite")

    @property
    def x(self) -> np.ndarray:
        return self.coords[: self.split]

    @property
    def y(self) -> np.ndarray:
        return self.coords[self.split:]


def as_vector(z, dim: int | None = None) -> np.ndarray:
    """Coerce a Point or array-like to a flat float vector."""
    v = z.coords if isinstance(z, Point) else np.asarray(z, dtype=float)
    if v.ndim != 1:
        raise UsageError("expected a 1-D vector")
    if dim is not None and v.size != dim:
        raise UsageError(f"dimension mismatch: expected {dim}, got {v.size}")
    return v


@dataclass(frozen=True)
class ProblemSpec:
    """A monotone saddle-point problem with known constants.

    ``lipschitz_K`` is the declared smoothness constant; construction
    verifies it is at least the operator's largest singular value.
    ``saddle`` is a point with G(saddle) ~ 0.
    """

    kind: str  # "bilinear" | "quadratic-saddle"
    n: int
    m: int
    A: np.ndarray
    lipschitz_K: float
    saddle: np.ndarray
    P: np.ndarray | None = None
    Q: np.ndarray | None = None
    name: str = ""
    seed: int | None = None  # seed used to build random matrices, if any

    def __post_init__(self):
        if self.kind not in ("bilinear", "quadratic-saddle"):
            raise UsageError(f"unknown problem kind {self.kind!r}")
        if self.n < 1 or self.m < 1:
            raise UsageError("dimensions n, m must be >= 1")
        A = np.asarray(self.A, dtype=float)
        if A.shape != (self.n, self.m):
            raise UsageError(f"A must be {self.n}x{self.m}, got {A.shape}")
        object.__setattr__(self, "A", A)
        for attr, dim in (("P", self.n), ("Q", self.m)):
            mat = getattr(self, attr)
            if self.kind == "bilinear":
                if mat is not None:
                    raise UsageError(f"{attr} is only valid for quadratic-saddle")
                continue
            mat = np.zeros((dim, dim)) if mat is None else np.asarray(mat, dtype=float)
            if mat.shape != (dim, dim):
                raise UsageError(f"{attr} must be {dim}x{dim}, got {mat.shape}")
            if not np.allclose(mat, mat.T, atol=1e-12):
                raise UsageError(f"{attr} must be symmetric")
            if np.linalg.eigvalsh(mat).min() < -PSD_TOL:
                raise UsageError(f"{attr} must be positive semidefinite")
            object.__setattr__(self, attr, mat)
        saddle = as_vector(self.saddle, self.dim)
        object.__setattr__(self, "saddle", saddle)
        K = float(self.lipschitz_K)
        if K <= 0.0:
            raise UsageError("lipschitz_K must be positive")
        object.__setattr__(self, "lipschitz_K", K)
        sigma_max = float(np.linalg.norm(operator_matrix(self), ord=2))
        if K < sigma_max * (1.0 - LIPSCHITZ_REL_TOL):
            raise UsageError(
                f"declared lipschitz_K={K} is below the operator norm {sigma_max}"
            )
        gnorm = float(np.linalg.norm(operator_matrix(self) @ saddle))
        if gnorm > SADDLE_TOL * max(1.0, K * float(np.linalg.norm(saddle))):
            raise UsageError(f"saddle is not a zero of G: ||G(saddle)|| = {gnorm}")

    @property
    def dim(self) -> int:
        return self.n + self.m

    def point(self, coords) -> Point:
        return Point(as_vector(coords, self.dim), self.n)


@dataclass(frozen=True)
class AssumptionReport:
    """Sampled witness of monotonicity and Lipschitz continuity."""

    min_monotone_inner_product: float
    max_lipschitz_ratio: float
    samples_used: int
    passed: bool


def _assemble(A, P, Q) -> np.ndarray:
    n, m = A.shape
    M = np.zeros((n + m, n + m))
    M[:n, n:] = A
    M[n:, :n] = -A.T
    if P is not None:
        M[:n, :n] = P
    if Q is not None:
        M[n:, n:] = Q
    return M


def operator_matrix(problem: ProblemSpec) -> np.ndarray:
    """The matrix M with G(z) = M z for the built-in linear families."""
    return _assemble(problem.A, problem.P, problem.Q)


def eval_operator(problem: ProblemSpec, z) -> np.ndarray:
    """Evaluate G(z) = (grad_x L, -grad_y L) at z."""
    v = as_vector(z, problem.dim)
    if not np.all(np.isfinite(v)):
        raise NumericError("eval_operator: non-finite input")
    return operator_matrix(problem) @ v


def _sigma_max(M: np.ndarray, rel_tol: float = 1e-10,
               max_iters: int = 100_000) -> float:
    """Largest singular value of M by power iteration on M^T M."""
    MtM = M.T @ M
    rng = np.random.default_rng(0)
    v = rng.standard_normal(M.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iters):
        w = MtM @ v
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:  # M is the zero operator
            return 0.0
        lam_new = float(v @ w)
        v = w / norm_w
        if abs(lam_new - lam) <= rel_tol * max(abs(lam_new), 1e-300):
            return float(np.sqrt(lam_new))
        lam = lam_new
    raise NumericError(
        f"power iteration did not converge in {max_iters} iterations"
    )


def exact_lipschitz(problem: ProblemSpec, rel_tol: float = 1e-10,
                    max_iters: int = 100_000) -> float:
    """Tight Lipschitz constant: largest singular value of M.

    Power iteration on M^T M; converges when the Rayleigh quotient is
    stable to ``rel_tol``.
    """
    return _sigma_max(operator_matrix(problem), rel_tol, max_iters)


def validate_assumptions(problem: ProblemSpec, sample_count: int,
                         radius: float, seed: int,
                         tol_mono: float = 1e-10,
                         tol_lip: float = 1e-9,
                         lipschitz_K: float | None = None) -> AssumptionReport:
    """Sample pairs in a ball around the origin and witness the assumptions.

    Records the worst monotonicity inner product <G(z)-G(w), z-w> and the
    worst Lipschitz ratio ||G(z)-G(w)|| / (K ||z-w||) over ``sample_count``
    pairs. Deterministic for a fixed seed. ``lipschitz_K`` overrides the
    problem's constant, letting callers probe a wrongly declared K (a
    too-small K makes the ratio exceed 1 and the report fail).
    """
    if sample_count < 1:
        raise UsageError("sample_count must be >= 1")
    if radius <= 0:
        raise UsageError("radius must be positive")
    K = problem.lipschitz_K if lipschitz_K is None else float(lipschitz_K)
    rng = np.random.default_rng(seed)
    M = operator_matrix(problem)
    d = problem.dim
    min_inner = np.inf
    max_ratio = 0.0
    used = 0
    for _ in range(sample_count):
        pair = rng.standard_normal((2, d))
        pair /= np.linalg.norm(pair, axis=1, keepdims=True)
        pair *= radius * rng.random(2)[:, None] ** (1.0 / d)
        z, w = pair
        dz = z - w
        dist = np.linalg.norm(dz)
        if dist < 1e-14:
            continue
        dg = M @ dz  # G(z) - G(w), exact by linearity
        min_inner = min(min_inner, float(dg @ dz))
        max_ratio = max(max_ratio, float(np.linalg.norm(dg)) / (K * dist))
        used += 1
    passed = (min_inner >= -tol_mono) and (max_ratio <= 1.0 + tol_lip)
    return AssumptionReport(min_inner, max_ratio, used, passed)


# ---------------------------------------------------------------------------
# built-in problem suite


def bilinear(A, name: str = "", seed: int | None = None) -> ProblemSpec:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n, m = A.shape
    K = _sigma_max(_assemble(A, None, None))
    return ProblemSpec(kind="bilinear", n=n, m=m, A=A, lipschitz_K=K,
                       saddle=np.zeros(n + m), name=name or "bilinear",
                       seed=seed)


def quadratic_saddle(P, Q, A, name: str = "",
                     seed: int | None = None) -> ProblemSpec:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    n, m = A.shape
    K = _sigma_max(_assemble(A, P, Q))
    return ProblemSpec(kind="quadratic-saddle", n=n, m=m, A=A, P=P, Q=Q,
                       lipschitz_K=K, saddle=np.zeros(n + m),
                       name=name or "quadratic-saddle", seed=seed)


def bilinear_2d() -> ProblemSpec:
    """The canonical skew example: n = m = 1, A = [1], K = 1."""
    return bilinear([[1.0]], name="bilinear-2d")


def bilinear_10d(seed: int = 7) -> ProblemSpec:
    """10-dimensional bilinear game with a random orthogonal coupling."""
    rng = np.random.default_rng(seed)
    A, _ = np.linalg.qr(rng.standard_normal((5, 5)))
    return bilinear(A, name=f"bilinear-10d-seed{seed}", seed=seed)


def quadratic_saddle_10d(seed: int = 11) -> ProblemSpec:
    """Strongly monotone family: P = Q = 0.1 I, seeded Gaussian coupling."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((5, 5)) / np.sqrt(5.0)
    return quadratic_saddle(0.1 * np.eye(5), 0.1 * np.eye(5), A,
                            name=f"quadratic-saddle-10d-seed{seed}", seed=seed)


BUILTIN_PROBLEMS = {
    "bilinear-2d": bilinear_2d,
    "bilinear-10d": bilinear_10d,
    "quadratic-saddle-10d": quadratic_saddle_10d,
}
