"""scikit-learn style wrapper around the solver loop."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from . import solver
from .problems import ProblemSpec, as_vector
from .schedules import parse_schedule


class AnchoredGDA(BaseEstimator):
    """Anchored gradient descent ascent as a fit-style estimator.

    Parameters
    ----------
    schedule : str
        Schedule string, e.g. ``"anchored-new:gamma=2"``; the Lipschitz
        constant is taken from the problem at fit time.
    max_iter : int
        Horizon T.
    record_every : int
        Trace recording stride.

    After ``fit(problem, z0)`` the fitted attributes are ``trace_``,
    ``z_final_``, ``schedule_`` and ``n_iter_``.
    """

    def __init__(self, schedule: str = "anchored-new:gamma=2",
                 max_iter: int = 1000, record_every: int = 1):
        self.schedule = schedule
        self.max_iter = max_iter
        self.record_every = record_every

    def fit(self, problem: ProblemSpec, z0=None) -> "AnchoredGDA":
        z0 = np.ones(problem.dim) if z0 is None else as_vector(z0, problem.dim)
        self.schedule_ = parse_schedule(self.schedule, problem.lipschitz_K)
        self.trace_ = solver.run(problem, self.schedule_, z0, self.max_iter,
                                 record_every=self.record_every)
        self.z_final_ = self.trace_.iterates[self.max_iter]
        self.n_iter_ = self.max_iter
        return self

    def predict(self, problem: ProblemSpec) -> np.ndarray:
        """The approximate saddle point found by the last fit."""
        if not hasattr(self, "z_final_"):
            raise RuntimeError("call fit before predict")
        return self.z_final_
