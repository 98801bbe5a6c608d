"""Anchored gradient descent ascent for smooth convex-concave min-max
problems, with numerical verification of its O(1/t) last-iterate rate."""

from .errors import (AnchoredGDAError, DataError, DegenerateFitError,
                     DivergenceError, NumericError, UsageError)
from .problems import (AssumptionReport, Point, ProblemSpec, bilinear,
                       bilinear_2d, bilinear_10d, eval_operator,
                       exact_lipschitz, quadratic_saddle,
                       quadratic_saddle_10d, validate_assumptions,
                       BUILTIN_PROBLEMS)
from .report import CheckResult, all_passed
from .schedules import (DifferenceCoefficients, Schedule, alpha,
                        asymptotic_residuals, beta, check_contraction_bound,
                        check_error_coefficient_bound,
                        difference_coefficients, parse_schedule)
from .solver import IterateState, reconstruct_gradient_norm, run, step
from .trace import Trace, TraceRow, read_csv, write_csv
from .verify import (Constants, RateFit, check_bounded_iterates,
                     check_diff_contraction, check_difference_identity,
                     check_last_iterate_rate, check_one_step,
                     compute_constants, fit_rate, verification_report)

__version__ = "0.1.0"


def __getattr__(name):
    # AnchoredGDA pulls in scikit-learn; import it only when asked for
    if name == "AnchoredGDA":
        from .estimator import AnchoredGDA
        return AnchoredGDA
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
