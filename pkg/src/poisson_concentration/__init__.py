"""Concentration of Poisson functionals: difference operators, variance proxies,
Phi-entropy inequalities, moment and tail bounds, and two geometric applications
(Poisson polytopes and Poisson cylinder models)."""

from .bounds import (C_ONE_SIDED, C_TWO_SIDED, KAPPA, T_MIN, BoundSpec, TailReport, kappa_p,
                     moment_bound, tail_bound, verify_tail)
from .calculus import (Functional, VarianceProxies, add_one_diff, check_product_rule,
                       estimate_variance_proxies, remove_one_diff)
from .errors import (CertificateError, ConfigurationError, DimensionError, EvaluationError,
                     OutOfRangeError, TruncationError)
from .onepoint import DiscretePoissonModel, InequalityReport
from .poisson import (IntensitySpec, Point, PointConfiguration, add_point, check_mecke,
                      remove_point, sample_poisson)
from .streams import RandomStream

__version__ = "0.1.0"

__all__ = [
    "C_ONE_SIDED",
    "C_TWO_SIDED",
    "KAPPA",
    "T_MIN",
    "BoundSpec",
    "TailReport",
    "kappa_p",
    "moment_bound",
    "tail_bound",
    "verify_tail",
    "Functional",
    "VarianceProxies",
    "add_one_diff",
    "check_product_rule",
    "estimate_variance_proxies",
    "remove_one_diff",
    "CertificateError",
    "ConfigurationError",
    "DimensionError",
    "EvaluationError",
    "OutOfRangeError",
    "TruncationError",
    "DiscretePoissonModel",
    "InequalityReport",
    "IntensitySpec",
    "Point",
    "PointConfiguration",
    "add_point",
    "check_mecke",
    "remove_point",
    "sample_poisson",
    "RandomStream",
]
