"""Convex hulls, intrinsic volumes and Poisson polytope functionals."""

from .bodies import ConvexBodySpec, sample_model
from .hull import SimplicialHull, convex_hull
from .intrinsic import (ExternalAngleEstimate, cauchy_kubota, exact_intrinsic_volumes, external_angle,
                        intrinsic_volume, intrinsic_volumes)
from .polytopes import (CertificateReport, PolytopeFunctional, polytope_proxy_certificates,
                        run_polytope_concentration, zeta_content)

__all__ = [
    "ConvexBodySpec",
    "sample_model",
    "SimplicialHull",
    "convex_hull",
    "ExternalAngleEstimate",
    "cauchy_kubota",
    "exact_intrinsic_volumes",
    "external_angle",
    "intrinsic_volume",
    "intrinsic_volumes",
    "CertificateReport",
    "PolytopeFunctional",
    "polytope_proxy_certificates",
    "run_polytope_concentration",
    "zeta_content",
]
