"""Phi-entropies and the Sobolev-type inequality family on Poisson space.

The checks here run on the one-point exact engine
(:class:`~poisson_concentration.onepoint.DiscretePoissonModel`), where the
intensity integral is ``lam`` times a single add-one term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .onepoint import DiscretePoissonModel, InequalityReport


@dataclass(frozen=True)
class PhiFunction:
    kind: str
    value: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray], np.ndarray]
    second_derivative: Callable[[np.ndarray], np.ndarray]
    r: Optional[float] = None
    requires_nonnegative: bool = True

    def in_class(self, grid=None, tol: float = 1e-9) -> bool:
        """Numerical membership test: convex, and ``1/phi''`` concave on a grid."""
        if self.kind == "affine":
            return True
        x = np.linspace(0.05, 20.0, 400) if grid is None else np.asarray(grid, dtype=float)
        second = self.second_derivative(x)
        if np.any(second <= 0):
            return False
        inv = 1.0 / second
        # second differences of a concave function on a uniform grid are <= 0
        h = np.diff(x)
        if not np.allclose(h, h[0]):
            raise ValueError("concavity check needs a uniform grid")
        curvature = inv[2:] - 2 * inv[1:-1] + inv[:-2]
        return bool(np.all(curvature <= tol * np.maximum(1.0, np.abs(inv[1:-1]))))


def _xlogx(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)


def _log_derivative(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.log(x) + 1.0


def phi_log() -> PhiFunction:
    """``x log x`` with value 0 at 0; its derivative is ``-inf`` at 0."""
    return PhiFunction(
        kind="phi_log",
        value=_xlogx,
        derivative=_log_derivative,
        second_derivative=lambda x: 1.0 / np.asarray(x, dtype=float),
    )


def phi_r(r: float) -> PhiFunction:
    """``x^(2/r)`` for ``r`` in (1, 2); the derivative at 0 is taken to be 0."""
    if not 1.0 < r < 2.0:
        raise ValueError(f"phi_r needs r in (1, 2), got {r!r}")
    q = 2.0 / r

    def derivative(x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, q * np.power(np.where(x > 0, x, 1.0), q - 1.0), 0.0)

    return PhiFunction(
        kind="phi_r",
        value=lambda x: np.power(np.asarray(x, dtype=float), q),
        derivative=derivative,
        second_derivative=lambda x: q * (q - 1.0) * np.power(np.asarray(x, dtype=float), q - 2.0),
        r=r,
    )


def phi_affine(a: float, b: float = 0.0) -> PhiFunction:
    return PhiFunction(
        kind="affine",
        value=lambda x: a * np.asarray(x, dtype=float) + b,
        derivative=lambda x: np.full_like(np.asarray(x, dtype=float), a),
        second_derivative=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        requires_nonnegative=False,
    )


@dataclass
class EntropyEstimate:
    value: float
    se: float = 0.0
    n: Optional[int] = None


def _check_sign(values: np.ndarray, phi: PhiFunction):
    if phi.requires_nonnegative and np.any(values < 0):
        raise ValueError(f"{phi.kind} entropy needs F >= 0; got min {values.min()!r}")


def phi_entropy(dist: Union[DiscretePoissonModel, np.ndarray, list], phi: PhiFunction) -> EntropyEstimate:
    """``E[phi(F)] - phi(E[F])``.

    For a :class:`DiscretePoissonModel` the truncated series is exact (SE 0).
    For a sample the plug-in estimate is returned with a jackknife SE.
    """
    if isinstance(dist, DiscretePoissonModel):
        dist.check_truncation()
        vals = dist.values()[: dist.K + 1]
        _check_sign(vals, phi)
        value = dist.expect(phi.value(vals)) - float(phi.value(dist.mean()))
        return EntropyEstimate(value)

    x = np.asarray(dist, dtype=float).ravel()
    _check_sign(x, phi)
    n = x.size
    if n < 2:
        raise ValueError("need at least two samples")
    phix = phi.value(x)
    value = float(phix.mean() - phi.value(x.mean()))
    loo_mean = (x.sum() - x) / (n - 1)
    loo_phi = (phix.sum() - phix) / (n - 1)
    theta = loo_phi - phi.value(loo_mean)
    se = math.sqrt((n - 1) / n * float(np.sum((theta - theta.mean()) ** 2)))
    return EntropyEstimate(value, se, n)


def _bregman_terms(model: DiscretePoissonModel, phi: PhiFunction) -> np.ndarray:
    """``phi(f(k+1)) - phi(f(k)) - phi'(f(k)) (f(k+1) - f(k))`` on ``0..K``.

    Where ``phi'(f(k))`` is infinite the term is infinite unless the increment
    vanishes, in which case it is 0.
    """
    v = model.values()
    a, b = v[1:], v[:-1]
    diff = a - b
    deriv = phi.derivative(b)
    with np.errstate(invalid="ignore"):
        cross = np.where(diff == 0.0, 0.0, deriv * diff)
    return phi.value(a) - phi.value(b) - cross


def check_phi_sobolev(model: DiscretePoissonModel, phi: PhiFunction,
                      name: Optional[str] = None) -> InequalityReport:
    """Modified phi-Sobolev inequality on the one-point space."""
    model.check_truncation()
    _check_sign(model.values(), phi)
    lhs = phi_entropy(model, phi).value
    terms = _bregman_terms(model, phi)
    rhs = model.lam * model.expect(terms)
    details = {"lam": model.lam, "f": model.label, "K": model.K, "phi": phi.kind, "r": phi.r}
    if math.isinf(rhs):
        details["vacuous"] = True
    return InequalityReport(name or f"phi-sobolev[{phi.kind}]", lhs, rhs, details=details)


def check_log_sobolev(model: DiscretePoissonModel) -> InequalityReport:
    """Modified log-Sobolev inequality.

    A sequence with ``f(k) = 0 < f(k+1)`` for some ``k`` has an infinite
    right-hand side; the report is then marked ``vacuous``.
    """
    return check_phi_sobolev(model, phi_log(), name="log-sobolev")


def check_phi_r_sobolev(model: DiscretePoissonModel, r: float) -> InequalityReport:
    return check_phi_sobolev(model, phi_r(r), name=f"phi_r-sobolev[r={r:g}]")


def beckner_rhs_terms(model: DiscretePoissonModel, r: float) -> np.ndarray:
    """``(f(k+1) - f(k)) (f(k+1)^(2/r-1) - f(k)^(2/r-1))`` on ``0..K``."""
    v = model.values()
    q = 2.0 / r - 1.0
    powered = np.power(v, q)
    return (v[1:] - v[:-1]) * (powered[1:] - powered[:-1])


def check_beckner(model: DiscretePoissonModel, r: float) -> InequalityReport:
    """Beckner-type inequality ``Ent_r(F) <= (6/r) E int (D F)(D F^(2/r - 1))``."""
    if not 1.0 < r < 2.0:
        raise ValueError(f"r must lie in (1, 2), got {r!r}")
    model.check_truncation()
    phi = phi_r(r)
    _check_sign(model.values(), phi)
    lhs = phi_entropy(model, phi).value
    rhs = 6.0 / r * model.lam * model.expect(beckner_rhs_terms(model, r))
    return InequalityReport(f"beckner[r={r:g}]", lhs, rhs,
                            details={"lam": model.lam, "f": model.label, "r": r, "K": model.K})


def psi_nonneg(a: float, b: float, p: float) -> float:
    """``(3p-1)a^p + (2p+1)b^p - 2p a b^(p-1) - 3p b a^(p-1)``; non-negative for a, b >= 0."""
    if not 1.0 < p <= 2.0:
        raise ValueError(f"p must lie in (1, 2], got {p!r}")
    if a < 0 or b < 0:
        raise ValueError("a and b must be non-negative")
    return ((3 * p - 1) * a ** p + (2 * p + 1) * b ** p
            - 2 * p * a * b ** (p - 1) - 3 * p * b * a ** (p - 1))


def pointwise_sobolev_vs_beckner(a, b, p):
    """Return ``(sobolev_integrand, beckner_integrand)`` with ``p = 2/r``.

    The first is ``a^p - b^p - p b^(p-1)(a-b)``; the second is
    ``3p (a^p + b^p - a b^(p-1) - b a^(p-1))``, which is ``(6/r)`` times
    ``(a - b)(a^(p-1) - b^(p-1))``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    left = a ** p - b ** p - p * b ** (p - 1) * (a - b)
    right = 3 * p * (a ** p + b ** p - a * b ** (p - 1) - b * a ** (p - 1))
    return left, right


def log_entropy_limit(model: DiscretePoissonModel, r: float) -> tuple[float, float]:
    """``((1 - r/2)^-1 Ent_r(F), Ent(F))``; the first tends to the second as r -> 2."""
    ent_r = phi_entropy(model, phi_r(r)).value
    ent = phi_entropy(model, phi_log()).value
    return ent_r / (1.0 - r / 2.0), ent
