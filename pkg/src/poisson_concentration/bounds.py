"""Moment and tail bounds driven by the variance proxies, and their harnesses."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import stats

from .errors import ConfigurationError, OutOfRangeError
from .onepoint import DiscretePoissonModel, InequalityReport
from .streams import RandomStream, as_generator, map_replications

KAPPA = math.sqrt(math.e) / (2.0 * (math.sqrt(math.e) - 1.0))
C_ONE_SIDED = math.log(2.0) / (8.0 * KAPPA)
C_TWO_SIDED = math.log(2.0) / (16.0 * KAPPA)
T_MIN = 4.0 * math.sqrt(KAPPA)

UNVERIFIED_CONSTANT_NOTE = "unverified constant: C_self is an absolute constant left unspecified"


def kappa_p(p: float) -> float:
    """``1 / (2 (1 - (1 - 1/p)^(p/2)))`` for ``p > 1``."""
    if not p > 1.0:
        raise ValueError(f"kappa_p needs p > 1, got {p!r}")
    if math.isinf(p):
        return KAPPA
    return 0.5 / -math.expm1(0.5 * p * math.log1p(-1.0 / p))


def concentration_constant(two_sided: bool = False) -> float:
    """``log 2 / (8 kappa)``, or ``log 2 / (16 kappa)`` for the two-sided bound."""
    return C_TWO_SIDED if two_sided else C_ONE_SIDED


def tail_threshold() -> float:
    """Smallest ``t`` at which the one-sided tail bounds are asserted: ``4 sqrt(kappa)``."""
    return T_MIN


def _pnorm(values: np.ndarray, weights: np.ndarray, p: float) -> float:
    return float(np.dot(weights, np.abs(values) ** p)) ** (1.0 / p)


def recursive_lp_check(model: DiscretePoissonModel, p: float) -> InequalityReport:
    """Recursive estimate for the positive part of ``F - E F``.

    ``||X||_p^p <= ||X||_{p-1}^p + (p-1) ||V+||_{p/2} ||X||_p^(p-2)`` with
    ``X = (F - E F)_+``, all terms exact on the one-point space.
    """
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p!r}")
    model.check_truncation()
    w = model.pmf()
    x = np.maximum(model.values()[: model.K + 1] - model.mean(), 0.0)
    v_plus = model.proxies()["plus"]
    m_p = float(np.dot(w, x ** p))                       # ||X||_p^p
    m_pm1 = float(np.dot(w, x ** (p - 1)))               # ||X||_{p-1}^{p-1}
    norm_pm1_pow_p = m_pm1 ** (p / (p - 1))
    v_norm = _pnorm(v_plus, w, p / 2)
    tail_factor = m_p ** ((p - 2) / p) if p > 2 else 1.0
    rhs = norm_pm1_pow_p + (p - 1) * v_norm * tail_factor
    return InequalityReport(
        f"recursive-lp[p={p:g}]", m_p, rhs,
        details={
            "lam": model.lam, "f": model.label, "p": p,
            "norm_p": m_p ** (1 / p), "norm_p_minus_1": m_pm1 ** (1 / (p - 1)) if m_pm1 > 0 else 0.0,
            "v_plus_norm": v_norm,
            # Ent_{2-2/p} of (F - E F)_+^(p-1)
            "entropy": m_p - norm_pm1_pow_p,
        },
    )


_MOMENT_KINDS = {"plus": 2.0, "minus": 2.0, "two_sided": 8.0,
                 "moment_plus": 2.0, "moment_minus": 2.0, "moment_two_sided": 8.0}


def moment_bound(p: float, v_norm: float, kind: str = "plus") -> float:
    """``sqrt(2 kappa p v_norm)`` (one-sided) or ``sqrt(8 kappa p v_norm)`` (two-sided)."""
    if kind not in _MOMENT_KINDS:
        raise ValueError(f"unknown moment bound kind {kind!r}")
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p!r}")
    if v_norm < 0:
        raise ValueError("v_norm must be non-negative")
    return math.sqrt(_MOMENT_KINDS[kind] * KAPPA * p * v_norm)


def sharper_moment_bound(p: float, v_norm: float) -> float:
    """``sqrt((1 - 1/p) 2 kappa_p p v_norm)``, the form proved by induction."""
    return math.sqrt((1 - 1 / p) * 2 * kappa_p(max(p, 2.0)) * p * v_norm)


def verify_moment_bound(model: DiscretePoissonModel, p: float) -> dict[str, InequalityReport]:
    """Exact check of the three moment bounds at order ``p``."""
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p!r}")
    model.check_truncation()
    w = model.pmf()
    centred = model.values()[: model.K + 1] - model.mean()
    proxies = model.proxies()
    parts = {
        "plus": (np.maximum(centred, 0.0), proxies["plus"]),
        "minus": (np.minimum(centred, 0.0), proxies["minus"]),
        "two_sided": (centred, proxies["total"]),
    }
    out = {}
    for kind, (dev, proxy) in parts.items():
        v_norm = _pnorm(proxy, w, p / 2)
        lhs = _pnorm(dev, w, p)
        details = {"lam": model.lam, "f": model.label, "p": p, "v_norm": v_norm}
        if kind == "plus":
            details["sharper_bound"] = sharper_moment_bound(p, v_norm)
        out[kind] = InequalityReport(f"moment-{kind}[p={p:g}]", lhs,
                                     moment_bound(p, v_norm, kind), details=details)
    return out


def self_bounding_moment_bound(p: float, c_sb: float, alpha: float, mean_F: float) -> float:
    """``2 sqrt(2 c kappa p) E[F]^(alpha/2) + (8 c kappa p)^(1/(2 - alpha))``."""
    if not 0.0 <= alpha < 2.0:
        raise ValueError(f"alpha must lie in [0, 2), got {alpha!r}")
    if p < 2 or c_sb < 0 or mean_F < 0:
        raise ValueError("need p >= 2 and non-negative c_sb, mean_F")
    return (2.0 * math.sqrt(2.0 * c_sb * KAPPA * p) * mean_F ** (alpha / 2.0)
            + (8.0 * c_sb * KAPPA * p) ** (1.0 / (2.0 - alpha)))


def self_bounding_tail_bound(t: float, c_sb: float, alpha: float, mean_F: float,
                             C_self: float = 1.0) -> float:
    """``2 exp(-C min(t^2 / (c E[F]^alpha), t^(2-alpha) / c))``.

    ``C_self`` is an absolute constant that is not known explicitly; results
    using it carry :data:`UNVERIFIED_CONSTANT_NOTE`.
    """
    if not 0.0 <= alpha < 2.0:
        raise ValueError(f"alpha must lie in [0, 2), got {alpha!r}")
    if t < 0:
        raise OutOfRangeError("self-bounding tail bound needs t >= 0")
    if c_sb == 0:
        return 0.0 if t > 0 else 2.0
    first = t * t / (c_sb * mean_F ** alpha) if mean_F > 0 or alpha == 0 else math.inf
    second = t ** (2.0 - alpha) / c_sb
    return 2.0 * math.exp(-C_self * min(first, second))


TAIL_KINDS = ("upper_tail", "lower_tail", "two_sided")


@dataclass(frozen=True)
class BoundSpec:
    """Which bound to evaluate and its parameters.

    ``scale`` is the almost-sure bound ``L`` on the relevant proxy for the tail
    kinds, and the self-bounding constant ``c`` for ``self_bounding``.
    """

    kind: str
    scale: float
    alpha: float = 0.0
    C_self: float = 1.0
    mean_F: Optional[float] = None

    def __post_init__(self):
        allowed = TAIL_KINDS + ("self_bounding", "moment_plus", "moment_minus", "moment_two_sided")
        if self.kind not in allowed:
            raise ConfigurationError(f"unknown bound kind {self.kind!r}", field="kind")
        if not self.scale > 0:
            raise ConfigurationError("scale (L or c) must be positive", field="scale")
        if self.kind == "self_bounding":
            if not 0.0 <= self.alpha < 2.0:
                raise ConfigurationError("alpha must lie in [0, 2)", field="alpha")
            if self.mean_F is None:
                raise ConfigurationError("self_bounding needs mean_F", field="mean_F")

    @property
    def t_min(self) -> float:
        return T_MIN if self.kind in ("upper_tail", "lower_tail") else 0.0

    @property
    def annotations(self) -> list[str]:
        return [UNVERIFIED_CONSTANT_NOTE] if self.kind == "self_bounding" else []


def tail_bound(t: float, spec: BoundSpec) -> float:
    """Tail bound at deviation ``t``.

    One-sided: ``exp(-c t^2 / L)`` with ``c = log 2 / (8 kappa)``, only for
    ``t >= 4 sqrt(kappa)``. Two-sided: ``2 exp(-c' t^2 / L)`` with
    ``c' = log 2 / (16 kappa)`` for every ``t >= 0``.
    """
    if spec.kind in ("upper_tail", "lower_tail"):
        if t < T_MIN:
            raise OutOfRangeError(
                f"one-sided tail bound is only asserted for t >= 4 sqrt(kappa) = {T_MIN:.6f}; got t={t!r}"
            )
        # exp(-log2 * t^2 / (8 kappa L)) written as a power of two
        return 2.0 ** (-(t * t) / (8.0 * KAPPA * spec.scale))
    if spec.kind == "two_sided":
        if t < 0:
            raise OutOfRangeError("two-sided tail bound needs t >= 0")
        return 2.0 * 2.0 ** (-(t * t) / (16.0 * KAPPA * spec.scale))
    if spec.kind == "self_bounding":
        return self_bounding_tail_bound(t, spec.scale, spec.alpha, spec.mean_F, spec.C_self)
    raise ValueError(f"{spec.kind!r} is a moment kind, not a tail kind")


def clopper_pearson_upper(k: int, n: int, level: float = 0.99) -> float:
    """One-sided upper confidence limit for a binomial proportion."""
    if k >= n:
        return 1.0
    return float(stats.beta.ppf(level, k + 1, n - k))


@dataclass
class TailReport:
    kind: str
    t_grid: list
    empirical: list
    counts: list
    ci_upper: list
    bound_values: list
    status: list
    n_reps: int
    mean_used: float
    mean_se: float
    sensitivity_low: list = field(default_factory=list)
    sensitivity_high: list = field(default_factory=list)
    annotations: list = field(default_factory=list)

    @property
    def violations(self) -> list:
        return [t for t, s in zip(self.t_grid, self.status) if s == "fail"]

    @property
    def passed(self) -> bool:
        return not self.violations

    def rows(self) -> list[dict]:
        out = []
        for i, t in enumerate(self.t_grid):
            out.append({
                "t": t,
                "empirical": self.empirical[i],
                "ci_upper": self.ci_upper[i],
                "bound": self.bound_values[i],
                "pass": self.status[i] != "fail",
                "status": self.status[i],
                "empirical_mean_minus_3se": self.sensitivity_low[i] if self.sensitivity_low else "",
                "empirical_mean_plus_3se": self.sensitivity_high[i] if self.sensitivity_high else "",
            })
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        rows = self.rows()
        writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()) if rows else ["t"],
                                lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(v) for k, v in row.items()})
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _exceed_fraction(values: np.ndarray, centre: float, t: float, kind: str) -> tuple[int, float]:
    dev = values - centre
    if kind == "upper_tail":
        hits = dev >= t
    elif kind == "lower_tail":
        hits = dev <= -t
    else:
        hits = np.abs(dev) >= t
    k = int(np.count_nonzero(hits))
    return k, k / values.size


def _draw(sampler, stream, n: int, workers: int = 1) -> np.ndarray:
    if isinstance(sampler, DiscretePoissonModel):
        gen = as_generator(stream)
        counts = gen.poisson(sampler.lam, size=n)
        uniq, inv = np.unique(counts, return_inverse=True)
        table = np.array([float(sampler.f(int(j))) for j in uniq])
        return table[inv]
    if isinstance(stream, RandomStream):
        return np.array(map_replications(lambda i, gen: float(sampler(gen)), stream, n, workers))
    gen = as_generator(stream)
    return np.array([float(sampler(gen)) for _ in range(n)])


def verify_tail(
    sampler: Union[DiscretePoissonModel, Callable[[np.random.Generator], float]],
    spec: BoundSpec,
    n_reps: int,
    rng,
    t_grid: Sequence[float],
    mean: Optional[float] = None,
    mean_factor: int = 10,
    level: float = 0.99,
    workers: int = 1,
) -> TailReport:
    """Compare empirical tails with a bound on a grid of deviations.

    The centre is the exact mean if given (or the model's exact mean), else the
    mean of an independent run ``mean_factor`` times larger. A ``t`` fails only
    when the upper ``level`` Clopper-Pearson limit exceeds the bound; it is
    ``untestable`` when the bound is below ``5 / n_reps`` and ``vacuous`` when
    the bound is at least 1.
    """
    if spec.kind not in TAIL_KINDS + ("self_bounding",):
        raise ConfigurationError(f"{spec.kind!r} is not a tail kind", field="kind")
    if n_reps < 1:
        raise ConfigurationError("n_reps must be positive", field="n_reps")
    stream = rng if isinstance(rng, RandomStream) else None
    main_rng = stream.child(0) if stream is not None else as_generator(rng)
    values = _draw(sampler, main_rng, n_reps, workers)

    mean_se = 0.0
    if mean is None and isinstance(sampler, DiscretePoissonModel):
        sampler.check_truncation()
        mean = sampler.mean()
    if mean is None:
        mean_rng = stream.child(1) if stream is not None else main_rng
        ref = _draw(sampler, mean_rng, mean_factor * n_reps, workers)
        mean = float(ref.mean())
        mean_se = float(ref.std(ddof=1) / math.sqrt(ref.size)) if ref.size > 1 else 0.0

    tail_kind = "upper_tail" if spec.kind == "self_bounding" else spec.kind
    empirical, counts, upper, bounds, status, lo, hi = [], [], [], [], [], [], []
    for t in t_grid:
        t = float(t)
        b = tail_bound(t, spec)
        k, frac = _exceed_fraction(values, mean, t, tail_kind)
        ucl = clopper_pearson_upper(k, n_reps, level)
        if b >= 1.0:
            s = "vacuous"
        elif b < 5.0 / n_reps:
            s = "untestable"
        elif ucl > b:
            s = "fail"
        else:
            s = "pass"
        empirical.append(frac)
        counts.append(k)
        upper.append(ucl)
        bounds.append(b)
        status.append(s)
        lo.append(_exceed_fraction(values, mean - 3 * mean_se, t, tail_kind)[1])
        hi.append(_exceed_fraction(values, mean + 3 * mean_se, t, tail_kind)[1])
    return TailReport(
        kind=spec.kind, t_grid=[float(t) for t in t_grid], empirical=empirical, counts=counts,
        ci_upper=upper, bound_values=bounds, status=status, n_reps=n_reps,
        mean_used=float(mean), mean_se=mean_se, sensitivity_low=lo, sensitivity_high=hi,
        annotations=spec.annotations,
    )
