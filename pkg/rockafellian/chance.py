"""
Chance-constrained problems: parametric sets H_i(x), probabilities, the
reformulated objective, its penalized relaxations and violation reports.
"""
import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from . import config
from .distributions import as_points, expectation, prob_of_set
from .envelopes import RegularizedComponent
from .errors import EmptySetError, InvalidInputError, UnsupportedCombinationError
from .model import (
    INF,
    CompositeProblem,
    IndicatorComponent,
    PenaltyKind,
    XReal,
    as_vector,
    orthant_indicator,
    xsum,
)
from .schemas import PenaltyTag, SetClass

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AffineMap:
    """x -> const + coef @ x; a 1-D coef scales x[0] only."""
    const: np.ndarray
    coef: Optional[np.ndarray] = None

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if self.coef is None:
            return self.const
        if self.coef.ndim == 1:
            return self.const + self.coef * float(x[0])
        return self.const + self.coef @ x

    def shifted(self, delta: float) -> "AffineMap":
        return AffineMap(self.const + delta, self.coef)


def affine_map(const, coef=None) -> AffineMap:
    c = np.atleast_1d(np.asarray(const, dtype=float))
    k = None if coef is None else np.asarray(coef, dtype=float)
    if k is not None and k.ndim == 0:
        k = np.full(c.shape, float(k))
    if k is not None and k.shape[0] != c.shape[0]:
        raise InvalidInputError(f"affine map has {c.shape[0]} outputs but {k.shape[0]} coefficient rows")
    return AffineMap(c, k)


@dataclass(frozen=True)
class ParamSet:
    cls: SetClass
    dim: int
    lower: Optional[AffineMap] = None
    upper: Optional[AffineMap] = None
    center: Optional[AffineMap] = None
    radius: Optional[AffineMap] = None
    normal: Optional[np.ndarray] = None
    offset: Optional[AffineMap] = None
    members: Tuple["ParamSet", ...] = ()
    gate: Optional[Tuple[float, float]] = None

    def gate_open(self, x: np.ndarray) -> bool:
        if self.gate is None:
            return True
        lo, hi = self.gate
        tol = config.MEMBERSHIP_TOL
        return bool(np.all(x >= lo - tol) and np.all(x <= hi + tol))

    def is_empty(self, x) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if not self.gate_open(x):
            return True
        if self.cls in (SetClass.INTERVAL, SetClass.BOX):
            return bool(np.any(self.lower(x) > self.upper(x)))
        if self.cls == SetClass.BALL:
            return float(self.radius(x)[0]) < 0.0
        if self.cls == SetClass.HALFSPACE:
            return False
        return all(m.is_empty(x) for m in self.members)

    def contains(self, xi: np.ndarray, x) -> np.ndarray:
        """Boolean mask over the rows of xi (s, d)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        xi = as_points(xi, self.dim)
        tol = config.MEMBERSHIP_TOL
        if not self.gate_open(x):
            return np.zeros(len(xi), dtype=bool)
        if self.cls in (SetClass.INTERVAL, SetClass.BOX):
            lo, hi = self.lower(x), self.upper(x)
            return np.all((xi >= lo - tol) & (xi <= hi + tol), axis=1)
        if self.cls == SetClass.BALL:
            r = float(self.radius(x)[0])
            if r < 0:
                return np.zeros(len(xi), dtype=bool)
            return np.linalg.norm(xi - self.center(x), axis=1) <= r + tol
        if self.cls == SetClass.HALFSPACE:
            return xi @ self.normal <= float(self.offset(x)[0]) + tol
        mask = np.zeros(len(xi), dtype=bool)
        for m in self.members:
            mask |= m.contains(xi, x)
        return mask

    def distance(self, xi: np.ndarray, x) -> np.ndarray:
        """Euclidean distance from each row of xi to H(x)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        xi = as_points(xi, self.dim)
        if self.is_empty(x):
            raise EmptySetError(f"{self.cls.value} set is empty at x={x.tolist()}")
        if self.cls in (SetClass.INTERVAL, SetClass.BOX):
            lo, hi = self.lower(x), self.upper(x)
            gap = np.maximum(np.maximum(lo - xi, xi - hi), 0.0)
            return np.linalg.norm(gap, axis=1)
        if self.cls == SetClass.BALL:
            r = float(self.radius(x)[0])
            return np.maximum(np.linalg.norm(xi - self.center(x), axis=1) - r, 0.0)
        if self.cls == SetClass.HALFSPACE:
            excess = xi @ self.normal - float(self.offset(x)[0])
            return np.maximum(excess, 0.0) / float(np.linalg.norm(self.normal))
        live = [m for m in self.members if not m.is_empty(x)]
        return np.min(np.vstack([m.distance(xi, x) for m in live]), axis=0)

    def intervals(self, x) -> List[Tuple[float, float]]:
        """H(x) as a list of closed intervals (one-dimensional sets only)."""
        if self.dim != 1:
            raise UnsupportedCombinationError(f"interval view needs d=1, set has d={self.dim}")
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.is_empty(x):
            return []
        if self.cls in (SetClass.INTERVAL, SetClass.BOX):
            return [(float(self.lower(x)[0]), float(self.upper(x)[0]))]
        if self.cls == SetClass.BALL:
            c, r = float(self.center(x)[0]), float(self.radius(x)[0])
            return [(c - r, c + r)]
        if self.cls == SetClass.HALFSPACE:
            a, t = float(self.normal[0]), float(self.offset(x)[0])
            if a > 0:
                return [(-INF, t / a)]
            if a < 0:
                return [(t / a, INF)]
            return [(-INF, INF)] if t >= 0 else []
        out = []
        for m in self.members:
            out.extend(m.intervals(x))
        return out

    def breakpoints(self, x) -> List[float]:
        if self.dim != 1:
            return []
        return sorted({p for iv in self.intervals(x) for p in iv if math.isfinite(p)})

    def with_upper_shift(self, delta: float) -> "ParamSet":
        """Enlarge the set outward by delta on its upper side."""
        if self.cls in (SetClass.INTERVAL, SetClass.BOX):
            return replace(self, upper=self.upper.shifted(delta))
        if self.cls == SetClass.BALL:
            return replace(self, radius=self.radius.shifted(delta))
        if self.cls == SetClass.HALFSPACE:
            return replace(self, offset=self.offset.shifted(delta * float(np.linalg.norm(self.normal))))
        return replace(self, members=tuple(m.with_upper_shift(delta) for m in self.members))


def interval(lower: float, upper: float, lower_coef: float = None, upper_coef: float = None,
             gate: Tuple[float, float] = None) -> ParamSet:
    return ParamSet(SetClass.INTERVAL, 1, lower=affine_map(lower, lower_coef),
                    upper=affine_map(upper, upper_coef), gate=gate)


def singleton(point: float, coef: float = None, gate: Tuple[float, float] = None) -> ParamSet:
    return interval(point, point, coef, coef, gate=gate)


def box(lower: Sequence[float], upper: Sequence[float], lower_coef=None, upper_coef=None,
        gate: Tuple[float, float] = None) -> ParamSet:
    lo, hi = affine_map(lower, lower_coef), affine_map(upper, upper_coef)
    if lo.const.shape != hi.const.shape:
        raise InvalidInputError("box lower and upper corners differ in dimension")
    return ParamSet(SetClass.BOX, lo.const.size, lower=lo, upper=hi, gate=gate)


def ball(center: Sequence[float], radius: float, center_coef=None, radius_coef: float = None,
         gate: Tuple[float, float] = None) -> ParamSet:
    c = affine_map(center, center_coef)
    return ParamSet(SetClass.BALL, c.const.size, center=c, radius=affine_map(radius, radius_coef), gate=gate)


def halfspace(normal: Sequence[float], offset: float, offset_coef: float = None,
              gate: Tuple[float, float] = None) -> ParamSet:
    a = np.atleast_1d(np.asarray(normal, dtype=float))
    if not np.any(a):
        raise InvalidInputError("halfspace normal must be nonzero")
    return ParamSet(SetClass.HALFSPACE, a.size, normal=a, offset=affine_map(offset, offset_coef), gate=gate)


def union(*members: ParamSet, gate: Tuple[float, float] = None) -> ParamSet:
    if not members:
        raise InvalidInputError("union needs at least one member")
    dims = {m.dim for m in members}
    if len(dims) != 1:
        raise InvalidInputError(f"union members live in different dimensions: {sorted(dims)}")
    return ParamSet(SetClass.FINITE_UNION, dims.pop(), members=tuple(members), gate=gate)


def membership(H: ParamSet, x, xi) -> bool:
    return bool(H.contains(np.atleast_1d(np.asarray(xi, dtype=float)).reshape(1, -1), x)[0])


def distance_to_set(H: ParamSet, x, xi) -> float:
    return float(H.distance(np.atleast_1d(np.asarray(xi, dtype=float)).reshape(1, -1), x)[0])


# ---------------------------------------------------------------------------
# Chance problems
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChanceConstraint:
    set: ParamSet
    level: float

    def __post_init__(self):
        if not 0.0 <= self.level <= 1.0:
            raise InvalidInputError(f"chance level must lie in [0, 1], got {self.level}")


@dataclass(frozen=True)
class ChanceProblem:
    name: str
    g0: Callable[[np.ndarray], XReal]
    constraints: Tuple[ChanceConstraint, ...]
    distribution: object = None
    n: int = 1

    @property
    def m(self) -> int:
        return len(self.constraints)

    @property
    def levels(self) -> np.ndarray:
        return np.array([c.level for c in self.constraints])


@dataclass
class ViolationReport:
    slacks: List[float]
    worst: float


@dataclass
class S2Term:
    level: float
    value: float           # b_i + E[min{0, dist^beta/(beta*theta) - 1}]
    empty: bool = False


def probabilities(cp: ChanceProblem, mu, x) -> np.ndarray:
    x = as_vector(x, cp.n)
    return np.array([prob_of_set(mu, c.set, x) for c in cp.constraints])


def chance_phi(cp: ChanceProblem, mu, x) -> XReal:
    """g0(x) when every mu(H_i(x)) >= b_i, +inf otherwise."""
    x = as_vector(x, cp.n)
    base = float(cp.g0(x))
    if base == INF:
        return INF
    if np.all(probabilities(cp, mu, x) >= cp.levels - config.FEASIBILITY_TOL):
        return base
    return INF


def penalized_s1(cp: ChanceProblem, mu_nu, lam: float, alpha: float, x,
                 tag: PenaltyTag = PenaltyTag.SEPARABLE) -> XReal:
    """g0(x) + (1/(alpha*lam)) sum_i max{0, b_i - mu^nu(H_i(x))}^alpha."""
    penalty = PenaltyKind(tag, alpha, lam)
    x = as_vector(x, cp.n)
    base = float(cp.g0(x))
    if base == INF:
        return INF
    return xsum(base, penalty.relaxation(cp.levels - probabilities(cp, mu_nu, x)))


def s2_breakdown(cp: ChanceProblem, mu_nu, theta: float, x, beta: float = 1.0) -> List[S2Term]:
    x = as_vector(x, cp.n)
    terms = []
    for c in cp.constraints:
        if c.set.is_empty(x):
            logger.warning("H(x) empty at x=%s; constraint counted at its level %.3g", x.tolist(), c.level)
            terms.append(S2Term(c.level, c.level, empty=True))
            continue
        reg = RegularizedComponent(IndicatorComponent(c.level, c.set), beta=beta, theta=theta)
        terms.append(S2Term(c.level, float(expectation(mu_nu, reg, x)[0])))
    return terms


def penalized_s2(cp: ChanceProblem, mu_nu, lam: float, theta: float, alpha: float, x,
                 beta: float = 1.0, tag: PenaltyTag = PenaltyTag.SEPARABLE) -> XReal:
    """g0(x) + (1/(alpha*lam)) sum_i max{0, b_i + E[min{0, dist^beta/(beta*theta) - 1}]}^alpha."""
    if not theta > 0:
        raise InvalidInputError(f"theta must be positive, got {theta}")
    penalty = PenaltyKind(tag, alpha, lam)
    x = as_vector(x, cp.n)
    base = float(cp.g0(x))
    if base == INF:
        return INF
    values = np.array([t.value for t in s2_breakdown(cp, mu_nu, theta, x, beta)])
    return xsum(base, penalty.relaxation(values))


def in_M(cp: ChanceProblem, mu, y, x) -> bool:
    """x in dom g0 with mu(H_i(x)) >= b_i - y_i for every i."""
    y = as_vector(y, cp.m, "y")
    x = as_vector(x, cp.n)
    if float(cp.g0(x)) == INF:
        return False
    return bool(np.all(probabilities(cp, mu, x) >= cp.levels - y - config.FEASIBILITY_TOL))


def violation(cp: ChanceProblem, mu, x) -> ViolationReport:
    slacks = probabilities(cp, mu, x) - cp.levels
    return ViolationReport(slacks=slacks.tolist(), worst=float(slacks.min()))


def components(cp: ChanceProblem) -> Tuple[IndicatorComponent, ...]:
    return tuple(IndicatorComponent(c.level, c.set) for c in cp.constraints)


def to_composite(cp: ChanceProblem) -> CompositeProblem:
    """The composite form: h the orthant indicator, g_i = b_i - 1_{H_i(x)}."""
    if cp.distribution is None:
        raise InvalidInputError(f"chance problem {cp.name!r} has no distribution")
    comps = components(cp)
    return CompositeProblem(
        name=cp.name,
        g0=cp.g0,
        h=orthant_indicator(),
        components=comps,
        support=cp.distribution,
        n=cp.n,
        d=cp.distribution.dim,
        bound=max(c.bound for c in comps),
    )
