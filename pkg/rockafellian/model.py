"""
Composite problems phi(x) = g0(x) + h(E_mu[G(xi, x)]) and their Rockafellians.

Values are extended reals represented as Python floats (+/-inf allowed);
`xsum` is the only place where terms are added so that (+inf) + (-inf)
raises instead of turning into NaN.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from . import config
from .distributions import DiscreteDistribution, Uniform1D, expectation
from .errors import IndeterminateFormError, InvalidInputError, UnsupportedCombinationError
from .schemas import OuterKind, PenaltyTag
from .solvers import GridSpec, grid_minimize

logger = logging.getLogger(__name__)

XReal = float
INF = math.inf


def xsum(*terms: float) -> XReal:
    """Saturating extended-real sum."""
    pos = neg = False
    for t in terms:
        if math.isnan(t):
            raise IndeterminateFormError("NaN in extended-real sum")
        pos = pos or t == INF
        neg = neg or t == -INF
    if pos and neg:
        raise IndeterminateFormError("(+inf) + (-inf) is undefined")
    if pos:
        return INF
    if neg:
        return -INF
    return float(math.fsum(terms))


def as_vector(values, size: int, name: str = "point") -> np.ndarray:
    v = np.atleast_1d(np.asarray(values, dtype=float)).reshape(-1)
    if v.size != size:
        raise InvalidInputError(f"{name} has dimension {v.size}, expected {size}")
    if not np.all(np.isfinite(v)):
        raise InvalidInputError(f"{name} must be finite, got {v.tolist()}")
    return v


def is_feasible_vector(y) -> bool:
    """y in the nonpositive orthant, up to the feasibility tolerance."""
    return bool(np.all(np.atleast_1d(np.asarray(y, dtype=float)) <= config.FEASIBILITY_TOL))


# ---------------------------------------------------------------------------
# Outer functions h
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OuterFunction:
    kind: OuterKind
    weights: Optional[Tuple[float, ...]] = None
    alpha: float = 1.0

    def __post_init__(self):
        if self.kind == OuterKind.LINEAR:
            if self.weights is None or any(w < 0 for w in self.weights):
                raise InvalidInputError("linear outer function needs nonnegative weights")
        if self.kind == OuterKind.MAX_PLUS_POWER and self.alpha < 1:
            raise InvalidInputError(f"max-plus-power needs alpha >= 1, got {self.alpha}")

    def __call__(self, y) -> XReal:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if self.kind == OuterKind.ORTHANT_INDICATOR:
            return 0.0 if is_feasible_vector(y) else INF
        if self.kind == OuterKind.LINEAR:
            w = np.asarray(self.weights, dtype=float)
            if w.size != y.size:
                raise InvalidInputError(f"{w.size} weights for a {y.size}-vector")
            return float(w @ y)
        return float(np.sum(np.maximum(y, 0.0) ** self.alpha))


def orthant_indicator() -> OuterFunction:
    return OuterFunction(OuterKind.ORTHANT_INDICATOR)


def linear(weights: Sequence[float]) -> OuterFunction:
    return OuterFunction(OuterKind.LINEAR, weights=tuple(float(w) for w in weights))


def max_plus_power(alpha: float) -> OuterFunction:
    return OuterFunction(OuterKind.MAX_PLUS_POWER, alpha=float(alpha))


# ---------------------------------------------------------------------------
# g0 catalog
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Quadratic:
    scale: float = 1.0
    center: float = 0.0

    def __call__(self, x: np.ndarray) -> XReal:
        return float(self.scale * np.sum((np.asarray(x) - self.center) ** 2))


@dataclass(frozen=True)
class Affine:
    coef: Tuple[float, ...]
    const: float = 0.0

    def __call__(self, x: np.ndarray) -> XReal:
        return float(np.dot(self.coef, x) + self.const)


@dataclass(frozen=True)
class BoxIndicator:
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]

    def __call__(self, x: np.ndarray) -> XReal:
        tol = config.MEMBERSHIP_TOL
        inside = np.all(np.asarray(x) >= np.asarray(self.lower) - tol) and \
            np.all(np.asarray(x) <= np.asarray(self.upper) + tol)
        return 0.0 if inside else INF


@dataclass(frozen=True)
class IndicatorSteps:
    """sum_j scale_j * 1_{[lo_j, hi_j]}(x) with box sets (1-D entries allowed)."""
    steps: Tuple[Tuple[float, Tuple[float, ...], Tuple[float, ...]], ...]

    def __call__(self, x: np.ndarray) -> XReal:
        tol = config.MEMBERSHIP_TOL
        total = 0.0
        for scale, lo, hi in self.steps:
            if np.all(np.asarray(x) >= np.asarray(lo) - tol) and np.all(np.asarray(x) <= np.asarray(hi) + tol):
                total += scale
        return total


@dataclass(frozen=True)
class ObjectiveSum:
    parts: Tuple[Callable[[np.ndarray], XReal], ...]

    def __call__(self, x: np.ndarray) -> XReal:
        return xsum(*(float(p(x)) for p in self.parts))


def quadratic(scale: float = 1.0, center: float = 0.0) -> Quadratic:
    return Quadratic(scale=float(scale), center=float(center))


def affine(coef, const: float = 0.0) -> Affine:
    return Affine(coef=tuple(np.atleast_1d(np.asarray(coef, dtype=float)).tolist()), const=float(const))


def box_indicator(lower, upper) -> BoxIndicator:
    return BoxIndicator(lower=tuple(np.atleast_1d(lower).astype(float).tolist()),
                        upper=tuple(np.atleast_1d(upper).astype(float).tolist()))


def indicator_steps(*steps) -> IndicatorSteps:
    """steps as (scale, lo, hi) triples; infinite endpoints allowed."""
    packed = tuple(
        (float(s), tuple(np.atleast_1d(lo).astype(float).tolist()), tuple(np.atleast_1d(hi).astype(float).tolist()))
        for s, lo, hi in steps
    )
    return IndicatorSteps(steps=packed)


def combine(*parts) -> ObjectiveSum:
    return ObjectiveSum(parts=tuple(parts))


def with_box(g0, lower, upper) -> ObjectiveSum:
    """g0 restricted to the box [lower, upper]."""
    return combine(g0, box_indicator(lower, upper))


# ---------------------------------------------------------------------------
# Component catalog g_i(xi, x); xi is an (s, d) array, the result has s entries
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IndicatorComponent:
    """g(xi, x) = level - 1_{H(x)}(xi)."""
    level: float
    event: object

    def __call__(self, xi: np.ndarray, x: np.ndarray) -> np.ndarray:
        return self.level - self.event.contains(xi, x).astype(float)

    def breakpoints(self, x: np.ndarray):
        return self.event.breakpoints(x)

    @property
    def bound(self) -> float:
        return max(abs(self.level), abs(self.level - 1.0))


@dataclass(frozen=True)
class AffineComponent:
    """g(xi, x) = a.xi + c.x + b."""
    a: Tuple[float, ...]
    c: Tuple[float, ...]
    b: float = 0.0

    def __call__(self, xi: np.ndarray, x: np.ndarray) -> np.ndarray:
        return np.asarray(xi) @ np.asarray(self.a) + float(np.dot(self.c, x)) + self.b


@dataclass(frozen=True)
class ClosureComponent:
    """Preset-supplied closure with optional breakpoints and declared bound."""
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    kinks: Callable[[np.ndarray], Sequence[float]] = None
    bound: float = INF

    def __call__(self, xi: np.ndarray, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(xi, x), dtype=float).reshape(-1)

    def breakpoints(self, x: np.ndarray):
        return list(self.kinks(x)) if self.kinks is not None else []


Component = Union[IndicatorComponent, AffineComponent, ClosureComponent, Callable]


@dataclass(frozen=True)
class CompositeProblem:
    name: str
    g0: Callable[[np.ndarray], XReal]
    h: OuterFunction
    components: Tuple[Component, ...]
    support: Union[DiscreteDistribution, Uniform1D]
    n: int = 1
    d: int = 1
    bound: float = 1.0  # declared M_x: |g_i| <= bound on support x dom g0

    def __post_init__(self):
        if not self.components:
            raise InvalidInputError("a composite problem needs at least one component")
        if self.support.dim != self.d:
            raise InvalidInputError(f"support lives in R^{self.support.dim}, problem declares d={self.d}")

    @property
    def m(self) -> int:
        return len(self.components)


@dataclass(frozen=True)
class PenaltyKind:
    tag: PenaltyTag
    alpha: float
    lam: float

    def __post_init__(self):
        if self.alpha < 1:
            raise InvalidInputError(f"penalty exponent alpha must be >= 1, got {self.alpha}")
        if not self.lam > 0:
            raise InvalidInputError(f"penalty parameter lambda must be positive, got {self.lam}")

    def __call__(self, u) -> XReal:
        u = np.abs(np.atleast_1d(np.asarray(u, dtype=float)))
        if self.tag == PenaltyTag.EUCLIDEAN:
            total = float(np.linalg.norm(u)) ** self.alpha
        else:
            total = float(np.sum(u ** self.alpha))
        return total / (self.alpha * self.lam)

    def relaxation(self, v) -> XReal:
        """min over u with u + v <= 0 of the penalty, attained at u = -max(v, 0)."""
        return self(np.maximum(np.atleast_1d(np.asarray(v, dtype=float)), 0.0))


# ---------------------------------------------------------------------------
# Evaluations
# ---------------------------------------------------------------------------

def eval_phi(problem: CompositeProblem, mu, x) -> XReal:
    """phi(x) = g0(x) + h(E_mu[G(xi, x)])."""
    x = as_vector(x, problem.n)
    base = float(problem.g0(x))
    if base == INF:
        return INF
    return xsum(base, problem.h(expectation(mu, problem.components, x)))


def eval_plugin(problem: CompositeProblem, mu_nu, x) -> XReal:
    """The plug-in phi^nu: mu replaced by mu^nu."""
    return eval_phi(problem, mu_nu, x)


def eval_rockafellian(problem: CompositeProblem, mu, u, x) -> XReal:
    """f(u, x) = g0(x) + h(u + E_mu[G]) + indicator of {0}(u)."""
    u = as_vector(u, problem.m, "u")
    if np.any(np.abs(u) > config.MEMBERSHIP_TOL):
        return INF
    x = as_vector(x, problem.n)
    base = float(problem.g0(x))
    if base == INF:
        return INF
    return xsum(base, problem.h(u + expectation(mu, problem.components, x)))


def eval_approx_rockafellian(problem: CompositeProblem, mu_nu, G_nu, penalty: PenaltyKind, u, x) -> XReal:
    """f^nu(u, x) = g0(x) + h(u + E_{mu^nu}[G^nu]) + penalty(u)."""
    u = as_vector(u, problem.m, "u")
    x = as_vector(x, problem.n)
    base = float(problem.g0(x))
    if base == INF:
        return INF
    comps = problem.components if G_nu is None else G_nu
    return xsum(base, problem.h(u + expectation(mu_nu, comps, x)), penalty(u))


def partial_argmin_u(problem: CompositeProblem, mu_nu, G_nu, penalty: PenaltyKind, x,
                     u_box: float = 3.0) -> Tuple[XReal, np.ndarray]:
    """(inf_u f^nu(u, x), minimizing u).

    Closed form when h is the orthant indicator; otherwise a grid search
    over u in [-u_box, u_box]^m.
    """
    x = as_vector(x, problem.n)
    base = float(problem.g0(x))
    if base == INF:
        return INF, np.full(problem.m, np.nan)
    comps = problem.components if G_nu is None else G_nu
    v = expectation(mu_nu, comps, x)
    if problem.h.kind == OuterKind.ORTHANT_INDICATOR:
        return xsum(base, penalty.relaxation(v)), -np.maximum(v, 0.0)

    if problem.m > 3:
        raise UnsupportedCombinationError("grid fallback over u supports m <= 3")
    spec = GridSpec(box=tuple((-u_box, u_box) for _ in range(problem.m)), resolution=61, rounds=4)
    result = grid_minimize(lambda u: xsum(base, problem.h(u + v), penalty(u)), spec)
    if not result.feasible_found:
        return INF, np.full(problem.m, np.nan)
    return result.value, result.representatives[0]


def partial_min_u(problem: CompositeProblem, mu_nu, G_nu, penalty: PenaltyKind, x) -> XReal:
    """phi_f^nu(x) = inf_u f^nu(u, x)."""
    return partial_argmin_u(problem, mu_nu, G_nu, penalty, x)[0]
