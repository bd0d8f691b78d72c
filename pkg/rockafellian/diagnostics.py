"""
Numerical diagnostics: truncated epigraphical distance through the Kenmochi
condition, outer Minkowski content of constraint sets, a metric
subregularity probe and log-log rate fits.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import statsmodels.api as sm
from scipy import ndimage, special

from .chance import ChanceProblem, in_M, probabilities
from .distributions import DiscreteDistribution, Uniform1D, union_length
from .errors import EmptySetError, InsufficientDataError, InvalidInputError, UnsupportedCombinationError
from .model import INF, as_vector
from .schemas import SetClass
from .solvers import GridSpec

logger = logging.getLogger(__name__)

LADDER_STEPS = 30
DEFAULT_CONTENT_LADDER = [2.0 ** -k for k in range(3, 13)]


# ---------------------------------------------------------------------------
# Epigraphical distance
# ---------------------------------------------------------------------------

@dataclass
class EpiDistanceEstimate:
    rho: float
    eta_t1: float
    eta_t2: float
    estimate: float
    spacing: float
    saturated: bool = False
    resolution_limited: bool = False

    def to_dict(self) -> dict:
        return dict(vars(self))


def _grid_values(fn: Callable, spec: GridSpec) -> np.ndarray:
    pts = spec.points()
    values = np.array([float(fn(p)) for p in pts])
    if np.any(np.isnan(values)):
        raise InvalidInputError("function returned NaN on the diagnostic grid")
    shape = (spec.resolution,) * spec.dim
    return values.reshape(shape)


def _ball_footprint(eta: float, spacing: np.ndarray) -> np.ndarray:
    reach = np.floor(eta / spacing + 1e-9).astype(int)
    axes = [np.arange(-r, r + 1) * h for r, h in zip(reach, spacing)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return sum(m ** 2 for m in mesh) <= eta ** 2 * (1 + 1e-12)


def _kenmochi_holds(f_from: np.ndarray, f_to: np.ndarray, region: np.ndarray, rho: float,
                    eta: float, spacing: np.ndarray) -> bool:
    """inf over B(z, eta) of f_to <= max(f_from(z), -rho) + eta on the region."""
    active = region & (f_from <= rho)
    if not active.any():
        return True
    ball_min = ndimage.minimum_filter(f_to, footprint=_ball_footprint(eta, spacing),
                                      mode="constant", cval=np.inf)
    return bool(np.all(ball_min[active] <= np.maximum(f_from[active], -rho) + eta))


def _one_sided(f_from, f_to, region, rho, spacing) -> float:
    ladder = [rho * 2.0 ** -k for k in range(LADDER_STEPS + 1)]
    if not _kenmochi_holds(f_from, f_to, region, rho, ladder[0], spacing):
        return INF
    lo, hi = 0, LADDER_STEPS  # holds at lo; search the last k that holds
    if _kenmochi_holds(f_from, f_to, region, rho, ladder[hi], spacing):
        return ladder[hi]
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _kenmochi_holds(f_from, f_to, region, rho, ladder[mid], spacing):
            lo = mid
        else:
            hi = mid
    return ladder[lo]


def epi_distance(f1: Callable, f2: Callable, rho: float, spec: GridSpec) -> EpiDistanceEstimate:
    """Smallest ladder value eta = rho*2^-k satisfying both Kenmochi inequalities on the grid."""
    if not rho > 0:
        raise InvalidInputError(f"truncation radius must be positive, got {rho}")
    v1, v2 = _grid_values(f1, spec), _grid_values(f2, spec)
    pts = spec.points()
    region = (np.linalg.norm(pts, axis=1) <= rho).reshape(v1.shape)
    spacing = spec.spacing()
    eta1 = _one_sided(v1, v2, region, rho, spacing)
    eta2 = _one_sided(v2, v1, region, rho, spacing)
    estimate = max(eta1, eta2)
    h = float(spacing.max())
    result = EpiDistanceEstimate(rho=rho, eta_t1=eta1, eta_t2=eta2, estimate=estimate, spacing=h,
                                 saturated=estimate == INF, resolution_limited=estimate < h)
    if result.saturated:
        logger.warning("Kenmochi condition fails at eta = rho = %g; distance reported as inf", rho)
    elif result.resolution_limited:
        logger.warning("epi-distance %.3g is below the grid spacing %.3g", estimate, h)
    return result


def epi_distance_sequence(family: Callable[[int], Callable], reference: Callable, nus: Sequence[int],
                          rho: float, spec: GridSpec) -> List[Tuple[int, EpiDistanceEstimate]]:
    return [(nu, epi_distance(family(nu), reference, rho, spec)) for nu in nus]


# ---------------------------------------------------------------------------
# Minkowski content
# ---------------------------------------------------------------------------

def _collar_mass(mu, H, x: np.ndarray, eps: float) -> float:
    if isinstance(mu, DiscreteDistribution):
        if H.is_empty(x):
            return 0.0
        dist = H.distance(mu.atoms, x)
        return float(mu.weights[(dist > 0) & (dist <= eps)].sum())
    if isinstance(mu, Uniform1D):
        base = H.intervals(x)
        grown = [(lo - eps, hi + eps) for lo, hi in base]
        collar = union_length(grown, mu.lower, mu.upper) - union_length(base, mu.lower, mu.upper)
        return max(collar, 0.0) / mu.width
    raise UnsupportedCombinationError(f"content not supported for {type(mu).__name__}")


def minkowski_content(mu, H, x, eps_list: Optional[Sequence[float]] = None) -> List[float]:
    """(1/eps) * mu((H(x) + B(0, eps)) minus H(x)) for each eps."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    eps_list = DEFAULT_CONTENT_LADDER if eps_list is None else list(eps_list)
    if any(e <= 0 for e in eps_list):
        raise InvalidInputError("content radii must be positive")
    return [_collar_mass(mu, H, x, e) / e for e in eps_list]


def steiner_bound(H, x, density_bound: float) -> float:
    """density bound times the surface measure of a convex body H(x)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if H.is_empty(x):
        return 0.0
    if H.cls in (SetClass.INTERVAL, SetClass.BOX):
        lo, hi = H.lower(x), H.upper(x)
        if H.dim == 1:
            return density_bound * float(np.isfinite(lo[0]) + np.isfinite(hi[0]))
        sides = hi - lo
        if not np.all(np.isfinite(sides)):
            raise UnsupportedCombinationError("Steiner bound needs a bounded box")
        faces = sum(np.prod(np.delete(sides, i)) for i in range(H.dim))
        return density_bound * 2.0 * float(faces)
    if H.cls == SetClass.BALL:
        d, r = H.dim, float(H.radius(x)[0])
        area = d * math.pi ** (d / 2) / special.gamma(d / 2 + 1) * r ** (d - 1)
        return density_bound * float(area)
    raise UnsupportedCombinationError(f"Steiner bound covers convex bodies, not {H.cls.value} sets")


# ---------------------------------------------------------------------------
# Metric subregularity
# ---------------------------------------------------------------------------

def subregularity_probe(cp: ChanceProblem, mu, samples: Sequence, spec: GridSpec) -> float:
    """Largest observed dist(z, M(0)) / dist(0, M^-1(z)) over the samples.

    M(0) is represented by the grid points of spec that are feasible; the
    value is a lower-bound estimate of kappa at grid resolution.
    """
    grid = spec.points()
    feasible = np.array([in_M(cp, mu, np.zeros(cp.m), p) for p in grid])
    if not feasible.any():
        raise EmptySetError("no feasible point on the probe grid; M(0) looks empty")
    m0 = grid[feasible]
    best = 0.0
    used = 0
    for z in samples:
        z = as_vector(z, cp.n)
        if float(cp.g0(z)) == INF:
            continue
        shortfall = np.maximum(cp.levels - probabilities(cp, mu, z), 0.0)
        to_inverse = float(np.linalg.norm(shortfall))
        if to_inverse <= 0:
            continue
        to_feasible = float(np.min(np.linalg.norm(m0 - z, axis=1)))
        best = max(best, to_feasible / to_inverse)
        used += 1
    logger.info("kappa probe: %d infeasible samples, estimate %.4g (grid spacing %.3g)",
                used, best, float(spec.spacing().max()))
    return best


# ---------------------------------------------------------------------------
# Rates
# ---------------------------------------------------------------------------

@dataclass
class RateFit:
    slope: float
    intercept: float
    residual: float
    r2: float
    n: int

    def to_dict(self) -> dict:
        return dict(vars(self))


def rate_fit(pairs: Sequence[Tuple[float, float]]) -> RateFit:
    """OLS of log(err) on log(d) over the strictly positive pairs."""
    kept = [(d, e) for d, e in pairs if d > 0 and e > 0 and math.isfinite(d) and math.isfinite(e)]
    if len(kept) < 3:
        raise InsufficientDataError(f"rate fit needs 3 positive pairs, got {len(kept)}")
    log_d = np.log([d for d, _ in kept])
    log_e = np.log([e for _, e in kept])
    model = sm.OLS(log_e, sm.add_constant(log_d, has_constant="add")).fit()
    intercept, slope = model.params
    return RateFit(slope=float(slope), intercept=float(intercept), residual=float(model.ssr),
                   r2=float(model.rsquared) if np.isfinite(model.rsquared) else 1.0, n=len(kept))


def rate_bound_s1(lam: float, d: float, alpha: float) -> float:
    return max(lam ** (1.0 / alpha), d, d ** alpha / lam)


def rate_bound_s2(lam: float, theta: float, d: float, alpha: float) -> float:
    return max(lam ** (1.0 / alpha), theta, d / theta, (d / theta) ** alpha / lam)
