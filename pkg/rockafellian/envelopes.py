"""
Epigraphical regularization of component functions:

    g^nu(xi, x) = inf_{zeta in Xi} g(zeta, x) + ||xi - zeta||^beta / (beta * theta)

computed exactly, either over a finite support or in closed form for
indicator-form components b - 1_K.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from .distributions import as_points
from .errors import InvalidInputError, UnsupportedCombinationError
from .model import IndicatorComponent

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EnvelopeConfig:
    beta: float
    theta: float
    support: Optional[np.ndarray] = None  # finite Xi as an (s, d) array

    def __post_init__(self):
        if self.beta < 1:
            raise InvalidInputError(f"envelope beta must be >= 1, got {self.beta}")
        if not self.theta > 0:
            raise InvalidInputError(f"envelope theta must be positive, got {self.theta}")

    def kernel(self, dist: np.ndarray) -> np.ndarray:
        return np.asarray(dist) ** self.beta / (self.beta * self.theta)


def _indicator_envelope(g: IndicatorComponent, cfg: EnvelopeConfig, xi: np.ndarray, x) -> np.ndarray:
    if g.event.is_empty(x):
        return np.full(len(xi), g.level)
    return g.level + np.minimum(0.0, cfg.kernel(g.event.distance(xi, x)) - 1.0)


def _atomic_envelope(g: Callable, cfg: EnvelopeConfig, xi: np.ndarray, x) -> np.ndarray:
    atoms = as_points(cfg.support)
    values = np.asarray(g(atoms, x), dtype=float).reshape(-1)
    return np.min(values[None, :] + cfg.kernel(cdist(xi, atoms)), axis=1)


def regularize_points(g: Callable, cfg: EnvelopeConfig, xi, x) -> np.ndarray:
    """Vectorized epi_regularize over the rows of xi."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if cfg.support is not None:
        xi = as_points(xi, as_points(cfg.support).shape[1])
        return _atomic_envelope(g, cfg, xi, x)
    if isinstance(g, IndicatorComponent):
        return _indicator_envelope(g, cfg, as_points(xi, g.event.dim), x)
    raise UnsupportedCombinationError(
        f"no exact envelope for {type(g).__name__} over a continuous support; "
        "pass a finite support or an indicator-form component"
    )


def epi_regularize(g: Callable, cfg: EnvelopeConfig, xi, x) -> float:
    point = np.atleast_1d(np.asarray(xi, dtype=float)).reshape(1, -1)
    return float(regularize_points(g, cfg, point, x)[0])


def pasch_hausdorff(g: Callable, theta: float, xi, x, support=None) -> float:
    return epi_regularize(g, EnvelopeConfig(1.0, theta, support), xi, x)


def moreau(g: Callable, theta: float, xi, x, support=None) -> float:
    return epi_regularize(g, EnvelopeConfig(2.0, theta, support), xi, x)


def lipschitz_certificate(beta: float, theta: float, bound: float) -> float:
    """L = 3^(beta-1)/theta * max{(2 beta M theta)^((beta-1)/beta), 1}."""
    if beta < 1 or not theta > 0 or bound < 0:
        raise InvalidInputError(f"need beta >= 1, theta > 0, M >= 0; got {beta}, {theta}, {bound}")
    return 3.0 ** (beta - 1) / theta * max((2 * beta * bound * theta) ** ((beta - 1) / beta), 1.0)


@dataclass(frozen=True)
class RegularizedComponent:
    """A component g replaced by its envelope; usable wherever components are."""
    component: Callable
    beta: float
    theta: float
    support: Optional[np.ndarray] = None

    @property
    def config(self) -> EnvelopeConfig:
        return EnvelopeConfig(self.beta, self.theta, self.support)

    def __call__(self, xi: np.ndarray, x: np.ndarray) -> np.ndarray:
        return regularize_points(self.component, self.config, xi, x)

    def breakpoints(self, x: np.ndarray):
        if not hasattr(self.component, "breakpoints"):
            return []
        reach = (self.beta * self.theta) ** (1.0 / self.beta)
        points = set()
        for p in self.component.breakpoints(x):
            points.update((p - reach, p, p + reach))
        return sorted(points)

    @property
    def bound(self) -> float:
        return getattr(self.component, "bound", np.inf)


def regularize_all(components: Sequence[Callable], beta: float, theta: float,
                   support=None) -> Tuple[RegularizedComponent, ...]:
    return tuple(RegularizedComponent(g, beta, theta, support) for g in components)


def majorization_gap(G: Sequence[Callable], G_nu: Sequence[Callable], atoms, xs) -> float:
    """max over atoms, x and i of G^nu_i - G_i; nonpositive when G^nu <= G."""
    pts = as_points(atoms)
    gap = -np.inf
    for x in xs:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        for g, g_nu in zip(G, G_nu):
            diff = np.asarray(g_nu(pts, x), dtype=float) - np.asarray(g(pts, x), dtype=float)
            gap = max(gap, float(np.max(diff)))
    return gap


# ---------------------------------------------------------------------------
# Hand-designed G^nu for the discrete worked examples
# ---------------------------------------------------------------------------

def enlarge_set(g: IndicatorComponent, nu: int) -> IndicatorComponent:
    """b - 1_{K^nu} with K grown by 1/nu on its upper side."""
    return IndicatorComponent(g.level, g.event.with_upper_shift(1.0 / nu))


def shift_threshold(g: IndicatorComponent, nu: int) -> IndicatorComponent:
    """b - 1_{(-inf, x + 1/nu]} from b - 1_{(-inf, x]}."""
    if g.event.upper is None or g.event.upper.coef is None:
        raise UnsupportedCombinationError("shifted-threshold needs a set whose upper end moves with x")
    return IndicatorComponent(g.level, g.event.with_upper_shift(1.0 / nu))


DETAIL_ENVELOPES: Dict[str, Callable[[IndicatorComponent, int], IndicatorComponent]] = {
    "enlarged-set": enlarge_set,
    "shifted-threshold": shift_threshold,
}


def detail_envelope(name: str, components: Sequence[IndicatorComponent], nu: int) -> Tuple[IndicatorComponent, ...]:
    if name not in DETAIL_ENVELOPES:
        raise UnsupportedCombinationError(
            f"unknown detail envelope {name!r}; available: {', '.join(sorted(DETAIL_ENVELOPES))}"
        )
    if nu < 1:
        raise InvalidInputError(f"nu must be >= 1, got {nu}")
    build = DETAIL_ENVELOPES[name]
    return tuple(build(g, nu) for g in components)
