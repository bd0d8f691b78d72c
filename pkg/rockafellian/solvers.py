"""
Deterministic multiresolution grid minimization of extended-real functions
on boxes of dimension at most 3.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy.spatial.distance import cdist

from . import config
from .errors import IndeterminateFormError, InvalidInputError

logger = logging.getLogger(__name__)

MAX_DIM = 3
BOUNDARY_TOL = 1e-12


@dataclass(frozen=True)
class GridSpec:
    box: Tuple[Tuple[float, float], ...]
    resolution: int = 101
    rounds: int = 3
    keep: float = 0.05
    tolerance: float = 1e-9

    def __post_init__(self):
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        object.__setattr__(self, "box", box)
        if not 1 <= len(box) <= MAX_DIM:
            raise InvalidInputError(f"grid box must have 1 to {MAX_DIM} axes, got {len(box)}")
        for lo, hi in box:
            if not lo < hi:
                raise InvalidInputError(f"grid axis [{lo}, {hi}] is empty")
        if self.resolution < 3:
            raise InvalidInputError(f"grid resolution must be >= 3, got {self.resolution}")
        if self.rounds < 0:
            raise InvalidInputError(f"refinement rounds must be >= 0, got {self.rounds}")
        if not 0 < self.keep <= 1:
            raise InvalidInputError(f"keep fraction must lie in (0, 1], got {self.keep}")

    @property
    def dim(self) -> int:
        return len(self.box)

    @property
    def lower(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.box])

    @property
    def upper(self) -> np.ndarray:
        return np.array([hi for _, hi in self.box])

    def axis(self, k: int) -> np.ndarray:
        lo, hi = self.box[k]
        i = np.arange(self.resolution)
        return lo + (hi - lo) * (i / (self.resolution - 1))

    def spacing(self) -> np.ndarray:
        return (self.upper - self.lower) / (self.resolution - 1)

    def finest_spacing(self) -> np.ndarray:
        return self.spacing() / 2 ** self.rounds

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*(self.axis(k) for k in range(self.dim)), indexing="ij")
        return np.column_stack([m.reshape(-1) for m in mesh])

    def to_dict(self) -> dict:
        return {"box": [list(b) for b in self.box], "resolution": self.resolution,
                "rounds": self.rounds, "keep": self.keep, "tolerance": self.tolerance}


@dataclass
class MinResult:
    value: float
    representatives: np.ndarray
    tolerance: float
    feasible_found: bool
    history: List[float] = field(default_factory=list)
    evaluations: int = 0
    clipped: bool = False


@dataclass
class NearArgmin:
    points: np.ndarray
    value: float
    clipped: bool


@dataclass
class SequenceRow:
    nu: int
    result: MinResult
    reference_distance: Optional[float] = None


class _Evaluator:
    """Memoized evaluation of fn over grid points."""

    def __init__(self, fn: Callable, vectorized: bool):
        self.fn = fn
        self.vectorized = vectorized
        self.cache: Dict[Tuple[float, ...], float] = {}

    def __call__(self, points: np.ndarray):
        fresh = []
        for p in points:
            key = tuple(np.round(p, 14).tolist())
            if key not in self.cache:
                self.cache[key] = None
                fresh.append(key)
        if not fresh:
            return
        batch = np.array(fresh, dtype=float)
        if self.vectorized:
            values = np.asarray(self.fn(batch), dtype=float).reshape(-1)
        else:
            values = np.array([float(self.fn(p)) for p in batch])
        if np.any(np.isnan(values)):
            bad = batch[np.isnan(values)][0]
            raise IndeterminateFormError(f"objective returned NaN at {bad.tolist()}")
        for key, v in zip(fresh, values):
            self.cache[key] = float(v)

    def arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        pts = np.array(list(self.cache.keys()), dtype=float)
        vals = np.array(list(self.cache.values()), dtype=float)
        return pts, vals


def _sorted_rows(points: np.ndarray) -> np.ndarray:
    if len(points) == 0:
        return points
    return points[np.lexsort(points.T[::-1])]


def _on_boundary(points: np.ndarray, spec: GridSpec) -> bool:
    if len(points) == 0:
        return False
    return bool(np.any(np.isclose(points, spec.lower, atol=BOUNDARY_TOL) |
                       np.isclose(points, spec.upper, atol=BOUNDARY_TOL)))


def _search(fn: Callable, spec: GridSpec, vectorized: bool) -> Tuple[_Evaluator, List[float]]:
    ev = _Evaluator(fn, vectorized)
    ev(spec.points())
    _, vals = ev.arrays()
    history = [float(vals.min())]
    stencil = np.array(list(itertools.product((-1.0, 0.0, 1.0), repeat=spec.dim)))
    h = spec.spacing()
    for _ in range(spec.rounds):
        h = h / 2
        pts, vals = ev.arrays()
        finite = np.isfinite(vals)
        if not finite.any():
            history.append(history[-1])
            continue
        fvals, fpts = vals[finite], pts[finite]
        count = max(1, math.ceil(spec.keep * len(fvals)))
        cutoff = np.sort(fvals)[count - 1] + spec.tolerance
        seeds = fpts[fvals <= cutoff]
        candidates = (seeds[:, None, :] + stencil[None, :, :] * h).reshape(-1, spec.dim)
        ev(np.clip(candidates, spec.lower, spec.upper))
        _, vals = ev.arrays()
        history.append(float(vals.min()))
    return ev, history


def grid_minimize(fn: Callable, spec: GridSpec, vectorized: bool = False) -> MinResult:
    """Minimize fn over spec.box; fn maps a (dim,) point (or a (k, dim) batch when vectorized) to XReal."""
    ev, history = _search(fn, spec, vectorized)
    pts, vals = ev.arrays()
    best = float(vals.min())
    if best == math.inf:
        reps = np.empty((0, spec.dim))
    else:
        reps = _sorted_rows(pts[vals <= best + spec.tolerance])
    logger.debug("grid search: %d evaluations, best %.6g, %d representatives", len(vals), best, len(reps))
    return MinResult(
        value=best,
        representatives=reps,
        tolerance=spec.tolerance,
        feasible_found=best < math.inf,
        history=history,
        evaluations=len(vals),
        clipped=_on_boundary(reps, spec),
    )


def near_argmin(fn: Callable, spec: GridSpec, eps: float, vectorized: bool = False) -> NearArgmin:
    """All evaluated points within eps (plus grid tolerance) of the minimum."""
    if eps < 0:
        raise InvalidInputError(f"eps must be nonnegative, got {eps}")
    ev, _ = _search(fn, spec, vectorized)
    pts, vals = ev.arrays()
    best = float(vals.min())
    if best == math.inf:
        return NearArgmin(np.empty((0, spec.dim)), best, False)
    chosen = _sorted_rows(pts[vals <= best + eps + spec.tolerance])
    return NearArgmin(chosen, best, _on_boundary(chosen, spec))


def excess(points: np.ndarray, reference: np.ndarray) -> float:
    """max over points of the distance to the reference set."""
    if len(points) == 0:
        return math.inf
    ref = np.atleast_2d(np.asarray(reference, dtype=float))
    return float(cdist(points, ref).min(axis=1).max())


def _solve_one(family: Callable[[int], Callable], spec: GridSpec, nu: int, reference, vectorized: bool) -> SequenceRow:
    result = grid_minimize(family(nu), spec, vectorized)
    dist = None if reference is None else excess(result.representatives, reference)
    return SequenceRow(nu=nu, result=result, reference_distance=dist)


def minimize_sequence(family: Callable[[int], Callable], spec: GridSpec, nus: Sequence[int],
                      reference=None, vectorized: bool = False) -> List[SequenceRow]:
    """grid_minimize(family(nu)) for every nu, ordered by nu."""
    logger.info("Minimizing a family over %d values of nu", len(nus))
    rows = Parallel(n_jobs=config.WORKERS)(
        delayed(_solve_one)(family, spec, nu, reference, vectorized) for nu in nus
    )
    return sorted(rows, key=lambda r: r.nu)
