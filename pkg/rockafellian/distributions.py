"""
Probability distributions used throughout the package: finite/discrete atomic
measures, the 1-D uniform law, empirical measures, and perturbation sequences
mu^nu built from a base distribution.

All distribution objects are immutable once constructed.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate

from . import config
from .errors import DistributionError, UnsupportedCombinationError
from .schemas import PerturbationScheme

logger = logging.getLogger(__name__)


def as_points(values, dim: Optional[int] = None) -> np.ndarray:
    """Coerce scalars / 1-D lists / 2-D arrays into an (s, d) float array.

    A flat list is read as s points in R^1; a point in R^d must be nested.
    """
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1) if dim in (None, 1) else arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise DistributionError(f"points must be at most 2-dimensional, got shape {arr.shape}")
    if dim is not None and arr.shape[1] != dim:
        raise DistributionError(f"expected points in R^{dim}, got R^{arr.shape[1]}")
    return arr


def group_atoms(points: np.ndarray, tol: float = config.MERGE_TOL) -> Tuple[np.ndarray, np.ndarray]:
    """Sort points lexicographically and merge coordinate-wise near duplicates.

    Returns (unique_points, group_index) where group_index[i] is the row of
    unique_points that points[i] was merged into.
    """
    order = np.lexsort(points.T[::-1])
    ordered = points[order]
    if len(ordered) > 1:
        jumps = np.any(np.abs(np.diff(ordered, axis=0)) > tol, axis=1)
        starts = np.concatenate([[True], jumps])
    else:
        starts = np.ones(len(ordered), dtype=bool)
    sorted_ids = np.cumsum(starts) - 1
    group_index = np.empty(len(points), dtype=int)
    group_index[order] = sorted_ids
    return ordered[starts], group_index


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    atoms: np.ndarray
    weights: np.ndarray
    tail_mass: float = 0.0

    def __post_init__(self):
        self.atoms.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def size(self) -> int:
        return int(self.weights.shape[0])

    @property
    def dim(self) -> int:
        return int(self.atoms.shape[1])

    @property
    def support(self) -> np.ndarray:
        """Atoms carrying positive mass."""
        return self.atoms[self.weights > 0]

    def mean(self) -> np.ndarray:
        return self.weights @ self.atoms

    def to_dict(self) -> dict:
        atoms = self.atoms[:, 0].tolist() if self.dim == 1 else self.atoms.tolist()
        return {"kind": "atoms", "atoms": atoms, "weights": self.weights.tolist()}


@dataclass(frozen=True)
class Uniform1D:
    lower: float
    upper: float

    def __post_init__(self):
        if not (np.isfinite(self.lower) and np.isfinite(self.upper)) or not self.lower < self.upper:
            raise DistributionError(f"Uniform1D needs finite lower < upper, got [{self.lower}, {self.upper}]")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def dim(self) -> int:
        return 1

    def cdf(self, t):
        return np.clip((np.asarray(t, dtype=float) - self.lower) / self.width, 0.0, 1.0)

    def to_dict(self) -> dict:
        return {"kind": "uniform1d", "lower": self.lower, "upper": self.upper}


Distribution = Union[DiscreteDistribution, Uniform1D]


def make_discrete(atoms, weights, tail_mass: float = 0.0) -> DiscreteDistribution:
    """Validate, normalize and merge an atomic distribution."""
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.size == 0:
        raise DistributionError("atom list is empty")
    points = as_points(atoms)
    if points.shape[0] != w.size:
        # a single point in R^d given flat
        if w.size != 1 or np.ndim(atoms) != 1:
            raise DistributionError(f"{points.shape[0]} atoms but {w.size} weights")
        points = points.reshape(1, -1)
    if not np.all(np.isfinite(points)):
        raise DistributionError("atoms must be finite")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise DistributionError(f"weights must be finite and nonnegative, got {w.tolist()}")
    total = w.sum()
    if total <= 0:
        raise DistributionError("total weight is zero")

    unique, groups = group_atoms(points)
    merged = np.bincount(groups, weights=w / total, minlength=len(unique))
    if len(unique) < len(points):
        logger.debug("Merged %d near-duplicate atoms", len(points) - len(unique))
    return DiscreteDistribution(atoms=unique, weights=merged, tail_mass=float(tail_mass))


def dirac(point) -> DiscreteDistribution:
    return make_discrete(as_points(point).reshape(1, -1), [1.0])


def from_sequence(atom_rule: Callable[[int], Sequence[float]], weight_rule: Callable[[int], float],
                  count: int) -> DiscreteDistribution:
    """Truncate a countable distribution sum_k w_k delta_{xi_k} after `count` atoms.

    The unassigned mass is reported as tail_mass and the kept weights are
    renormalized.
    """
    if count < 1:
        raise DistributionError("truncation count must be positive")
    atoms = np.vstack([as_points(atom_rule(k)).reshape(1, -1) for k in range(1, count + 1)])
    weights = np.array([weight_rule(k) for k in range(1, count + 1)], dtype=float)
    tail = max(0.0, 1.0 - float(weights.sum()))
    if tail > 0:
        logger.info("Truncated support after %d atoms, tail mass %.3e", count, tail)
    return make_discrete(atoms, weights, tail_mass=tail)


def make_generator(seed: int) -> np.random.Generator:
    """Counter-based, splittable generator for a 64-bit seed."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def empirical(dist: Distribution, nu: int, seed: int) -> DiscreteDistribution:
    """Empirical measure of nu iid draws; the draws for nu are the first nu of
    the stream for `seed`, so samples are nested in nu."""
    if nu < 1:
        raise DistributionError("empirical measure needs at least one sample")
    draws = make_generator(seed).random(nu)
    if isinstance(dist, Uniform1D):
        samples = (dist.lower + dist.width * draws).reshape(-1, 1)
    elif isinstance(dist, DiscreteDistribution):
        idx = np.searchsorted(np.cumsum(dist.weights), draws, side="right")
        samples = dist.atoms[np.minimum(idx, dist.size - 1)]
    else:
        raise UnsupportedCombinationError(f"cannot sample from {type(dist).__name__}")
    return make_discrete(samples, np.full(nu, 1.0 / nu))


@dataclass(frozen=True)
class MagnitudeRule:
    """nu -> scale * (nu + offset)^(-power)."""
    scale: float = 1.0
    power: float = 1.0
    offset: float = 1.0

    def __call__(self, nu: int) -> float:
        return self.scale * float(nu + self.offset) ** (-self.power)


@dataclass(frozen=True)
class EscapeRule:
    """Atom sequence xi_1 = anchor, xi_k = anchor + scale/k for k >= 2 (1-D)."""
    anchor: float = 1.0
    scale: float = 1.0

    def atom(self, k: int) -> float:
        return self.anchor if k == 1 else self.anchor + self.scale / k


@dataclass(frozen=True)
class PerturbationSequence:
    base: Distribution
    scheme: PerturbationScheme
    magnitude: MagnitudeRule = field(default_factory=MagnitudeRule)
    escape: EscapeRule = field(default_factory=EscapeRule)
    source: int = 0
    target: int = 1
    contaminant: Optional[Tuple[float, ...]] = None
    seed: int = 0

    def perturb(self, nu: int) -> DiscreteDistribution:
        return perturb(self, nu)


def _weight_shift(seq: PerturbationSequence, nu: int) -> DiscreteDistribution:
    base = seq.base
    if not isinstance(base, DiscreteDistribution) or base.size < 2:
        raise UnsupportedCombinationError("weight-shift needs a discrete base with at least two atoms")
    delta = seq.magnitude(nu)
    w = np.array(base.weights, dtype=float)
    w[seq.source] -= delta
    w[seq.target] += delta
    if w[seq.source] < -config.MERGE_TOL:
        raise DistributionError(
            f"weight-shift of {delta:.6g} at nu={nu} drives atom {seq.source} negative "
            f"(weights {w.tolist()})"
        )
    return make_discrete(base.atoms, np.maximum(w, 0.0))


def _tv_bounded(seq: PerturbationSequence, nu: int) -> DiscreteDistribution:
    base = seq.base
    if not isinstance(base, DiscreteDistribution) or seq.contaminant is None:
        raise UnsupportedCombinationError("tv-bounded needs a discrete base and a contaminant atom")
    eps = min(1.0, seq.magnitude(nu))
    z = as_points(seq.contaminant, dim=base.dim)
    atoms = np.vstack([base.atoms, z])
    weights = np.concatenate([(1.0 - eps) * base.weights, [eps]])
    return make_discrete(atoms, weights)


def _jitter(seq: PerturbationSequence, nu: int) -> DiscreteDistribution:
    base = seq.base
    if not isinstance(base, DiscreteDistribution):
        raise UnsupportedCombinationError("jitter needs a discrete base")
    atoms = np.array(base.atoms, dtype=float)
    atoms[:, 0] += seq.magnitude(nu)
    return make_discrete(atoms, base.weights)


def perturb(seq: PerturbationSequence, nu: int) -> DiscreteDistribution:
    """mu^nu for the sequence's scheme; deterministic in (seed, nu)."""
    if nu < 1:
        raise DistributionError(f"nu must be >= 1, got {nu}")
    if seq.scheme == PerturbationScheme.WEIGHT_SHIFT:
        return _weight_shift(seq, nu)
    if seq.scheme == PerturbationScheme.ATOM_ESCAPE:
        return dirac(seq.escape.atom(nu))
    if seq.scheme == PerturbationScheme.TV_BOUNDED:
        return _tv_bounded(seq, nu)
    if seq.scheme == PerturbationScheme.JITTER:
        return _jitter(seq, nu)
    if seq.scheme == PerturbationScheme.IID_EMPIRICAL:
        return empirical(seq.base, nu, seq.seed)
    raise UnsupportedCombinationError(f"unknown perturbation scheme {seq.scheme}")


def union_length(intervals: List[Tuple[float, float]], lower: float, upper: float) -> float:
    """Lebesgue measure of the union of closed intervals, clipped to [lower, upper]."""
    clipped = sorted(
        (max(lo, lower), min(hi, upper)) for lo, hi in intervals if min(hi, upper) > max(lo, lower)
    )
    total, cur_lo, cur_hi = 0.0, None, None
    for lo, hi in clipped:
        if cur_hi is None or lo > cur_hi:
            if cur_hi is not None:
                total += cur_hi - cur_lo
            cur_lo, cur_hi = lo, hi
        else:
            cur_hi = max(cur_hi, hi)
    if cur_hi is not None:
        total += cur_hi - cur_lo
    return total


def prob_of_set(dist: Distribution, event, x) -> float:
    """mu(H(x)) for a parametric set H (anything exposing contains/intervals)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if isinstance(dist, DiscreteDistribution):
        mask = event.contains(dist.atoms, x)
        return float(min(1.0, max(0.0, dist.weights[mask].sum())))
    if isinstance(dist, Uniform1D):
        intervals = event.intervals(x)
        return union_length(intervals, dist.lower, dist.upper) / dist.width
    raise UnsupportedCombinationError(f"prob_of_set not supported for {type(dist).__name__}")


def _components(integrand) -> tuple:
    if callable(integrand):
        return (integrand,)
    return tuple(integrand)


def expectation(dist: Distribution, integrand, x) -> np.ndarray:
    """E_mu[G(xi, x)] for a component function or a sequence of them.

    Components are called as g(xi, x) with xi an (s, d) array of points and
    return s values. Uniform1D integrals use adaptive quadrature split at the
    component's declared breakpoints (attribute `breakpoints(x)`), if any.
    """
    comps = _components(integrand)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if isinstance(dist, DiscreteDistribution):
        values = np.vstack([np.asarray(g(dist.atoms, x), dtype=float).reshape(-1) for g in comps])
        if not np.all(np.isfinite(values[:, dist.weights > 0])):
            raise DistributionError("integrand is not finite on an atom of the distribution")
        return values @ dist.weights

    if isinstance(dist, Uniform1D):
        out = np.empty(len(comps))
        for i, g in enumerate(comps):
            points = None
            if hasattr(g, "breakpoints"):
                inside = [p for p in g.breakpoints(x) if dist.lower < p < dist.upper]
                points = sorted(set(inside)) or None

            def scalar(t, g=g):
                return float(np.asarray(g(np.array([[t]]), x), dtype=float).reshape(-1)[0])

            value, _ = integrate.quad(scalar, dist.lower, dist.upper, points=points,
                                      epsabs=config.QUAD_ABS_TOL, limit=200)
            out[i] = value / dist.width
        return out

    raise UnsupportedCombinationError(f"expectation not supported for {type(dist).__name__}")
