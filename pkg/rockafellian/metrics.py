"""
Probability metrics between atomic distributions: total variation,
Wasserstein-1, bounded Lipschitz, Fortet-Mourier, the minimal information
metric of a problem, and the KL divergence.

The sup over test functions in BL/FM is evaluated as a linear program on the
union of the atoms (scipy HiGHS).
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.optimize import linprog
from scipy.spatial.distance import cdist
from scipy.special import rel_entr

from . import config
from .distributions import DiscreteDistribution, Uniform1D, expectation, group_atoms
from .errors import (InsufficientDataError, InvalidInputError, LPCapExceededError, LPFailureError,
                     UnsupportedCombinationError)
from .schemas import MetricTag

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MetricKind:
    tag: MetricTag
    beta: float = 1.0

    def __post_init__(self):
        if self.tag == MetricTag.FM and self.beta < 1:
            raise InvalidInputError(f"Fortet-Mourier order must be >= 1, got {self.beta}")


@dataclass(frozen=True)
class LPSolution:
    value: float
    x: np.ndarray
    max_violation: float


@dataclass(frozen=True)
class LPProblem:
    """min c.x  s.t.  A_ub x <= b_ub, A_eq x = b_eq, bounds."""
    c: np.ndarray
    bounds: Tuple[Tuple[Optional[float], Optional[float]], ...]
    A_ub: Optional[sparse.spmatrix] = None
    b_ub: Optional[np.ndarray] = None
    A_eq: Optional[sparse.spmatrix] = None
    b_eq: Optional[np.ndarray] = None

    def __post_init__(self):
        n = len(self.c)
        if len(self.bounds) != n:
            raise InvalidInputError(f"{len(self.bounds)} bounds for {n} variables")
        for A, b in ((self.A_ub, self.b_ub), (self.A_eq, self.b_eq)):
            if A is not None and (A.shape[1] != n or A.shape[0] != len(b)):
                raise InvalidInputError(f"constraint block of shape {A.shape} does not match "
                                 f"{n} variables and {len(b)} right-hand sides")

    def max_violation(self, x: np.ndarray) -> float:
        worst = 0.0
        if self.A_ub is not None and self.A_ub.shape[0]:
            worst = max(worst, float(np.max(self.A_ub @ x - self.b_ub)))
        if self.A_eq is not None and self.A_eq.shape[0]:
            worst = max(worst, float(np.max(np.abs(self.A_eq @ x - self.b_eq))))
        lo = np.array([-np.inf if b[0] is None else b[0] for b in self.bounds])
        hi = np.array([np.inf if b[1] is None else b[1] for b in self.bounds])
        worst = max(worst, float(np.max(lo - x)), float(np.max(x - hi)))
        return worst

    def solve(self) -> LPSolution:
        res = linprog(self.c, A_ub=self.A_ub, b_ub=self.b_ub, A_eq=self.A_eq, b_eq=self.b_eq,
                      bounds=list(self.bounds), method="highs")
        if res.status != 0:
            raise LPFailureError(f"linprog failed with status {res.status}: {res.message}")
        violation = self.max_violation(res.x)
        if violation > config.LP_FEASIBILITY_TOL:
            logger.warning("LP solution violates constraints by %.3e", violation)
        return LPSolution(value=float(res.fun), x=res.x, max_violation=violation)


def union_support(mu1: DiscreteDistribution, mu2: DiscreteDistribution):
    """Atoms of both distributions merged; returns (atoms, p, q) on the union."""
    if not (isinstance(mu1, DiscreteDistribution) and isinstance(mu2, DiscreteDistribution)):
        raise UnsupportedCombinationError("metric needs two atomic distributions")
    if mu1.dim != mu2.dim:
        raise UnsupportedCombinationError(f"dimension mismatch: R^{mu1.dim} vs R^{mu2.dim}")
    atoms, groups = group_atoms(np.vstack([mu1.atoms, mu2.atoms]))
    s = len(atoms)
    p = np.bincount(groups[:mu1.size], weights=mu1.weights, minlength=s)
    q = np.bincount(groups[mu1.size:], weights=mu2.weights, minlength=s)
    return atoms, p, q


def tv(mu1: DiscreteDistribution, mu2: DiscreteDistribution) -> float:
    """sum |p - q| over the union of atoms (range [0, 2])."""
    _, p, q = union_support(mu1, mu2)
    return float(np.abs(p - q).sum())


def _w1_line(atoms: np.ndarray, p: np.ndarray, q: np.ndarray) -> float:
    t = atoms[:, 0]
    gaps = np.diff(t)
    cdf_gap = np.abs(np.cumsum(p) - np.cumsum(q))[:-1]
    return float(np.sum(cdf_gap * gaps))


def _w1_uniform(dist: DiscreteDistribution, uniform: Uniform1D) -> float:
    """int |F_n - F_U| for an atomic law on the line against a uniform one."""
    if dist.dim != 1:
        raise UnsupportedCombinationError("atomic-vs-uniform W1 is only defined in 1-D")
    t = np.unique(np.concatenate([dist.atoms[:, 0], [uniform.lower, uniform.upper]]))
    mass = np.bincount(np.searchsorted(t, dist.atoms[:, 0]), weights=dist.weights, minlength=len(t))
    step = np.cumsum(mass)[:-1]
    e0 = step - uniform.cdf(t[:-1])
    e1 = step - uniform.cdf(t[1:])
    h = np.diff(t)
    same_sign = e0 * e1 >= 0
    denom = np.where(same_sign, 1.0, np.abs(e0) + np.abs(e1))
    piece = np.where(same_sign, 0.5 * (np.abs(e0) + np.abs(e1)), 0.5 * (e0 ** 2 + e1 ** 2) / denom)
    return float(np.sum(piece * h))


def _check_cap(*sizes: int):
    cap = config.LP_ATOM_CAP
    if max(sizes) > cap:
        raise LPCapExceededError(f"LP over {max(sizes)} atoms exceeds the cap of {cap}")


def transport_problem(mu1: DiscreteDistribution, mu2: DiscreteDistribution) -> LPProblem:
    s1, s2 = mu1.size, mu2.size
    cost = cdist(mu1.atoms, mu2.atoms).ravel()
    rows = sparse.kron(sparse.eye(s1), np.ones((1, s2)))
    cols = sparse.kron(np.ones((1, s1)), sparse.eye(s2))
    return LPProblem(c=cost, bounds=tuple((0.0, None) for _ in range(s1 * s2)),
                     A_eq=sparse.vstack([rows, cols]).tocsr(),
                     b_eq=np.concatenate([mu1.weights, mu2.weights]))


def wasserstein1(mu1, mu2) -> float:
    """Exact W1: CDF integral on the line, transportation LP in R^d, d >= 2."""
    if isinstance(mu1, Uniform1D) and isinstance(mu2, DiscreteDistribution):
        return _w1_uniform(mu2, mu1)
    if isinstance(mu2, Uniform1D) and isinstance(mu1, DiscreteDistribution):
        return _w1_uniform(mu1, mu2)
    if not (isinstance(mu1, DiscreteDistribution) and isinstance(mu2, DiscreteDistribution)):
        raise UnsupportedCombinationError("W1 needs at least one atomic distribution")
    atoms, p, q = union_support(mu1, mu2)
    if atoms.shape[1] == 1:
        return _w1_line(atoms, p, q)
    _check_cap(mu1.size, mu2.size)
    return max(0.0, transport_problem(mu1, mu2).solve().value)


def _pairs(atoms: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Pairs (j, k) whose Lipschitz rows imply all others.

    On the line consecutive atoms suffice; in R^d every pair is needed.
    """
    s = len(atoms)
    if atoms.shape[1] == 1:
        order = np.argsort(atoms[:, 0], kind="stable")
        return order[:-1], order[1:]
    j, k = np.triu_indices(s, k=1)
    return j, k


def _lipschitz_rows(j: np.ndarray, k: np.ndarray, s: int):
    r = len(j)
    idx = np.arange(r)
    plus = sparse.csr_matrix((np.ones(r), (idx, j)), shape=(r, s))
    minus = sparse.csr_matrix((np.ones(r), (idx, k)), shape=(r, s))
    return sparse.vstack([plus - minus, minus - plus]).tocsr()


def bl_problem(mu1: DiscreteDistribution, mu2: DiscreteDistribution) -> LPProblem:
    atoms, p, q = union_support(mu1, mu2)
    _check_cap(len(atoms))
    j, k = _pairs(atoms)
    gaps = np.linalg.norm(atoms[j] - atoms[k], axis=1)
    return LPProblem(c=-(p - q), bounds=tuple((-1.0, 1.0) for _ in range(len(atoms))),
                     A_ub=_lipschitz_rows(j, k, len(atoms)), b_ub=np.concatenate([gaps, gaps]))


def fm_problem(beta: float, mu1: DiscreteDistribution, mu2: DiscreteDistribution) -> LPProblem:
    atoms, p, q = union_support(mu1, mu2)
    _check_cap(len(atoms))
    j, k = _pairs(atoms)
    norms = np.linalg.norm(atoms, axis=1)
    scale = np.maximum(1.0, np.maximum(norms[j], norms[k])) ** (beta - 1.0)
    gaps = scale * np.linalg.norm(atoms[j] - atoms[k], axis=1)
    # f is defined up to a constant; pin the first coordinate
    bounds = ((0.0, 0.0),) + tuple((None, None) for _ in range(len(atoms) - 1))
    return LPProblem(c=-(p - q), bounds=bounds,
                     A_ub=_lipschitz_rows(j, k, len(atoms)), b_ub=np.concatenate([gaps, gaps]))


def bounded_lipschitz(mu1: DiscreteDistribution, mu2: DiscreteDistribution) -> float:
    """sup sum f (p - q) over |f| <= 1, |f_j - f_k| <= |xi_j - xi_k|."""
    problem = bl_problem(mu1, mu2)
    if len(problem.c) == 1:
        return 0.0
    return max(0.0, -problem.solve().value)


def fortet_mourier(beta: float, mu1: DiscreteDistribution, mu2: DiscreteDistribution) -> float:
    if beta < 1:
        raise InvalidInputError(f"Fortet-Mourier order must be >= 1, got {beta}")
    problem = fm_problem(beta, mu1, mu2)
    if len(problem.c) == 1:
        return 0.0
    return max(0.0, -problem.solve().value)


@dataclass(frozen=True)
class MinimalInformationBound:
    """Grid lower bound on d_mi; the grid size travels with the value."""
    value: float
    grid_points: int
    argmax: Optional[List[float]] = None


def minimal_information(problem, mu1, mu2, xgrid) -> MinimalInformationBound:
    """max over x in xgrid and components i of |E_mu1[g_i(., x)] - E_mu2[g_i(., x)]|."""
    grid = np.asarray(xgrid, dtype=float)
    if grid.size == 0:
        raise InsufficientDataError("minimal information metric needs a nonempty x grid")
    grid = grid.reshape(-1, problem.n)
    best, where = 0.0, None
    for x in grid:
        gap = float(np.max(np.abs(expectation(mu1, problem.components, x)
                                  - expectation(mu2, problem.components, x))))
        if where is None or gap > best:
            best, where = gap, x.tolist()
    return MinimalInformationBound(value=best, grid_points=len(grid), argmax=where)


def kl_divergence(mu1: DiscreteDistribution, mu2: DiscreteDistribution) -> float:
    """sum p log(p/q); +inf when mu1 charges an atom mu2 does not."""
    _, p, q = union_support(mu1, mu2)
    return float(np.sum(rel_entr(p, q)))


def distance(kind: MetricKind, mu1, mu2, problem=None, xgrid: Optional[Sequence] = None) -> float:
    """Dispatch on the metric tag; MI needs the problem and an x grid."""
    if kind.tag == MetricTag.TV:
        return tv(mu1, mu2)
    if kind.tag == MetricTag.W1:
        return wasserstein1(mu1, mu2)
    if kind.tag == MetricTag.BL:
        return bounded_lipschitz(mu1, mu2)
    if kind.tag == MetricTag.FM:
        return fortet_mourier(kind.beta, mu1, mu2)
    if kind.tag == MetricTag.KL:
        return kl_divergence(mu1, mu2)
    if kind.tag == MetricTag.MI:
        if problem is None or xgrid is None:
            raise UnsupportedCombinationError("minimal information metric needs a problem and an x grid")
        return minimal_information(problem, mu1, mu2, xgrid).value
    raise UnsupportedCombinationError(f"unknown metric {kind.tag}")
