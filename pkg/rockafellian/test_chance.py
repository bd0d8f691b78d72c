import logging
import math

import numpy as np
import pytest

from rockafellian.chance import (
    ChanceConstraint,
    ChanceProblem,
    ball,
    chance_phi,
    distance_to_set,
    halfspace,
    in_M,
    interval,
    membership,
    penalized_s1,
    penalized_s2,
    s2_breakdown,
    singleton,
    to_composite,
    union,
    violation,
)
from rockafellian.distributions import make_discrete, perturb
from rockafellian.errors import EmptySetError
from rockafellian.model import quadratic
from rockafellian.presets import get_preset


def test_membership_moving_singleton():
    assert membership(singleton(0.0, coef=1.0), [1.0], [1.0])
    assert not membership(singleton(0.0, coef=1.0), [1.0], [0.0])


def test_membership_empty_sets():
    assert not membership(interval(1.0, 0.0), [0.0], [0.5])
    gated = interval(0.0, 1.0, gate=(1.0, 2.0))
    assert not membership(gated, [0.0], [0.5])
    assert membership(gated, [1.5], [0.5])


def test_distance_to_set():
    assert distance_to_set(interval(0.0, 1.0), [0.0], [1.5]) == pytest.approx(0.5)
    assert distance_to_set(interval(0.0, 1.0), [0.0], [0.3]) == 0.0
    assert distance_to_set(ball([0.0, 0.0], 1.0), [0.0], [2.0, 0.0]) == pytest.approx(1.0)
    assert distance_to_set(halfspace([0.0, 2.0], 2.0), [0.0], [0.0, 3.0]) == pytest.approx(2.0)


def test_distance_to_empty_set_raises():
    with pytest.raises(EmptySetError):
        distance_to_set(interval(0.0, 1.0, gate=(1.0, 2.0)), [0.0], [0.5])


def test_union_takes_nearest_member():
    both = union(interval(-2.0, -1.0), interval(1.0, 2.0))
    assert distance_to_set(both, [0.0], [0.5]) == pytest.approx(0.5)
    assert both.intervals([0.0]) == [(-2.0, -1.0), (1.0, 2.0)]
    assert both.breakpoints([0.0]) == [-2.0, -1.0, 1.0, 2.0]


def test_set_builders_reject_bad_shapes():
    with pytest.raises(ValueError):
        halfspace([0.0], 1.0)
    with pytest.raises(ValueError):
        union(interval(0.0, 1.0), ball([0.0, 0.0], 1.0))
    with pytest.raises(ValueError):
        ChanceConstraint(interval(0.0, 1.0), 1.5)


def test_halfspace_intervals():
    assert halfspace([1.0], 2.0).intervals([0.0]) == [(-math.inf, 2.0)]
    assert halfspace([-1.0], 1.0).intervals([0.0]) == [(-1.0, math.inf)]


def test_upper_shift_enlarges():
    grown = interval(0.0, 1.0).with_upper_shift(0.5)
    assert grown.intervals([0.0]) == [(0.0, 1.5)]


def test_chance_phi(finite_one):
    cp = finite_one.chance
    assert chance_phi(cp, cp.distribution, [0.2]) == pytest.approx(0.04)
    assert chance_phi(cp, perturb(finite_one.perturbation, 1), [0.2]) == math.inf


def test_chance_phi_vacuous_levels(two_atoms):
    cp = ChanceProblem("vacuous", quadratic(), (ChanceConstraint(singleton(5.0), 0.0),), two_atoms)
    assert chance_phi(cp, two_atoms, [0.7]) == pytest.approx(0.49)


@pytest.mark.parametrize("nu", [1, 3, 10])
def test_penalized_s1_finite_one(finite_one, nu):
    cp = finite_one.chance
    lam = nu ** -0.5
    mu_nu = perturb(finite_one.perturbation, nu)
    assert penalized_s1(cp, mu_nu, lam, 1.0, [0.0]) == pytest.approx((1.0 / lam) / (nu + 1))


def test_penalized_s1_feasible_point(threshold):
    assert penalized_s1(threshold, threshold.distribution, 0.01, 1.0, [1.5]) == pytest.approx(1.5)


def test_penalized_s1_grows_as_lambda_shrinks(finite_one):
    cp = finite_one.chance
    mu_nu = perturb(finite_one.perturbation, 2)
    values = [penalized_s1(cp, mu_nu, lam, 2.0, [0.1]) for lam in (1.0, 0.1, 0.01)]
    assert values[0] < values[1] < values[2]


def test_penalized_s2_small_theta_matches_s1(threshold):
    mu_nu = make_discrete([0.0, 1.0], [0.25, 0.75])
    s1 = penalized_s1(threshold, mu_nu, 0.1, 1.0, [0.5])
    s2 = penalized_s2(threshold, mu_nu, 0.1, 1e-3, 1.0, [0.5])
    assert s1 == pytest.approx(3.0)
    assert s2 == pytest.approx(s1)


def test_penalized_s2_atoms_inside_set(threshold, two_atoms):
    assert penalized_s2(threshold, two_atoms, 0.1, 1.0, 1.0, [1.5]) == pytest.approx(1.5)


def test_penalized_s2_vacuous_level(two_atoms):
    cp = ChanceProblem("vacuous", quadratic(), (ChanceConstraint(singleton(5.0), 0.0),), two_atoms)
    assert penalized_s2(cp, two_atoms, 0.1, 0.5, 1.0, [0.3]) == pytest.approx(0.09)


def test_penalized_s2_counts_empty_set_at_its_level(caplog):
    cp = get_preset("discrete-I").chance
    with caplog.at_level(logging.WARNING, logger="rockafellian.chance"):
        terms = s2_breakdown(cp, cp.distribution, 1.0, [0.0])
    assert any(r.levelno == logging.WARNING and "empty" in r.getMessage() for r in caplog.records)
    assert terms[0].empty
    assert terms[0].value == pytest.approx(0.5)
    assert penalized_s2(cp, cp.distribution, 1.0, 1.0, 1.0, [0.0]) == pytest.approx(0.5)


def test_penalized_s2_rejects_bad_theta(threshold):
    with pytest.raises(ValueError):
        penalized_s2(threshold, threshold.distribution, 0.1, 0.0, 1.0, [0.5])


def test_in_M(finite_one, threshold):
    cp = finite_one.chance
    nu = 3
    mu_nu = perturb(finite_one.perturbation, nu)
    assert in_M(cp, mu_nu, [1.0 / (nu + 1)], [0.0])
    assert not in_M(cp, mu_nu, [0.0], [0.0])
    assert in_M(cp, mu_nu, [0.5], [0.8])
    assert not in_M(threshold, threshold.distribution, [1.0], [3.0])
    with pytest.raises(ValueError):
        in_M(cp, mu_nu, [0.0, 0.0], [0.0])


@pytest.mark.parametrize("nu", [1, 4])
def test_violation_finite_one(finite_one, nu):
    cp = finite_one.chance
    mu_nu = perturb(finite_one.perturbation, nu)
    for x in (-0.5, 0.0, 0.9):
        assert violation(cp, mu_nu, [x]).worst == pytest.approx(-1.0 / (nu + 1))


def test_violation_feasible_and_vacuous(threshold, two_atoms):
    assert violation(threshold, two_atoms, [1.0]).worst >= 0.0
    cp = ChanceProblem("vacuous", quadratic(), (ChanceConstraint(interval(0.5, 2.0), 0.0),), two_atoms)
    report = violation(cp, two_atoms, [0.0])
    assert report.worst == pytest.approx(0.5)
    assert report.slacks == pytest.approx([0.5])


def test_to_composite_needs_a_distribution():
    cp = ChanceProblem("bare", quadratic(), (ChanceConstraint(singleton(0.0), 0.5),))
    with pytest.raises(ValueError):
        to_composite(cp)


def test_to_composite_builds_indicator_components(finite_one):
    problem = to_composite(finite_one.chance)
    assert problem.m == 1
    xi = np.array([[0.0], [1.0]])
    assert np.asarray(problem.components[0](xi, np.array([0.0]))).tolist() == pytest.approx([-0.5, 0.5])
