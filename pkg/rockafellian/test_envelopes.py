import numpy as np
import pytest

from rockafellian.chance import ball, interval, membership, singleton
from rockafellian.envelopes import (
    EnvelopeConfig,
    RegularizedComponent,
    detail_envelope,
    epi_regularize,
    lipschitz_certificate,
    majorization_gap,
    moreau,
    pasch_hausdorff,
    regularize_all,
    regularize_points,
)
from rockafellian.errors import UnsupportedCombinationError
from rockafellian.model import ClosureComponent, IndicatorComponent
from rockafellian.presets import get_preset

UNIT = IndicatorComponent(0.5, interval(0.0, 1.0))
TWO_POINTS = np.array([[0.0], [1.0]])


def _identity(xi, x):
    return np.asarray(xi)[:, 0]


def _abs(xi, x):
    return np.abs(np.asarray(xi)[:, 0])


def test_indicator_envelope_outside_and_inside():
    cfg = EnvelopeConfig(1.0, 1.0)
    assert epi_regularize(UNIT, cfg, [1.5], [0.0]) == pytest.approx(0.0)
    assert epi_regularize(UNIT, cfg, [0.4], [0.0]) == pytest.approx(-0.5)
    assert epi_regularize(UNIT, cfg, [3.0], [0.0]) == pytest.approx(0.5)


def test_atomic_envelope_two_term_minimum():
    cfg = EnvelopeConfig(1.0, 0.5, TWO_POINTS)
    assert epi_regularize(ClosureComponent(_identity), cfg, [1.0], [0.0]) == pytest.approx(1.0)
    cheap = EnvelopeConfig(1.0, 2.0, TWO_POINTS)
    assert epi_regularize(ClosureComponent(_identity), cheap, [1.0], [0.0]) == pytest.approx(0.5)


def test_pasch_hausdorff_keeps_lipschitz_functions():
    grid = np.linspace(-1.0, 1.0, 21).reshape(-1, 1)
    for xi in grid[:, 0]:
        assert pasch_hausdorff(_abs, 1.0, [xi], [0.0], support=grid) == pytest.approx(abs(xi))


def test_pasch_hausdorff_is_monotone_in_theta():
    grid = np.linspace(-1.0, 1.0, 11).reshape(-1, 1)
    steep = ClosureComponent(lambda xi, x: 4.0 * np.abs(np.asarray(xi)[:, 0]))
    for xi in (-0.7, 0.2, 1.0):
        tight = pasch_hausdorff(steep, 0.5, [xi], [0.0], support=grid)
        loose = pasch_hausdorff(steep, 2.0, [xi], [0.0], support=grid)
        assert tight >= loose


def test_moreau_single_atom():
    origin = np.array([[0.0]])
    zero = ClosureComponent(lambda xi, x: np.zeros(len(xi)))
    assert moreau(zero, 0.5, [0.6], [0.0], support=origin) == pytest.approx(0.36)


def test_moreau_minorizes_on_the_atoms():
    grid = np.linspace(-1.0, 1.0, 9).reshape(-1, 1)
    g = ClosureComponent(lambda xi, x: np.sin(3.0 * np.asarray(xi)[:, 0]))
    for xi in grid[:, 0]:
        assert moreau(g, 0.3, [xi], [0.0], support=grid) <= g(np.array([[xi]]), np.array([0.0]))[0] + 1e-12


def test_moreau_small_theta_recovers_function():
    grid = np.linspace(-1.0, 1.0, 9).reshape(-1, 1)
    values = regularize_points(_identity, EnvelopeConfig(2.0, 1e-6, grid), grid, [0.0])
    assert values.tolist() == pytest.approx(grid[:, 0].tolist())


def test_continuous_support_needs_indicator_form():
    with pytest.raises(UnsupportedCombinationError):
        epi_regularize(ClosureComponent(_identity), EnvelopeConfig(1.0, 1.0), [0.5], [0.0])


@pytest.mark.parametrize("beta, theta", [(0.5, 1.0), (1.0, 0.0)])
def test_envelope_config_validates(beta, theta):
    with pytest.raises(ValueError):
        EnvelopeConfig(beta, theta)


def test_lipschitz_certificate():
    assert lipschitz_certificate(1.0, 0.25, 3.0) == pytest.approx(4.0)
    assert lipschitz_certificate(2.0, 1.0, 1.0) == pytest.approx(6.0)
    assert lipschitz_certificate(1.0, 1e9, 1.0) < 1e-8
    with pytest.raises(ValueError):
        lipschitz_certificate(1.0, 1.0, -1.0)


def test_regularized_components_minorize(finite_one):
    G = finite_one.problem.components
    atoms = np.linspace(-1.0, 2.0, 31)
    for theta in (0.1, 1.0):
        gap = majorization_gap(G, regularize_all(G, 1.0, theta), atoms, [[-0.5], [0.0], [1.0]])
        assert gap <= 1e-12


def test_regularized_component_breakpoints():
    reg = RegularizedComponent(UNIT, beta=1.0, theta=0.25)
    assert reg.breakpoints(np.array([0.0])) == pytest.approx([-0.25, 0.0, 0.25, 0.75, 1.0, 1.25])
    assert reg.bound == pytest.approx(0.5)


def test_enlarged_set_envelope():
    spec = get_preset("discrete-I")
    (g_nu,) = detail_envelope("enlarged-set", spec.problem.components, 4)
    assert membership(g_nu.event, [1.5], [1.25])
    assert not membership(g_nu.event, [0.0], [1.25])


def test_shifted_threshold_envelope():
    spec = get_preset("discrete-II")
    (g_nu,) = detail_envelope("shifted-threshold", spec.problem.components, 4)
    assert membership(g_nu.event, [1.0], [1.25])
    assert not membership(g_nu.event, [1.0], [1.3])


def test_detail_envelope_errors():
    with pytest.raises(UnsupportedCombinationError):
        detail_envelope("no-such-envelope", (UNIT,), 2)
    with pytest.raises(ValueError):
        detail_envelope("enlarged-set", (UNIT,), 0)
    with pytest.raises(UnsupportedCombinationError):
        detail_envelope("shifted-threshold", (IndicatorComponent(0.5, singleton(0.0)),), 2)


ENVELOPE_PARAMS = [(1.0, 0.25), (1.0, 1.0), (2.0, 0.25), (2.0, 1.0), (3.0, 0.5)]


@pytest.mark.parametrize("beta, theta", ENVELOPE_PARAMS)
@pytest.mark.parametrize("component", [
    IndicatorComponent(0.5, interval(0.0, 1.0)),
    IndicatorComponent(0.9, interval(-0.2, 0.2)),
    IndicatorComponent(0.3, ball([0.0, 0.0], 1.0)),
], ids=["interval", "thin-interval", "disc"])
def test_indicator_envelope_respects_the_lipschitz_certificate(component, beta, theta):
    rng = np.random.default_rng(11)
    dim = component.event.dim
    a = rng.uniform(-3.0, 3.0, size=(10_000, dim))
    b = a + rng.normal(scale=rng.choice([0.01, 0.3, 2.0], size=(10_000, 1)), size=(10_000, dim))
    reg = RegularizedComponent(component, beta, theta)
    x = np.array([0.0])
    gap = np.abs(reg(a, x) - reg(b, x))
    L = lipschitz_certificate(beta, theta, reg.bound)
    assert np.all(gap <= L * np.linalg.norm(a - b, axis=1) + 1e-12)


@pytest.mark.parametrize("beta, theta", ENVELOPE_PARAMS)
@pytest.mark.parametrize("dim", [1, 2])
def test_atomic_envelope_respects_the_lipschitz_certificate_on_the_support(dim, beta, theta):
    rng = np.random.default_rng(12)
    atoms = rng.uniform(-2.0, 2.0, size=(200, dim))
    g = ClosureComponent(lambda xi, x: np.sin(3.0 * np.asarray(xi)[:, 0]) * np.cos(np.asarray(xi)[:, -1]),
                         bound=1.0)
    values = RegularizedComponent(g, beta, theta, atoms)(atoms, np.array([0.0]))
    i, j = rng.integers(0, len(atoms), size=(2, 10_000))
    L = lipschitz_certificate(beta, theta, g.bound)
    assert np.all(np.abs(values[i] - values[j]) <= L * np.linalg.norm(atoms[i] - atoms[j], axis=1) + 1e-12)


@pytest.mark.parametrize("beta, theta", ENVELOPE_PARAMS)
def test_envelopes_stay_within_the_component_bound(beta, theta):
    rng = np.random.default_rng(13)
    x = np.array([0.0])

    component = IndicatorComponent(0.7, interval(-0.5, 0.5))
    values = RegularizedComponent(component, beta, theta)(rng.uniform(-4.0, 4.0, size=(10_000, 1)), x)
    assert np.all(np.abs(values) <= component.bound + 1e-12)
    assert values.min() >= component.level - 1.0 - 1e-12
    assert values.max() <= component.level + 1e-12

    atoms = rng.uniform(-2.0, 2.0, size=(300, 1))
    g = ClosureComponent(lambda xi, x: 2.0 * np.cos(5.0 * np.asarray(xi)[:, 0]), bound=2.0)
    on_support = RegularizedComponent(g, beta, theta, atoms)(atoms, x)
    assert np.all(np.abs(on_support) <= g.bound + 1e-12)
    assert np.all(on_support <= g(atoms, x) + 1e-12)
