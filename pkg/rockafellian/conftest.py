import pytest

from rockafellian import config
from rockafellian.distributions import Uniform1D, make_discrete
from rockafellian.presets import get_preset


@pytest.fixture
def two_atoms():
    """(1/2, 1/2) on {0, 1}."""
    return make_discrete([0.0, 1.0], [0.5, 0.5])


@pytest.fixture
def uniform():
    return Uniform1D(-1.0, 1.0)


@pytest.fixture
def finite_one():
    return get_preset("finite-I")


@pytest.fixture
def finite_two():
    return get_preset("finite-II")


@pytest.fixture
def threshold():
    """The rate-s1 chance problem: x on [0, 2] with mu((-inf, x]) >= 1/2."""
    return get_preset("rate-s1").chance


@pytest.fixture
def report_dir(tmp_path, monkeypatch):
    monkeypatch.setattr(config, "REPORT_DIR", str(tmp_path))
    return tmp_path
