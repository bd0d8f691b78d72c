import math

import pytest

from rockafellian.distributions import Uniform1D, empirical
from rockafellian.errors import ConfigError, UnknownClaimError
from rockafellian.experiments import EXPECTATIONS, ExampleRunner, Expectation, compare_expected
from rockafellian.schemas import RunConfig, RunVariant

HORIZON = 5


@pytest.fixture(scope="module")
def runner():
    return ExampleRunner(seed=0, workers=1)


@pytest.fixture(scope="module")
def finite_one_report(runner):
    return runner.run_preset("finite-I", HORIZON)


def _failures(verdicts):
    return [v.claim for v in verdicts if not v.passed]


def test_finite_one_closed_forms(finite_one_report):
    claims = ["plugin-infinite", "value-closed-form", "u-closed-form", "x-at-zero"]
    verdicts = compare_expected(finite_one_report, claims)
    assert [v.claim for v in verdicts] == claims
    assert _failures(verdicts) == []


def test_finite_one_report_shape(finite_one_report):
    assert finite_one_report.horizon == HORIZON
    assert finite_one_report.column("nu") == [1, 2, 3, 4, 5]
    assert finite_one_report.inf_phi == 0.0
    last = finite_one_report.rows[-1]
    assert last.inf_plugin == math.inf
    assert last.plugin_x is None
    assert last.u == pytest.approx([-1.0 / 6.0])
    assert last.d_mi == pytest.approx(1.0 / 6.0)
    assert last.d_tv == pytest.approx(2.0 / 6.0)
    assert last.worst_violation == pytest.approx(0.0)


def test_short_horizon_misses_the_small_value_claim(finite_one_report):
    (verdict,) = compare_expected(finite_one_report, ["value-small"])
    assert not verdict.passed
    assert verdict.nu == HORIZON
    assert verdict.observed == pytest.approx(math.sqrt(5) / 6)


@pytest.mark.parametrize("name", ["finite-II", "discrete-I", "discrete-II"])
def test_registered_claims_hold(runner, name):
    report = runner.run_preset(name, HORIZON)
    verdicts = compare_expected(report)
    assert len(verdicts) == len(EXPECTATIONS[name])
    assert _failures(verdicts) == []


def test_envelope_rows_follow_identity_rows(runner):
    report = runner.run_preset("discrete-I", HORIZON)
    variants = [r.variant for r in report.rows]
    assert variants == [RunVariant.IDENTITY, RunVariant.ENVELOPE] * HORIZON
    assert report.column("inf_f", RunVariant.IDENTITY) == pytest.approx([nu / 2.0 for nu in range(1, 6)])


def test_planted_wrong_expectation_fails(finite_one_report):
    (verdict,) = compare_expected(finite_one_report, {"wrong": Expectation("inf_f", expected=123.0)})
    assert not verdict.passed
    assert verdict.nu == 1
    assert verdict.delta == pytest.approx(0.5 - 123.0)


def test_unknown_claim(finite_one_report):
    with pytest.raises(UnknownClaimError):
        compare_expected(finite_one_report, ["no-such-claim"])


def test_unknown_column(finite_one_report):
    with pytest.raises(ConfigError):
        compare_expected(finite_one_report, {"bad": Expectation("not_a_column", expected=0.0)})


def test_horizon_below_minimum(runner):
    with pytest.raises(ConfigError):
        runner.run_preset("finite-I", 4)


def test_rate_s1_study(runner):
    report, fit = runner.run_rate("s1", 20)
    assert fit is not None
    assert fit.slope == pytest.approx(0.5, abs=1e-6)
    assert report.rate_fit["constant"] >= 1.0
    assert _failures(compare_expected(report)) == []
    for row in report.rows:
        assert row.value_error == pytest.approx(math.sqrt(0.5 / row.nu), abs=1e-9)
        assert row.dist_to_argmin == pytest.approx(0.0, abs=1e-9)


def test_custom_config_run(runner):
    cfg = RunConfig.model_validate({
        "problem": {"objective": {"kind": "affine", "coef": 1.0, "box": [0.0, 2.0]}},
        "distribution": {"kind": "atoms", "atoms": [0.0, 1.0], "weights": [0.5, 0.5]},
        "perturbation": {"scheme": "weight-shift", "scale": 0.5, "offset": 0.0},
        "schedule": {"proposition": "rate-s1"},
        "constraints": [{"set": {"class": "interval", "lower": [-10.0], "upper": [0.0], "upper_coef": [1.0]},
                         "level": 0.5}],
        "solver": {"resolution": 41},
        "horizon": HORIZON,
    })
    report = runner.run_config(cfg)
    assert report.preset == "custom"
    assert report.horizon == HORIZON
    assert report.inf_phi == pytest.approx(0.0)
    assert all(row.inf_plugin == pytest.approx(1.0) for row in report.rows)
    assert all(row.value_error is not None for row in report.rows)


def test_epi_distance_study(runner):
    rows = runner.epi_distance_study("finite-I", nus=(5, 10, 20, 40), resolution=81)
    assert [nu for nu, _ in rows] == [5, 10, 20, 40]
    estimates = [est.estimate for _, est in rows]
    assert all(math.isfinite(e) and e <= 1.0 for e in estimates)
    assert all(later <= earlier for earlier, later in zip(estimates, estimates[1:]))
    assert estimates[-1] <= estimates[0] / 4
    assert not any(est.resolution_limited for _, est in rows)


def test_empirical_claims(runner):
    report = runner.run_preset("empirical-I", HORIZON)
    assert report.column("nu") == [1, 2, 4, 8, 16]
    assert _failures(compare_expected(report)) == []
    assert all(d is not None for d in report.column("d_w1"))


def test_empirical_value_shrinks_on_the_seed_average():
    seeds = range(20)
    firsts, lasts = [], []
    for seed in seeds:
        values = ExampleRunner(seed=seed, workers=1).run_preset("empirical-I", 12).column("inf_f")
        firsts.append(values[0])
        lasts.append(values[-1])
    assert sum(lasts) / len(lasts) < sum(firsts) / len(firsts)


@pytest.mark.parametrize("seed", range(1, 11))
def test_empirical_value_matches_the_sample_mean_per_seed(seed):
    report = ExampleRunner(seed=seed, workers=1).run_preset("empirical-I", 10)
    for row in report.rows:
        mean = empirical(Uniform1D(-1.0, 1.0), row.nu, seed).mean()[0]
        assert row.inf_f == pytest.approx(abs(mean) / row.lam, rel=1e-9, abs=1e-12)
        assert row.value_error == pytest.approx(row.inf_f)
        assert abs(row.x[0]) <= 0.05


def test_empirical_final_value_bounded_on_most_seeds():
    finals = [ExampleRunner(seed=seed, workers=1).run_preset("empirical-I", 10).rows[-1].inf_f
              for seed in range(1, 11)]
    assert sum(v <= 1.0 for v in finals) >= 9


def test_runner_is_deterministic_for_a_seed():
    reports = [ExampleRunner(seed=3, workers=1).run_preset("empirical-I", 6).model_dump() for _ in range(2)]
    assert reports[0] == reports[1]
