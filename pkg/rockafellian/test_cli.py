import json

import pytest

from rockafellian.cli import EXIT_FAILED, EXIT_OK, EXIT_USAGE, dispatch, parse_config, serialize_config
from rockafellian.errors import ConfigError
from rockafellian.presets import preset_from_config
from rockafellian.schemas import PresetName, SetClass

CUSTOM_TOML = """
seed = 7
horizon = 5

[problem.objective]
kind = "affine"
coef = 1.0
box = [0.0, 2.0]

[distribution]
kind = "atoms"
atoms = [0.0, 1.0]
weights = [0.5, 0.5]

[perturbation]
scheme = "weight-shift"
scale = 0.5
offset = 0.0

[schedule]
proposition = "rate-s1"

[[constraints]]
level = 0.5
set = { class = "interval", lower = [-inf], upper = [0.0], upper_coef = [1.0] }
"""


@pytest.fixture
def write(tmp_path):
    def _write(name, payload):
        path = tmp_path / name
        path.write_text(payload if isinstance(payload, str) else json.dumps(payload), encoding="utf-8")
        return str(path)
    return _write


def test_parse_json_preset():
    cfg = parse_config('{"problem": {"preset": "finite-I"}, "horizon": 10}')
    assert cfg.problem.preset == PresetName.FINITE_I
    assert cfg.horizon == 10


def test_parse_toml_custom():
    cfg = parse_config(CUSTOM_TOML)
    assert cfg.seed == 7
    assert cfg.constraints[0].set.set_class == SetClass.INTERVAL
    assert cfg.constraints[0].set.lower == [float("-inf")]


def test_serialized_config_parses_back():
    cfg = parse_config(CUSTOM_TOML)
    again = parse_config(serialize_config(cfg))
    assert again.model_dump() == cfg.model_dump()
    assert again.model_fields_set == cfg.model_fields_set


def test_saved_preset_config_runs_the_same_indices():
    cfg = parse_config('{"problem": {"preset": "empirical-I"}, "solver": {"rounds": 2}}')
    text = serialize_config(cfg)
    assert "horizon" not in json.loads(text)
    again = parse_config(text)
    before, after = preset_from_config(cfg), preset_from_config(again)
    assert after.horizon(again.horizon) == before.horizon(cfg.horizon)
    assert len(after.horizon(again.horizon)) == 15
    assert (after.resolution, after.rounds) == (before.resolution, before.rounds)


@pytest.mark.parametrize("text, fragment", [
    ('{"problem": ', "JSON parse error"),
    ("problem = [", "TOML parse error"),
    ('{"problem": {"preset": "finite-I"}, "horizon": 3}', "horizon"),
    ('{"problem": {"preset": "finite-I"}, "distribution": {"kind": "atoms", "atoms": [0], "weights": [1]}}',
     "conflicts"),
    ('{"problem": {"objective": {"kind": "affine"}}}', "constraint"),
    ('{"problem": {"preset": "finite-I"}, "colour": "red"}', "colour"),
])
def test_parse_errors(text, fragment):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert fragment in str(exc.value)


def test_usage_errors_exit_two(capsys):
    assert dispatch([]) == EXIT_USAGE
    assert dispatch(["run-example", "no-such-preset"]) == EXIT_USAGE


def test_metrics_identical_distributions(write, capsys):
    mu = write("mu.json", {"kind": "atoms", "atoms": [0.0, 1.0], "weights": [0.5, 0.5]})
    assert dispatch(["metrics", "--kind", "tv", "--a", mu, "--b", mu]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "0.0"


def test_metrics_mi_needs_a_preset(write, capsys):
    mu = write("mu.json", {"kind": "atoms", "atoms": [0.0], "weights": [1.0]})
    assert dispatch(["metrics", "--kind", "mi", "--a", mu, "--b", mu]) == EXIT_USAGE
    assert "--preset" in capsys.readouterr().err


def test_missing_file_is_a_config_error(tmp_path, capsys):
    missing = str(tmp_path / "absent.json")
    assert dispatch(["metrics", "--kind", "tv", "--a", missing, "--b", missing]) == EXIT_USAGE


def test_run_example_check(tmp_path, capsys):
    out = tmp_path / "finite-I.json"
    code = dispatch(["run-example", "finite-I", "--horizon", "5", "--workers", "1", "--out", str(out),
                     "--check", "--claims", "plugin-infinite", "x-at-zero"])
    assert code == EXIT_OK
    assert out.exists()
    assert "PASS plugin-infinite" in capsys.readouterr().out


def test_run_example_failed_claim(report_dir, capsys):
    code = dispatch(["run-example", "finite-I", "--horizon", "5", "--workers", "1", "--check",
                     "--claims", "value-small"])
    assert code == EXIT_FAILED
    assert (report_dir / "finite-I-seed0.json").exists()
    assert "FAIL value-small" in capsys.readouterr().out


def test_run_example_short_horizon(capsys):
    assert dispatch(["run-example", "finite-I", "--horizon", "3"]) == EXIT_USAGE


def test_solve_toml(write, tmp_path, capsys):
    config_path = write("run.toml", CUSTOM_TOML)
    out = tmp_path / "custom.csv"
    assert dispatch(["solve", "--config", config_path, "--workers", "1", "--out", str(out)]) == EXIT_OK
    assert out.read_text(encoding="utf-8").startswith("nu,variant,")


def test_content_of_a_centered_interval(write, capsys):
    h = write("H.json", {"class": "interval", "lower": [-0.5], "upper": [0.5]})
    mu = write("mu.json", {"kind": "uniform1d", "lower": -1.0, "upper": 1.0})
    code = dispatch(["content", "--set", h, "--dist", mu, "--x", "0", "--eps", "0.1", "0.01", "--density", "0.5"])
    assert code == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["content"] == pytest.approx([1.0, 1.0])
    assert payload["steiner_bound"] == pytest.approx(1.0)


def test_probe_kappa(capsys):
    assert dispatch(["probe-kappa"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["kappa"] == pytest.approx(2.0, rel=1e-6)


@pytest.mark.parametrize("argv, code", [
    (["--proposition", "mi", "--horizon", "100"], EXIT_OK),
    (["--proposition", "mi", "--q", "2"], EXIT_OK),
    (["--proposition", "mi", "--q", "0"], EXIT_OK),
    (["--proposition", "bl"], EXIT_FAILED),
    (["--proposition", "mi", "--horizon", "10"], EXIT_USAGE),
])
def test_validate_schedule(argv, code, capsys):
    assert dispatch(["validate-schedule", *argv]) == code


@pytest.mark.parametrize("argv", [
    ["probe-kappa", "--resolution", "2"],
    ["epi-dist", "--rho", "-1"],
    ["epi-dist", "--resolution", "1"],
])
def test_out_of_range_parameters_exit_two(argv, capsys):
    assert dispatch(argv) == EXIT_USAGE
    assert capsys.readouterr().err.startswith("error:")


def test_fortet_mourier_order_below_one_exits_two(write, capsys):
    mu = write("mu.json", {"kind": "atoms", "atoms": [0.0, 1.0], "weights": [0.5, 0.5]})
    assert dispatch(["metrics", "--kind", "fm", "--beta", "0.5", "--a", mu, "--b", mu]) == EXIT_USAGE
    assert "Fortet-Mourier" in capsys.readouterr().err
