"""
Command-line entry point.

    python main.py run-example finite-I --horizon 20 --out reports/finite-I.json
    python main.py solve --config run.toml
    python main.py metrics --kind tv --a mu.json --b nu.json
    python main.py rate s1
    python main.py epi-dist --preset finite-I --nus 5 10 20
    python main.py content --set H.json --dist mu.json --x 0
    python main.py probe-kappa
    python main.py validate-schedule --proposition mi --alpha 1 --horizon 40 --q 1

Exit codes: 0 success, 1 failed check or verdict, 2 usage or configuration error.
"""
import argparse
import json
import logging
import sys

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ValidationError

from . import config, metrics
from .diagnostics import DEFAULT_CONTENT_LADDER, minkowski_content, steiner_bound, subregularity_probe
from .errors import ConfigError, RockafellianError
from .experiments import ExampleRunner, compare_expected
from .presets import PRESETS, distribution_from_block, get_preset, set_from_block, uniform_threshold_problem
from .schedules import build_schedule, validate
from .schemas import (
    DistributionBlock,
    MetricTag,
    OutputFormat,
    Proposition,
    RateSetting,
    RunConfig,
    ScheduleBlock,
    SetBlock,
)
from .services import ReportService
from .solvers import GridSpec

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


# ---------------------------------------------------------------------------
# Configuration surface
# ---------------------------------------------------------------------------

def _validation_message(exc: ValidationError) -> str:
    problems = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        problems.append(f"{loc}: {err['msg']}")
    return "; ".join(problems)


def _load_text(text: str) -> dict:
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        # tomllib puts "(at line L, column C)" in the message
        raise ConfigError(f"TOML parse error: {exc}") from exc


def _validate(model: type, data, what: str) -> BaseModel:
    try:
        return model.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"invalid {what}: {_validation_message(exc)}") from exc


def parse_config(text: str) -> RunConfig:
    """RunConfig from JSON (text starting with '{') or TOML."""
    return _validate(RunConfig, _load_text(text), "configuration")


def serialize_config(cfg: RunConfig) -> str:
    data = cfg.model_dump(by_alias=True, exclude_unset=True, exclude_none=True)
    return json.dumps(data, indent=2, allow_nan=True)


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc


def _load_distribution(path: str):
    block = _validate(DistributionBlock, _load_text(_read(path)), f"distribution in {path}")
    return distribution_from_block(block)


def _emit(payload) -> None:
    print(json.dumps(payload, indent=2, allow_nan=True))


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _write_report(report, out: Optional[str], fmt: Optional[str]) -> Path:
    if out is None:
        return ReportService.write(report, ReportService.default_path(report, fmt or OutputFormat.JSON), fmt)
    return ReportService.write(report, out, fmt)


def _verdict_code(verdicts) -> int:
    failed = [v for v in verdicts if not v.passed]
    for v in verdicts:
        status = "PASS" if v.passed else "FAIL"
        print(f"{status} {v.claim}: observed={v.observed} expected={v.expected} delta={v.delta} nu={v.nu}")
    return EXIT_FAILED if failed else EXIT_OK


def cmd_run_example(args) -> int:
    runner = ExampleRunner(seed=args.seed, joint=args.joint, workers=args.workers)
    report = runner.run_preset(args.name, args.horizon)
    path = _write_report(report, args.out, args.format)
    print(path)
    if args.check:
        return _verdict_code(compare_expected(report, args.claims or None))
    return EXIT_OK


def cmd_solve(args) -> int:
    cfg = parse_config(_read(args.config))
    report = ExampleRunner(seed=cfg.seed, joint=args.joint, workers=args.workers).run_config(cfg)
    if args.out is not None:
        out, fmt = args.out, args.format
    else:
        out, fmt = cfg.output.path, args.format or cfg.output.format.value
    print(_write_report(report, out, fmt))
    return EXIT_OK


def cmd_metrics(args) -> int:
    mu1, mu2 = _load_distribution(args.a), _load_distribution(args.b)
    kind = metrics.MetricKind(MetricTag(args.kind), beta=args.beta)
    problem = xgrid = None
    if kind.tag == MetricTag.MI:
        if args.preset is None:
            raise ConfigError("--kind mi needs --preset to supply the problem and its x grid")
        spec = get_preset(args.preset)
        problem = spec.problem
        xgrid = GridSpec(box=spec.box, resolution=spec.resolution).points()
    print(repr(metrics.distance(kind, mu1, mu2, problem, xgrid)))
    return EXIT_OK


def cmd_rate(args) -> int:
    report, fit = ExampleRunner(seed=args.seed, workers=args.workers).run_rate(args.setting, args.horizon)
    path = _write_report(report, args.out, args.format)
    _emit({"report": str(path), "rate_fit": report.rate_fit})
    if args.min_slope is not None:
        return EXIT_OK if fit is not None and fit.slope >= args.min_slope else EXIT_FAILED
    return EXIT_OK


def cmd_epi_dist(args) -> int:
    runner = ExampleRunner(seed=args.seed)
    rows = runner.epi_distance_study(args.preset, args.nus, args.alpha, args.rho, args.resolution)
    _emit([dict(nu=nu, **est.to_dict()) for nu, est in rows])
    return EXIT_OK


def cmd_content(args) -> int:
    H = set_from_block(_validate(SetBlock, _load_text(_read(args.set)), f"set in {args.set}"))
    mu = _load_distribution(args.dist)
    x = np.asarray(args.x, dtype=float)
    eps = args.eps or DEFAULT_CONTENT_LADDER
    values = minkowski_content(mu, H, x, eps)
    payload = {"x": list(args.x), "eps": list(eps), "content": values}
    if args.density is not None:
        payload["steiner_bound"] = steiner_bound(H, x, args.density)
    _emit(payload)
    return EXIT_OK


def cmd_probe_kappa(args) -> int:
    if args.problem == "uniform-threshold":
        cp = uniform_threshold_problem()
        box = ((-1.0, 1.0),)
    else:
        spec = get_preset(args.problem)
        if spec.chance is None:
            raise ConfigError(f"preset {args.problem} is not a chance-constrained problem")
        cp, box = spec.chance, spec.box
    grid = GridSpec(box=box, resolution=args.resolution, rounds=0)
    samples = GridSpec(box=box, resolution=args.samples, rounds=0).points()
    kappa = subregularity_probe(cp, cp.distribution, samples, grid)
    _emit({"problem": args.problem, "kappa": kappa, "spacing": float(grid.spacing().max())})
    return EXIT_OK


def cmd_validate_schedule(args) -> int:
    block = _validate(ScheduleBlock, {"proposition": args.proposition, "alpha": args.alpha}, "schedule")
    schedule = build_schedule(block)
    nus = list(range(1, args.horizon + 1))
    ds = [float(nu) ** (-args.q) if args.q > 0 else 0.0 for nu in nus]
    result = validate(schedule, ds, nus)
    _emit(result.to_dict())
    return EXIT_OK if result.passed else EXIT_FAILED


# ---------------------------------------------------------------------------
# Parser and dispatch
# ---------------------------------------------------------------------------

def _add_output(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="report path (.json or .csv); defaults under ROCKAFELLIAN_REPORT_DIR")
    p.add_argument("--format", choices=[f.value for f in OutputFormat], help="override the format implied by --out")
    p.add_argument("--workers", type=int, default=None, help="joblib worker cap (default ROCKAFELLIAN_WORKERS)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rockafellian",
                                     description="Rockafellian relaxation experiments under distributional perturbation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run-example", help="run a registered instance into a report")
    p.add_argument("name", choices=list(PRESETS))
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--joint", action="store_true", help="minimize over the (u, x) grid instead of the closed form in u")
    p.add_argument("--check", action="store_true", help="compare the report against the registered expectations")
    p.add_argument("--claims", nargs="*", help="restrict --check to these claim keys")
    _add_output(p)
    p.set_defaults(handler=cmd_run_example)

    p = sub.add_parser("solve", help="run a JSON or TOML configuration")
    p.add_argument("--config", required=True)
    p.add_argument("--joint", action="store_true")
    _add_output(p)
    p.set_defaults(handler=cmd_solve)

    p = sub.add_parser("metrics", help="distance between two distributions given as JSON blocks")
    p.add_argument("--kind", required=True, choices=[t.value for t in MetricTag])
    p.add_argument("--beta", type=float, default=1.0, help="Fortet-Mourier order")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--preset", choices=list(PRESETS), help="problem supplying the components for --kind mi")
    p.set_defaults(handler=cmd_metrics)

    p = sub.add_parser("rate", help="rate study on the threshold instance")
    p.add_argument("setting", choices=[s.value for s in RateSetting])
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-slope", type=float, default=None, help="exit 1 when the fitted slope is below this")
    _add_output(p)
    p.set_defaults(handler=cmd_rate)

    p = sub.add_parser("epi-dist", help="truncated epigraphical distance between f and f^nu")
    p.add_argument("--preset", default="finite-I", choices=list(PRESETS))
    p.add_argument("--nus", type=int, nargs="+", default=[5, 10, 20, 40])
    p.add_argument("--alpha", type=float, default=4.0)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--resolution", type=int, default=81)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=cmd_epi_dist)

    p = sub.add_parser("content", help="outer Minkowski content of H(x) under a distribution")
    p.add_argument("--set", required=True, help="set block as JSON")
    p.add_argument("--dist", required=True, help="distribution block as JSON")
    p.add_argument("--x", type=float, nargs="+", required=True)
    p.add_argument("--eps", type=float, nargs="+", default=None)
    p.add_argument("--density", type=float, default=None, help="density bound for the Steiner estimate")
    p.set_defaults(handler=cmd_content)

    p = sub.add_parser("probe-kappa", help="grid estimate of the metric subregularity constant")
    p.add_argument("--problem", default="uniform-threshold", choices=["uniform-threshold"] + list(PRESETS))
    p.add_argument("--resolution", type=int, default=401)
    p.add_argument("--samples", type=int, default=41)
    p.set_defaults(handler=cmd_probe_kappa)

    p = sub.add_parser("validate-schedule", help="tail checks of a schedule on d = nu^-q")
    p.add_argument("--proposition", required=True, choices=[pr.value for pr in Proposition])
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--horizon", type=int, default=40)
    p.add_argument("--q", type=float, default=1.0, help="distance decay exponent; 0 gives d = 0")
    p.set_defaults(handler=cmd_validate_schedule)
    return parser


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=config.LOG_LEVEL, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.handler(args)
    except RockafellianError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main(argv: Optional[List[str]] = None) -> None:
    sys.exit(dispatch(argv))
