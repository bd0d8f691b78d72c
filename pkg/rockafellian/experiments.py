"""
End-to-end runs of the registered instances: plug-in failure columns,
stabilized Rockafellian columns, distance and schedule columns, and the
comparison of reports against closed-form expectations.
"""
import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed

from . import config, metrics
from .chance import violation
from .diagnostics import EpiDistanceEstimate, RateFit, epi_distance, rate_bound_s1, rate_bound_s2, rate_fit
from .distributions import DiscreteDistribution, perturb
from .envelopes import detail_envelope, regularize_all
from .errors import (ConfigError, InsufficientDataError, InvalidInputError, LPCapExceededError, UnknownClaimError,
                     UnsupportedCombinationError)
from .model import (
    PenaltyKind,
    eval_approx_rockafellian,
    eval_phi,
    eval_plugin,
    eval_rockafellian,
    partial_argmin_u,
    partial_min_u,
)
from .presets import PresetSpec, get_preset, preset_from_config
from .schedules import schedule_rate_s1
from .schemas import (
    REPORT_COLUMNS,
    ClaimVerdict,
    PerturbationScheme,
    PresetName,
    RateSetting,
    ReportRow,
    RunConfig,
    RunVariant,
    SolveReport,
)
from .solvers import GridSpec, MinResult, excess, grid_minimize, near_argmin

logger = logging.getLogger(__name__)

MIN_HORIZON = 5
VARIANT_ORDER = {RunVariant.IDENTITY: 0, RunVariant.ENVELOPE: 1, RunVariant.S2: 2}


def _grid(spec: PresetSpec) -> GridSpec:
    return GridSpec(box=spec.box, resolution=spec.resolution, rounds=spec.rounds, keep=spec.keep)


def _perturbed(spec: PresetSpec, nu: int, seed: int):
    seq = spec.perturbation
    if seq.scheme == PerturbationScheme.IID_EMPIRICAL:
        seq = replace(seq, seed=seed)
    return perturb(seq, nu)


def _safe(metric: Callable[[], float], name: str, nu: int) -> Optional[float]:
    try:
        return float(metric())
    except LPCapExceededError as exc:
        logger.warning("%s skipped at nu=%d: %s", name, nu, exc)
        return None


def _measure(spec: PresetSpec, mu_nu, nu: int) -> Dict[str, Optional[float]]:
    base = spec.base
    atomic = isinstance(base, DiscreteDistribution)
    xgrid = _grid(spec).points()
    return {
        "d_tv": metrics.tv(base, mu_nu) if atomic else None,
        "d_w1": _safe(lambda: metrics.wasserstein1(base, mu_nu), "W1", nu) if base.dim == 1 or atomic else None,
        "d_bl": _safe(lambda: metrics.bounded_lipschitz(base, mu_nu), "BL", nu) if atomic else None,
        "d_mi": metrics.minimal_information(spec.problem, base, mu_nu, xgrid).value,
    }


def _driving_distance(spec: PresetSpec, columns: Dict[str, Optional[float]], mu_nu) -> Optional[float]:
    if spec.drive is None:
        return None
    key = f"d_{spec.drive.value}"
    if key in columns:
        return columns[key]
    return metrics.distance(metrics.MetricKind(spec.drive), spec.base, mu_nu)


def _first(points: np.ndarray) -> Optional[List[float]]:
    return points[0].tolist() if len(points) else None


def _components_for(spec: PresetSpec, variant: RunVariant, nu: int, theta: Optional[float], lam: float):
    comps = spec.problem.components
    if variant == RunVariant.ENVELOPE:
        return detail_envelope(spec.detail, comps, nu)
    if variant == RunVariant.S2:
        width = spec.fixed_theta or theta or lam
        return regularize_all(comps, spec.envelope_beta, width)
    return comps


def _stabilized(spec: PresetSpec, mu_nu, G_nu, penalty: PenaltyKind, joint: bool) -> Tuple[MinResult, np.ndarray, np.ndarray]:
    """(result, x representatives, u at the first representative)."""
    problem = spec.problem
    if joint:
        m = problem.m
        box = tuple((-spec.u_box, spec.u_box) for _ in range(m)) + spec.box
        gs = GridSpec(box=box, resolution=spec.resolution, rounds=spec.rounds, keep=spec.keep)
        result = grid_minimize(
            lambda p: eval_approx_rockafellian(problem, mu_nu, G_nu, penalty, p[:m], p[m:]), gs)
        reps = result.representatives
        u = reps[0, :m] if len(reps) else np.empty(0)
        return result, reps[:, m:], u
    result = grid_minimize(lambda x: partial_min_u(problem, mu_nu, G_nu, penalty, x), _grid(spec))
    reps = result.representatives
    u = partial_argmin_u(problem, mu_nu, G_nu, penalty, reps[0])[1] if len(reps) else np.empty(0)
    return result, reps, u


def _nu_rows(spec: PresetSpec, nu: int, seed: int, joint: bool, inf_phi: Optional[float]) -> List[ReportRow]:
    mu_nu = _perturbed(spec, nu, seed)
    columns = _measure(spec, mu_nu, nu)
    d = _driving_distance(spec, columns, mu_nu)
    sched = spec.schedule.values(nu, 0.0 if d is None else d)
    plugin = grid_minimize(lambda x: eval_plugin(spec.problem, mu_nu, x), _grid(spec))
    penalty = PenaltyKind(spec.tag, spec.schedule.alpha, sched.lam)

    rows = []
    for variant in spec.variants:
        theta = sched.theta
        if variant == RunVariant.S2:
            theta = spec.fixed_theta or sched.theta or sched.lam
        G_nu = _components_for(spec, variant, nu, theta, sched.lam)
        result, xs, u = _stabilized(spec, mu_nu, G_nu, penalty, joint)
        x = _first(xs)
        worst = None
        if spec.chance is not None and x is not None:
            worst = violation(spec.chance, spec.chance.distribution, x).worst
        value_error = None
        if inf_phi is not None and math.isfinite(inf_phi):
            value_error = abs(result.value - inf_phi)
        eta = None
        if d is not None and spec.rate == RateSetting.S1:
            eta = rate_bound_s1(sched.lam, d, spec.schedule.alpha)
        elif d is not None and spec.rate == RateSetting.S2:
            eta = rate_bound_s2(sched.lam, theta, d, spec.schedule.alpha)
        rows.append(ReportRow(
            nu=nu,
            variant=variant,
            lam=sched.lam,
            theta=theta,
            eps=sched.eps,
            inf_plugin=plugin.value,
            plugin_x=_first(plugin.representatives),
            inf_f=result.value,
            u=u.tolist() if len(u) else None,
            x=x,
            n_representatives=len(xs),
            dist_to_argmin=excess(xs, np.array(spec.argmin)) if spec.argmin and len(xs) else None,
            worst_violation=worst,
            value_error=value_error,
            eta_proxy=eta,
            **columns,
        ))
    logger.debug("nu=%d: %s", nu, ", ".join(f"{r.variant.value} {r.inf_f:.6g}" for r in rows))
    return rows


class ExampleRunner:
    """Runs registered instances and custom configurations into SolveReports."""

    def __init__(self, seed: int = 0, joint: bool = False, workers: Optional[int] = None):
        self.seed = seed
        self.joint = joint
        self.workers = config.WORKERS if workers is None else max(1, workers)

    def _inf_phi(self, spec: PresetSpec) -> float:
        if spec.inf_phi is not None:
            return spec.inf_phi
        oracle = grid_minimize(lambda x: eval_phi(spec.problem, spec.base, x), _grid(spec))
        return oracle.value

    def run_spec(self, spec: PresetSpec, horizon: Optional[int] = None) -> SolveReport:
        if horizon is not None and horizon < MIN_HORIZON:
            raise ConfigError(f"horizon must be at least {MIN_HORIZON}, got {horizon}")
        nus = spec.horizon(horizon)
        inf_phi = self._inf_phi(spec)
        logger.info("Running preset %s over %d values of nu", spec.name, len(nus))
        batches = Parallel(n_jobs=self.workers)(
            delayed(_nu_rows)(spec, nu, self.seed, self.joint, inf_phi) for nu in nus
        )
        rows = sorted((r for batch in batches for r in batch),
                      key=lambda r: (r.nu, VARIANT_ORDER[r.variant]))
        last = rows[-1]
        logger.info("Preset %s done: nu=%d inf_plugin=%.6g inf_f=%.6g", spec.name, last.nu,
                    last.inf_plugin, last.inf_f)
        grid = _grid(spec).to_dict()
        grid["joint"] = self.joint
        return SolveReport(
            preset=spec.name,
            schedule=spec.schedule.describe(),
            seed=self.seed,
            grid=grid,
            horizon=len(nus),
            inf_phi=inf_phi,
            rows=rows,
        )

    def run_preset(self, name: Union[str, PresetName], horizon: Optional[int] = None) -> SolveReport:
        return self.run_spec(get_preset(name), horizon)

    def run_rate(self, setting: Union[str, RateSetting], horizon: Optional[int] = None) -> Tuple[SolveReport, Optional[RateFit]]:
        """Rate study on the designed threshold instance: errors, eta proxies and a log-log fit."""
        setting = RateSetting(setting)
        name = PresetName.RATE_S1 if setting == RateSetting.S1 else PresetName.RATE_S2
        spec = get_preset(name)
        inf_phi = self._inf_phi(spec)
        if not math.isfinite(inf_phi):
            raise UnsupportedCombinationError(f"rate study needs a finite inf phi, got {inf_phi}")
        report = self.run_spec(spec, horizon)
        drive = f"d_{spec.drive.value}"
        bounds = [r.eta_proxy for r in report.rows]
        errors = [r.value_error for r in report.rows]
        ratios = [e / b for e, b in zip(errors, bounds) if b and b > 0 and e is not None and math.isfinite(e)]
        constant = max([1.0] + ratios)

        phi = lambda x: eval_phi(spec.problem, spec.base, x)  # noqa: E731
        for row in report.rows:
            if row.eta_proxy is None:
                continue
            row.eta_proxy = constant * row.eta_proxy
            if row.x is not None:
                near = near_argmin(phi, _grid(spec), (row.eps or 0.0) + 2 * row.eta_proxy)
                row.dist_to_argmin = excess(np.array([row.x]), near.points)

        pairs = [(getattr(r, drive), r.value_error) for r in report.rows
                 if getattr(r, drive) is not None and r.value_error is not None]
        fit = None
        try:
            fit = rate_fit(pairs)
            report.rate_fit = dict(fit.to_dict(), constant=constant)
            logger.info("Rate %s: slope %.3f against %s (constant %.3g)", setting.value, fit.slope, drive, constant)
        except InsufficientDataError as exc:
            logger.warning("rate fit skipped: %s", exc)
        return report, fit

    def run_config(self, cfg: RunConfig) -> SolveReport:
        return self.run_spec(preset_from_config(cfg), cfg.horizon)

    def epi_distance_study(self, name: Union[str, PresetName] = PresetName.FINITE_I,
                           nus: Sequence[int] = (5, 10, 20, 40), alpha: float = 4.0, rho: float = 1.0,
                           resolution: int = 81) -> List[Tuple[int, EpiDistanceEstimate]]:
        """Epi-distance between f and f^nu on a (u, x) grid under the rate-s1 schedule on d_mi."""
        if not rho > 0:
            raise InvalidInputError(f"truncation radius must be positive, got {rho}")
        spec = get_preset(name)
        problem = spec.problem
        if problem.m + problem.n > 3:
            raise UnsupportedCombinationError("epi-distance study needs m + n <= 3")
        schedule = schedule_rate_s1(alpha)
        box = tuple((-rho, rho) for _ in range(problem.m + problem.n))
        gs = GridSpec(box=box, resolution=resolution, rounds=0)
        m = problem.m
        f = lambda p: eval_rockafellian(problem, spec.base, p[:m], p[m:])  # noqa: E731
        out = []
        for nu in nus:
            mu_nu = _perturbed(spec, nu, self.seed)
            d = metrics.minimal_information(problem, spec.base, mu_nu, _grid(spec).points()).value
            penalty = PenaltyKind(spec.tag, alpha, schedule.values(nu, d).lam)
            f_nu = lambda p, mu_nu=mu_nu, penalty=penalty: eval_approx_rockafellian(  # noqa: E731
                problem, mu_nu, None, penalty, p[:m], p[m:])
            estimate = epi_distance(f_nu, f, rho, gs)
            logger.info("epi-distance nu=%d: %.4g", nu, estimate.estimate)
            out.append((nu, estimate))
        return out


def run_preset(name, horizon: Optional[int] = None, seed: int = 0, joint: bool = False) -> SolveReport:
    return ExampleRunner(seed=seed, joint=joint).run_preset(name, horizon)


def run_rate(setting, horizon: Optional[int] = None, seed: int = 0) -> Tuple[SolveReport, Optional[RateFit]]:
    return ExampleRunner(seed=seed).run_rate(setting, horizon)


# ---------------------------------------------------------------------------
# Expectations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Expectation:
    column: str
    op: str = "eq"
    expected: Optional[float] = None
    formula: Optional[Callable[[int], float]] = None
    reference_column: Optional[str] = None
    reference_sign: float = 1.0
    variant: RunVariant = RunVariant.IDENTITY
    min_nu: int = 1
    last_only: bool = False
    tol: float = 1e-9

    def target(self, row: ReportRow) -> Optional[float]:
        if self.formula is not None:
            return self.formula(row.nu)
        if self.reference_column is not None:
            ref = _scalar(getattr(row, self.reference_column))
            return None if ref is None else self.reference_sign * ref
        return self.expected


def _scalar(value) -> Optional[float]:
    if isinstance(value, list):
        return float(value[0]) if value else None
    return None if value is None else float(value)


def _holds(op: str, observed: float, expected: float, tol: float) -> bool:
    if op == "eq":
        if math.isinf(expected) or math.isinf(observed):
            return observed == expected
        return abs(observed - expected) <= tol
    if op == "ge":
        return observed >= expected - tol
    if op == "le":
        return observed <= expected + tol
    raise InvalidInputError(f"unknown comparison {op!r}")


EXPECTATIONS: Dict[str, Dict[str, Expectation]] = {
    PresetName.FINITE_I.value: {
        "plugin-infinite": Expectation("inf_plugin", expected=math.inf),
        "value-closed-form": Expectation("inf_f", formula=lambda nu: math.sqrt(nu) / (nu + 1)),
        "u-closed-form": Expectation("u", formula=lambda nu: -1.0 / (nu + 1)),
        "x-at-zero": Expectation("x", expected=0.0),
        "value-small": Expectation("inf_f", op="le", expected=0.14, last_only=True, tol=0.0),
    },
    PresetName.FINITE_II.value: {
        "plugin-value-one": Expectation("inf_plugin", expected=1.0),
        "plugin-argmin-one": Expectation("plugin_x", expected=1.0),
        "value-closed-form": Expectation("inf_f", formula=lambda nu: math.sqrt(nu) / (nu + 1)),
        "x-at-zero": Expectation("x", expected=0.0),
    },
    PresetName.DISCRETE_I.value: {
        "plugin-infinite": Expectation("inf_plugin", expected=math.inf, min_nu=2),
        "value-half-nu": Expectation("inf_f", formula=lambda nu: nu / 2.0),
        "x-at-zero": Expectation("x", expected=0.0),
        "envelope-value": Expectation("inf_f", expected=1.0, variant=RunVariant.ENVELOPE, last_only=True, tol=1e-2),
        "envelope-x": Expectation("x", expected=1.0, variant=RunVariant.ENVELOPE, last_only=True, tol=1e-2),
    },
    PresetName.DISCRETE_II.value: {
        "value-minus-half": Expectation("inf_f", expected=-0.5, min_nu=2),
        "x-beyond-second-atom": Expectation("x", op="ge", expected=1.5, min_nu=2),
        "envelope-value": Expectation("inf_f", expected=-1.0, variant=RunVariant.ENVELOPE, last_only=True, tol=1e-2),
        "envelope-x": Expectation("x", expected=1.0, variant=RunVariant.ENVELOPE, last_only=True, tol=1e-2),
    },
    PresetName.EMPIRICAL_I.value: {
        "plugin-infinite": Expectation("inf_plugin", expected=math.inf),
        "x-at-zero": Expectation("x", expected=0.0),
    },
    PresetName.RATE_S1.value: {
        "plugin-value-one": Expectation("inf_plugin", expected=1.0),
        "value-error-sqrt": Expectation("value_error", formula=lambda nu: math.sqrt(0.5 / nu)),
        "violation-within-eta": Expectation("worst_violation", op="ge", reference_column="eta_proxy",
                                            reference_sign=-1.0),
    },
    PresetName.RATE_S2.value: {
        "value-error-order-d": Expectation("value_error", op="le", formula=lambda nu: 1.0 / nu,
                                           variant=RunVariant.S2, tol=1e-2),
        "violation-within-eta": Expectation("worst_violation", op="ge", reference_column="eta_proxy",
                                            reference_sign=-1.0, variant=RunVariant.S2),
    },
}


def _judge(name: str, exp: Expectation, report: SolveReport) -> ClaimVerdict:
    report.column(exp.column)
    rows = [r for r in report.rows if r.variant == exp.variant and r.nu >= exp.min_nu]
    if exp.last_only:
        rows = rows[-1:]
    if not rows:
        return ClaimVerdict(claim=name, column=exp.column, tolerance=exp.tol, passed=False)
    worst = None
    for row in rows:
        observed, expected = _scalar(getattr(row, exp.column)), exp.target(row)
        if observed is None or expected is None:
            return ClaimVerdict(claim=name, column=exp.column, expected=expected, observed=observed,
                                tolerance=exp.tol, passed=False, nu=row.nu)
        delta = 0.0 if observed == expected else observed - expected
        verdict = ClaimVerdict(claim=name, column=exp.column, expected=expected, observed=observed,
                               delta=delta, tolerance=exp.tol, passed=_holds(exp.op, observed, expected, exp.tol),
                               nu=row.nu)
        if not verdict.passed:
            return verdict
        if worst is None or abs(delta) > abs(worst.delta):
            worst = verdict
    return worst


def compare_expected(report: SolveReport,
                     expectations: Union[None, Sequence[str], Dict[str, Expectation]] = None) -> List[ClaimVerdict]:
    """Per-claim verdicts; claims are looked up in EXPECTATIONS unless given explicitly."""
    registered = EXPECTATIONS.get(report.preset, {})
    if expectations is None:
        chosen = registered
    elif isinstance(expectations, dict):
        chosen = expectations
    else:
        unknown = [k for k in expectations if k not in registered]
        if unknown:
            raise UnknownClaimError(f"unknown claim(s) for {report.preset}: {', '.join(unknown)}")
        chosen = {k: registered[k] for k in expectations}
    for name, exp in chosen.items():
        if exp.column not in REPORT_COLUMNS:
            raise ConfigError(f"claim {name!r} names unknown report column {exp.column!r}")
    return [_judge(name, exp, report) for name, exp in chosen.items()]
