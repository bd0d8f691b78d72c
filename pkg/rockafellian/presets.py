"""
Registry of worked instances and the builders turning a RunConfig into a
runnable preset.
"""
import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .chance import ChanceConstraint, ChanceProblem, ParamSet, ball, box, halfspace, interval, singleton, to_composite, union
from .distributions import (
    DiscreteDistribution,
    EscapeRule,
    MagnitudeRule,
    PerturbationSequence,
    Uniform1D,
    dirac,
    empirical,
    make_discrete,
)
from .errors import ConfigError
from .model import (
    ClosureComponent,
    CompositeProblem,
    affine,
    indicator_steps,
    orthant_indicator,
    quadratic,
    with_box,
)
from .schedules import Schedule, build_schedule, schedule_empirical, schedule_explicit, schedule_rate_s1, schedule_rate_s2
from .schemas import (
    DistributionBlock,
    MetricTag,
    PenaltyTag,
    PerturbationBlock,
    PerturbationScheme,
    PresetName,
    Proposition,
    RateSetting,
    RunConfig,
    RunVariant,
    SetBlock,
    SetClass,
)

logger = logging.getLogger(__name__)

INF = math.inf


@dataclass(frozen=True)
class PresetSpec:
    name: str
    problem: CompositeProblem
    perturbation: PerturbationSequence
    schedule: Schedule
    box: Tuple[Tuple[float, float], ...]
    resolution: int
    inf_phi: Optional[float]
    argmin: Tuple[Tuple[float, ...], ...]
    chance: Optional[ChanceProblem] = None
    drive: Optional[MetricTag] = None
    variants: Tuple[RunVariant, ...] = (RunVariant.IDENTITY,)
    detail: Optional[str] = None
    rounds: int = 3
    keep: float = 0.05
    geometric: bool = False
    default_horizon: int = 50
    rate: Optional[RateSetting] = None
    envelope_beta: float = 1.0
    fixed_theta: Optional[float] = None
    tag: PenaltyTag = PenaltyTag.SEPARABLE
    u_box: float = 1.0

    @property
    def base(self):
        return self.problem.support

    def horizon(self, count: Optional[int] = None) -> List[int]:
        count = self.default_horizon if count is None else count
        if self.geometric:
            return [2 ** k for k in range(count)]
        return list(range(1, count + 1))


def _weight_shift(base: DiscreteDistribution, scale: float = 1.0, offset: float = 1.0) -> PerturbationSequence:
    return PerturbationSequence(base, PerturbationScheme.WEIGHT_SHIFT, MagnitudeRule(scale, 1.0, offset))


def _finite(name: str, event: ParamSet, box_: Tuple[float, float], resolution: int) -> PresetSpec:
    base = make_discrete([0.0, 1.0], [0.5, 0.5])
    cp = ChanceProblem(name, quadratic(), (ChanceConstraint(event, 0.5),), base)
    return PresetSpec(
        name=name,
        problem=to_composite(cp),
        chance=cp,
        perturbation=_weight_shift(base),
        schedule=schedule_explicit(alpha=1.0, exponent=0.5),
        drive=None,
        box=(box_,),
        resolution=resolution,
        inf_phi=0.0,
        argmin=((0.0,),),
    )


def finite_one() -> PresetSpec:
    """H = {0}; every plug-in problem is infeasible."""
    return _finite(PresetName.FINITE_I.value, singleton(0.0), (-1.0, 1.0), 41)


def finite_two() -> PresetSpec:
    """H(x) = {x}; the plug-in problem settles on the wrong point x = 1."""
    return _finite(PresetName.FINITE_II.value, singleton(0.0, coef=1.0), (-1.0, 2.0), 61)


def _escaping(name: str, g0, event: ParamSet, box_, resolution: int, inf_phi: float, detail: str) -> PresetSpec:
    base = dirac(1.0)
    cp = ChanceProblem(name, g0, (ChanceConstraint(event, 0.5),), base)
    return PresetSpec(
        name=name,
        problem=to_composite(cp),
        chance=cp,
        perturbation=PerturbationSequence(base, PerturbationScheme.ATOM_ESCAPE, escape=EscapeRule(1.0, 1.0)),
        schedule=schedule_explicit(alpha=1.0, exponent=1.0),
        box=(box_,),
        resolution=resolution,
        inf_phi=inf_phi,
        argmin=((1.0,),),
        variants=(RunVariant.IDENTITY, RunVariant.ENVELOPE),
        detail=detail,
    )


def discrete_one() -> PresetSpec:
    """H = [0, 1] while x lies in [1, 2], empty otherwise; mu^nu escapes to 1 + 1/nu."""
    return _escaping(PresetName.DISCRETE_I.value, quadratic(), interval(0.0, 1.0, gate=(1.0, 2.0)),
                     (-3.0, 3.0), 61, 1.0, "enlarged-set")


def discrete_two() -> PresetSpec:
    """H(x) = (-inf, x] with a step objective rewarding x <= 1."""
    g0 = indicator_steps((-1.0, -INF, 1.0), (-0.5, 1.5, INF))
    return _escaping(PresetName.DISCRETE_II.value, g0, interval(-INF, 0.0, upper_coef=1.0),
                     (-1.0, 3.0), 81, -1.0, "shifted-threshold")


def _clip(xi: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.clip(np.asarray(xi, dtype=float)[:, 0], -1.0, 1.0)


def _neg_clip(xi: np.ndarray, x: np.ndarray) -> np.ndarray:
    return -_clip(xi, x)


def empirical_one() -> PresetSpec:
    """Uniform(-1, 1) with the two moment constraints E[clip(xi)] <= 0 and E[-clip(xi)] <= 0."""
    base = Uniform1D(-1.0, 1.0)
    problem = CompositeProblem(
        name=PresetName.EMPIRICAL_I.value,
        g0=quadratic(),
        h=orthant_indicator(),
        components=(ClosureComponent(_clip, bound=1.0), ClosureComponent(_neg_clip, bound=1.0)),
        support=base,
        bound=1.0,
    )
    return PresetSpec(
        name=PresetName.EMPIRICAL_I.value,
        problem=problem,
        perturbation=PerturbationSequence(base, PerturbationScheme.IID_EMPIRICAL),
        schedule=schedule_empirical(alpha=1.0),
        box=((-1.0, 1.0),),
        resolution=41,
        inf_phi=0.0,
        argmin=((0.0,),),
        geometric=True,
        default_horizon=15,
    )


def _threshold_instance(name: str, base) -> ChanceProblem:
    g0 = with_box(affine([1.0]), [0.0], [2.0])
    return ChanceProblem(name, g0, (ChanceConstraint(interval(-INF, 0.0, upper_coef=1.0), 0.5),), base)


def rate_one() -> PresetSpec:
    """x on [0, 2] subject to mu((-inf, x]) >= 1/2; mu^nu moves mass 1/(2 nu) off the atom at 0."""
    base = make_discrete([0.0, 1.0], [0.5, 0.5])
    cp = _threshold_instance(PresetName.RATE_S1.value, base)
    return PresetSpec(
        name=PresetName.RATE_S1.value,
        problem=to_composite(cp),
        chance=cp,
        perturbation=_weight_shift(base, scale=0.5, offset=0.0),
        schedule=schedule_rate_s1(alpha=1.0),
        drive=MetricTag.MI,
        box=((0.0, 2.0),),
        resolution=41,
        rounds=4,
        inf_phi=0.0,
        argmin=((0.0,),),
        rate=RateSetting.S1,
    )


def rate_two() -> PresetSpec:
    """The threshold instance under atom jitter of size 1/nu, stabilized through the S2 envelope."""
    base = make_discrete([0.0, 1.0], [0.5, 0.5])
    cp = _threshold_instance(PresetName.RATE_S2.value, base)
    return PresetSpec(
        name=PresetName.RATE_S2.value,
        problem=to_composite(cp),
        chance=cp,
        perturbation=PerturbationSequence(base, PerturbationScheme.JITTER, MagnitudeRule(1.0, 1.0, 0.0)),
        schedule=schedule_rate_s2(alpha=1.0),
        drive=MetricTag.BL,
        box=((0.0, 2.0),),
        resolution=41,
        rounds=4,
        inf_phi=0.0,
        argmin=((0.0,),),
        variants=(RunVariant.S2,),
        rate=RateSetting.S2,
    )


PRESETS: Dict[str, Callable[[], PresetSpec]] = {
    PresetName.FINITE_I.value: finite_one,
    PresetName.FINITE_II.value: finite_two,
    PresetName.DISCRETE_I.value: discrete_one,
    PresetName.DISCRETE_II.value: discrete_two,
    PresetName.EMPIRICAL_I.value: empirical_one,
    PresetName.RATE_S1.value: rate_one,
    PresetName.RATE_S2.value: rate_two,
}


def get_preset(name) -> PresetSpec:
    key = name.value if isinstance(name, PresetName) else str(name)
    if key not in PRESETS:
        raise ConfigError(f"unknown preset {key!r}; available: {', '.join(PRESETS)}")
    return PRESETS[key]()


def uniform_threshold_problem() -> ChanceProblem:
    """mu((-inf, x]) >= 1/2 under Uniform(-1, 1); subregular with constant 2."""
    g0 = with_box(affine([1.0]), [-1.0], [1.0])
    return ChanceProblem("uniform-threshold", g0,
                         (ChanceConstraint(interval(-INF, 0.0, upper_coef=1.0), 0.5),), Uniform1D(-1.0, 1.0))


# ---------------------------------------------------------------------------
# RunConfig -> PresetSpec
# ---------------------------------------------------------------------------

PROPOSITION_DRIVE = {
    Proposition.BL: MetricTag.BL,
    Proposition.FM: MetricTag.FM,
    Proposition.W1: MetricTag.W1,
    Proposition.MI: MetricTag.MI,
    Proposition.TV: MetricTag.TV,
    Proposition.KL: MetricTag.KL,
    Proposition.RATE_S1: MetricTag.MI,
    Proposition.RATE_S2: MetricTag.BL,
}


def set_from_block(block: SetBlock) -> ParamSet:
    gate = tuple(block.gate) if block.gate is not None else None
    if block.set_class == SetClass.INTERVAL:
        lo_c = block.lower_coef[0] if block.lower_coef else None
        hi_c = block.upper_coef[0] if block.upper_coef else None
        return interval(block.lower[0], block.upper[0], lo_c, hi_c, gate=gate)
    if block.set_class == SetClass.BOX:
        return box(block.lower, block.upper, block.lower_coef, block.upper_coef, gate=gate)
    if block.set_class == SetClass.BALL:
        return ball(block.center, block.radius, block.center_coef, block.radius_coef, gate=gate)
    if block.set_class == SetClass.HALFSPACE:
        return halfspace(block.normal, block.offset, block.offset_coef, gate=gate)
    return union(*(set_from_block(m) for m in block.members), gate=gate)


def distribution_from_block(block: DistributionBlock):
    if block.kind == "atoms":
        return make_discrete(block.atoms, block.weights)
    if block.kind == "uniform1d":
        return Uniform1D(block.lower, block.upper)
    return empirical(distribution_from_block(block.base), block.n, block.seed)


def perturbation_from_block(base, block: PerturbationBlock, seed: int) -> PerturbationSequence:
    return PerturbationSequence(
        base=base,
        scheme=block.scheme,
        magnitude=MagnitudeRule(block.scale, block.power, block.offset),
        escape=EscapeRule(block.escape_anchor, block.escape_scale),
        source=block.source,
        target=block.target,
        contaminant=tuple(block.contaminant) if block.contaminant is not None else None,
        seed=block.seed if block.seed is not None else seed,
    )


def _apply_overrides(spec: PresetSpec, cfg: RunConfig) -> PresetSpec:
    changes = {}
    if cfg.schedule is not None:
        changes["schedule"] = build_schedule(cfg.schedule)
        changes["drive"] = PROPOSITION_DRIVE.get(cfg.schedule.proposition)
    solver_set = cfg.solver.model_fields_set
    if cfg.solver.box is not None:
        changes["box"] = tuple(tuple(b) for b in cfg.solver.box)
    for name in ("resolution", "rounds", "keep"):
        if name in solver_set:
            changes[name] = getattr(cfg.solver, name)
    if cfg.envelope is not None:
        changes["envelope_beta"] = cfg.envelope.beta
        changes["fixed_theta"] = cfg.envelope.theta if cfg.envelope.theta_rule == "fixed" else None
        if RunVariant.S2 not in spec.variants:
            changes["variants"] = spec.variants + (RunVariant.S2,)
    if cfg.perturbation is not None and cfg.problem.preset is not None:
        changes["perturbation"] = perturbation_from_block(spec.base, cfg.perturbation, cfg.seed)
    return replace(spec, **changes) if changes else spec


def preset_from_config(cfg: RunConfig) -> PresetSpec:
    """The runnable instance described by a validated RunConfig."""
    if cfg.problem.preset is not None:
        return _apply_overrides(get_preset(cfg.problem.preset), cfg)

    obj = cfg.problem.objective
    g0 = quadratic(obj.scale, obj.center) if obj.kind == "quadratic" else affine([obj.coef], obj.const)
    if obj.box is not None:
        g0 = with_box(g0, [obj.box[0]], [obj.box[1]])
    base = distribution_from_block(cfg.distribution)
    constraints = tuple(ChanceConstraint(set_from_block(c.set), c.level) for c in cfg.constraints)
    dims = {c.set.dim for c in constraints}
    if dims != {base.dim}:
        raise ConfigError(f"constraint sets live in R^{sorted(dims)} but the distribution in R^{base.dim}")
    cp = ChanceProblem("custom", g0, constraints, base)
    x_box = cfg.solver.box or ([obj.box] if obj.box is not None else None)
    if x_box is None:
        raise ConfigError("custom problem needs solver.box or objective.box")
    if len(x_box) != 1:
        raise ConfigError("custom chance problems are one-dimensional in x")
    schedule = build_schedule(cfg.schedule) if cfg.schedule is not None else schedule_explicit()
    spec = PresetSpec(
        name="custom",
        problem=to_composite(cp),
        chance=cp,
        perturbation=perturbation_from_block(base, cfg.perturbation, cfg.seed),
        schedule=schedule,
        drive=PROPOSITION_DRIVE.get(cfg.schedule.proposition) if cfg.schedule is not None else None,
        box=tuple(tuple(b) for b in x_box),
        resolution=cfg.solver.resolution,
        rounds=cfg.solver.rounds,
        keep=cfg.solver.keep,
        inf_phi=None,
        argmin=(),
        geometric=cfg.perturbation.scheme == PerturbationScheme.IID_EMPIRICAL,
    )
    if cfg.envelope is not None:
        spec = replace(spec, variants=(RunVariant.IDENTITY, RunVariant.S2), envelope_beta=cfg.envelope.beta,
                       fixed_theta=cfg.envelope.theta if cfg.envelope.theta_rule == "fixed" else None)
    return spec
