from enum import Enum
from typing import Any, Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class MetricTag(str, Enum):
    TV = "tv"
    W1 = "w1"
    BL = "bl"
    FM = "fm"
    MI = "mi"
    KL = "kl"


class PerturbationScheme(str, Enum):
    WEIGHT_SHIFT = "weight-shift"
    ATOM_ESCAPE = "atom-escape"
    TV_BOUNDED = "tv-bounded"
    IID_EMPIRICAL = "iid-empirical"
    JITTER = "jitter"


class OuterKind(str, Enum):
    ORTHANT_INDICATOR = "orthant-indicator"
    LINEAR = "linear"
    MAX_PLUS_POWER = "max-plus-power"


class PenaltyTag(str, Enum):
    EUCLIDEAN = "euclidean-power"
    SEPARABLE = "separable-power"


class SetClass(str, Enum):
    INTERVAL = "interval"
    BOX = "box"
    BALL = "ball"
    HALFSPACE = "halfspace"
    FINITE_UNION = "finite-union"


class Proposition(str, Enum):
    BL = "bl"
    FM = "fm"
    W1 = "w1"
    MI = "mi"
    TV = "tv"
    KL = "kl"
    EMPIRICAL = "empirical"
    RATE_S1 = "rate-s1"
    RATE_S2 = "rate-s2"
    EXPLICIT = "explicit"


class PresetName(str, Enum):
    FINITE_I = "finite-I"
    FINITE_II = "finite-II"
    DISCRETE_I = "discrete-I"
    DISCRETE_II = "discrete-II"
    EMPIRICAL_I = "empirical-I"
    RATE_S1 = "rate-s1"
    RATE_S2 = "rate-s2"


class RateSetting(str, Enum):
    S1 = "s1"
    S2 = "s2"


class RunVariant(str, Enum):
    IDENTITY = "identity"    # G^nu = G
    ENVELOPE = "envelope"    # detail-block G^nu
    S2 = "s2"                # Pasch-Hausdorff S2 integrand


class OutputFormat(str, Enum):
    JSON = "json"
    CSV = "csv"


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------

class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True, protected_namespaces=())


class ObjectiveBlock(_Block):
    kind: str = Field("quadratic", pattern="^(quadratic|affine)$")
    scale: float = 1.0
    center: float = 0.0
    coef: float = 1.0
    const: float = 0.0
    box: Optional[Tuple[float, float]] = None

    @field_validator("box")
    @classmethod
    def box_must_be_ordered(cls, v):
        if v is not None and not v[0] < v[1]:
            raise ValueError("box lower bound must be below upper bound")
        return v


class ProblemBlock(_Block):
    preset: Optional[PresetName] = None
    objective: Optional[ObjectiveBlock] = None

    @model_validator(mode="after")
    def preset_or_objective(self):
        if self.preset is None and self.objective is None:
            raise ValueError("problem needs either a preset or an objective")
        if self.preset is not None and self.objective is not None:
            raise ValueError("problem preset and custom objective are mutually exclusive")
        return self


class SetBlock(_Block):
    set_class: SetClass = Field(..., alias="class")
    lower: Optional[List[float]] = None
    upper: Optional[List[float]] = None
    lower_coef: Optional[List[float]] = None
    upper_coef: Optional[List[float]] = None
    center: Optional[List[float]] = None
    center_coef: Optional[List[float]] = None
    radius: Optional[float] = None
    radius_coef: Optional[float] = None
    normal: Optional[List[float]] = None
    offset: Optional[float] = None
    offset_coef: Optional[float] = None
    members: Optional[List["SetBlock"]] = None
    gate: Optional[Tuple[float, float]] = None

    @model_validator(mode="after")
    def fields_for_class(self):
        required = {
            SetClass.INTERVAL: ("lower", "upper"),
            SetClass.BOX: ("lower", "upper"),
            SetClass.BALL: ("center", "radius"),
            SetClass.HALFSPACE: ("normal", "offset"),
            SetClass.FINITE_UNION: ("members",),
        }[self.set_class]
        missing = [name for name in required if getattr(self, name) is None]
        if missing:
            raise ValueError(f"{self.set_class.value} set requires {', '.join(missing)}")
        return self


class ConstraintBlock(_Block):
    set: SetBlock
    level: float = Field(..., ge=0.0, le=1.0)


class DistributionBlock(_Block):
    kind: str = Field("atoms", pattern="^(atoms|uniform1d|empirical)$")
    atoms: Optional[List[Union[float, List[float]]]] = None
    weights: Optional[List[float]] = None
    lower: Optional[float] = None
    upper: Optional[float] = None
    base: Optional["DistributionBlock"] = None
    n: Optional[int] = Field(None, ge=1)
    seed: int = Field(0, ge=0)

    @model_validator(mode="after")
    def fields_for_kind(self):
        if self.kind == "atoms":
            if self.atoms is None or self.weights is None:
                raise ValueError("atoms distribution requires atoms and weights")
            if len(self.atoms) != len(self.weights):
                raise ValueError("atoms and weights must have the same length")
        elif self.kind == "uniform1d":
            if self.lower is None or self.upper is None:
                raise ValueError("uniform1d distribution requires lower and upper")
            if not self.lower < self.upper:
                raise ValueError("uniform1d lower must be below upper")
        elif self.base is None or self.n is None:
            raise ValueError("empirical distribution requires base and n")
        return self


class PerturbationBlock(_Block):
    scheme: PerturbationScheme
    scale: float = Field(1.0, ge=0.0)
    power: float = Field(1.0, gt=0.0)
    offset: float = Field(1.0, ge=0.0)
    source: int = Field(0, ge=0)
    target: int = Field(1, ge=0)
    escape_anchor: float = 1.0
    escape_scale: float = 1.0
    contaminant: Optional[List[float]] = None
    seed: Optional[int] = Field(None, ge=0)


class ScheduleOverrides(_Block):
    lam_exponent: Optional[float] = Field(None, gt=0.0)
    theta_exponent: Optional[float] = Field(None, gt=0.0)
    eps_exponent: Optional[float] = Field(None, ge=0.0)
    lam_coefficient: Optional[float] = Field(None, gt=0.0)
    eps0: Optional[float] = Field(None, gt=0.0, lt=0.5)


class ScheduleBlock(_Block):
    proposition: Proposition
    alpha: float = Field(1.0, ge=1.0)
    overrides: Optional[ScheduleOverrides] = None


class SolverBlock(_Block):
    box: Optional[List[Tuple[float, float]]] = None
    resolution: int = Field(101, ge=3)
    rounds: int = Field(4, ge=0)
    keep: float = Field(0.05, gt=0.0, le=1.0)

    @field_validator("box")
    @classmethod
    def box_axes_ordered(cls, v):
        if v is not None:
            for lo, hi in v:
                if not lo < hi:
                    raise ValueError(f"solver box axis [{lo}, {hi}] is empty")
            if len(v) > 3:
                raise ValueError("solver box has more than 3 axes")
        return v


class EnvelopeBlock(_Block):
    beta: float = Field(1.0, ge=1.0)
    theta_rule: str = Field("schedule", pattern="^(schedule|fixed)$")
    theta: Optional[float] = Field(None, gt=0.0)

    @model_validator(mode="after")
    def fixed_needs_theta(self):
        if self.theta_rule == "fixed" and self.theta is None:
            raise ValueError("fixed theta_rule requires theta")
        return self


class OutputBlock(_Block):
    path: Optional[str] = None
    format: OutputFormat = OutputFormat.JSON


class RunConfig(_Block):
    problem: ProblemBlock
    distribution: Optional[DistributionBlock] = None
    perturbation: Optional[PerturbationBlock] = None
    schedule: Optional[ScheduleBlock] = None
    solver: SolverBlock = Field(default_factory=SolverBlock)
    envelope: Optional[EnvelopeBlock] = None
    constraints: List[ConstraintBlock] = Field(default_factory=list)
    output: OutputBlock = Field(default_factory=OutputBlock)
    seed: int = Field(0, ge=0, lt=2**64)
    horizon: Optional[int] = Field(None, ge=5)

    @model_validator(mode="after")
    def blocks_consistent(self):
        if self.problem.preset is not None:
            if self.distribution is not None:
                raise ValueError("distribution block conflicts with a problem preset")
            if self.constraints:
                raise ValueError("constraints block conflicts with a problem preset")
        else:
            if not self.constraints:
                raise ValueError("custom problem requires at least one constraint")
            if self.distribution is None:
                raise ValueError("custom problem requires a distribution block")
            if self.perturbation is None:
                raise ValueError("custom problem requires a perturbation block")
        return self


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

REPORT_COLUMNS = [
    "nu", "variant", "d_tv", "d_w1", "d_bl", "d_mi", "lam", "theta", "eps",
    "inf_plugin", "plugin_x", "inf_f", "u", "x", "n_representatives",
    "dist_to_argmin", "worst_violation", "value_error", "eta_proxy",
]


class ReportRow(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    nu: int = Field(..., ge=1)
    variant: RunVariant
    d_tv: Optional[float] = None
    d_w1: Optional[float] = None
    d_bl: Optional[float] = None
    d_mi: Optional[float] = None
    lam: float
    theta: Optional[float] = None
    eps: Optional[float] = None
    inf_plugin: float
    plugin_x: Optional[List[float]] = None
    inf_f: float
    u: Optional[List[float]] = None
    x: Optional[List[float]] = None
    n_representatives: int = 0
    dist_to_argmin: Optional[float] = None
    worst_violation: Optional[float] = None
    value_error: Optional[float] = None
    eta_proxy: Optional[float] = None


class SolveReport(BaseModel):
    model_config = ConfigDict(protected_namespaces=(), populate_by_name=True)

    schema_version: int = Field(1, alias="schema")
    preset: str
    schedule: Dict[str, Any]
    seed: int
    grid: Dict[str, Any]
    horizon: int
    inf_phi: Optional[float] = None
    rows: List[ReportRow]
    rate_fit: Optional[Dict[str, float]] = None

    def column(self, name: str, variant: Optional[RunVariant] = None) -> List[Any]:
        if name not in REPORT_COLUMNS:
            raise KeyError(f"report has no column {name!r}")
        return [getattr(r, name) for r in self.rows if variant is None or r.variant == variant]


class ClaimVerdict(BaseModel):
    claim: str
    column: str
    expected: Optional[float] = None
    observed: Optional[float] = None
    delta: Optional[float] = None
    tolerance: float
    passed: bool
    nu: Optional[int] = None


SetBlock.model_rebuild()
DistributionBlock.model_rebuild()
