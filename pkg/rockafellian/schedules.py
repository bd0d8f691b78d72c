"""
Parameter schedules (lambda^nu, theta^nu, eps^nu) driven by a measured
distance d^nu = d(mu^nu, mu) or by the index nu, and a finite-horizon
validator of their limit conditions.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from . import config
from .errors import InsufficientDataError, InvalidInputError
from .schemas import Proposition, ScheduleBlock

logger = logging.getLogger(__name__)

TAIL = 10
MIN_HORIZON = 20
TAIL_DROP = 10.0
SLACK = 1e-12
DEFAULT_EPS0 = 0.1


class RuleSource(str, Enum):
    DISTANCE = "distance"   # c * d^e
    INDEX = "index"         # c * nu^(-e)
    LIL = "lil"             # c * (log(nu+2)/nu)^e
    OFF = "off"


@dataclass(frozen=True)
class Rule:
    source: RuleSource
    exponent: float = 0.0
    coefficient: float = 1.0

    def __call__(self, nu: int, d: float) -> Optional[float]:
        if self.source == RuleSource.OFF:
            return None
        if self.source == RuleSource.DISTANCE:
            return self.coefficient * max(d, config.DISTANCE_FLOOR) ** self.exponent
        if self.source == RuleSource.INDEX:
            return self.coefficient * float(nu) ** (-self.exponent)
        return self.coefficient * (math.log(nu + 2) / nu) ** self.exponent

    def describe(self) -> dict:
        return {"source": self.source.value, "exponent": self.exponent, "coefficient": self.coefficient}


OFF = Rule(RuleSource.OFF)


@dataclass(frozen=True)
class ScheduleValues:
    lam: float
    theta: Optional[float]
    eps: Optional[float]


@dataclass(frozen=True)
class Schedule:
    alpha: float
    lam_rule: Rule
    theta_rule: Rule = OFF
    eps_rule: Rule = OFF
    provenance: Proposition = Proposition.EXPLICIT

    def __post_init__(self):
        if self.alpha < 1:
            raise InvalidInputError(f"schedule alpha must be >= 1, got {self.alpha}")
        if self.lam_rule.source == RuleSource.OFF:
            raise InvalidInputError("a schedule needs a lambda rule")

    def values(self, nu: int, d: float = 0.0) -> ScheduleValues:
        if d <= 0 and self.lam_rule.source == RuleSource.DISTANCE:
            logger.debug("d=%g at nu=%d replaced by the distance floor", d, nu)
        return ScheduleValues(self.lam_rule(nu, d), self.theta_rule(nu, d), self.eps_rule(nu, d))

    def ratio(self, nu: int, d: float) -> float:
        """The limit quantity tied to this schedule's provenance."""
        v = self.values(nu, d)
        d = max(d, config.DISTANCE_FLOOR)
        if self.provenance in (Proposition.BL, Proposition.FM, Proposition.W1, Proposition.RATE_S2):
            return (d / v.theta) ** self.alpha / v.lam
        if self.provenance == Proposition.EMPIRICAL:
            return math.log(nu + 2) / math.log(math.log(nu + 2))
        return d ** self.alpha / v.lam

    @property
    def ratio_diverges(self) -> bool:
        return self.provenance == Proposition.EMPIRICAL

    def describe(self) -> dict:
        return {
            "proposition": self.provenance.value,
            "alpha": self.alpha,
            "lam": self.lam_rule.describe(),
            "theta": self.theta_rule.describe(),
            "eps": self.eps_rule.describe(),
        }

    def table(self, nus: Sequence[int], ds: Sequence[float]) -> pd.DataFrame:
        rows = []
        for nu, d in zip(nus, ds):
            v = self.values(nu, d)
            rows.append({"nu": nu, "d": d, "lam": v.lam, "theta": v.theta, "eps": v.eps,
                         "ratio": self.ratio(nu, d)})
        return pd.DataFrame(rows, columns=["nu", "d", "lam", "theta", "eps", "ratio"])


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

def _metric_schedule(tag: Proposition, alpha: float, eps0: float) -> Schedule:
    if not 0 < eps0 < 0.5:
        raise InvalidInputError(f"eps0 must lie in (0, 1/2), got {eps0}")
    rule = Rule(RuleSource.DISTANCE, 0.5 - eps0)
    return Schedule(alpha, rule, theta_rule=rule, provenance=tag)


def schedule_bl(alpha: float = 1.0, eps0: float = DEFAULT_EPS0) -> Schedule:
    """lambda = theta = d_BL^(1/2 - eps0)."""
    return _metric_schedule(Proposition.BL, alpha, eps0)


def schedule_fm(alpha: float = 1.0, eps0: float = DEFAULT_EPS0) -> Schedule:
    return _metric_schedule(Proposition.FM, alpha, eps0)


def schedule_w1(alpha: float = 1.0, eps0: float = DEFAULT_EPS0) -> Schedule:
    return _metric_schedule(Proposition.W1, alpha, eps0)


def schedule_mi(alpha: float = 1.0, rate: bool = False) -> Schedule:
    """lambda = d_mi^(alpha/2); the rate pick uses lambda = d^(alpha^2/(alpha+1)), eps = d^(alpha/(alpha+1))."""
    if rate:
        return schedule_rate_s1(alpha)
    return Schedule(alpha, Rule(RuleSource.DISTANCE, alpha / 2), provenance=Proposition.MI)


def schedule_tv(alpha: float = 1.0) -> Schedule:
    return Schedule(alpha, Rule(RuleSource.DISTANCE, alpha / 2), provenance=Proposition.TV)


def schedule_kl(alpha: float = 1.0) -> Schedule:
    return Schedule(alpha, Rule(RuleSource.DISTANCE, alpha / 2), provenance=Proposition.KL)


def schedule_rate_s1(alpha: float = 1.0) -> Schedule:
    return Schedule(
        alpha,
        Rule(RuleSource.DISTANCE, alpha ** 2 / (alpha + 1)),
        eps_rule=Rule(RuleSource.DISTANCE, alpha / (alpha + 1)),
        provenance=Proposition.RATE_S1,
    )


def schedule_rate_s2(alpha: float = 1.0) -> Schedule:
    return Schedule(
        alpha,
        Rule(RuleSource.DISTANCE, alpha ** 2 / (2 * alpha + 2)),
        theta_rule=Rule(RuleSource.DISTANCE, 0.5),
        eps_rule=Rule(RuleSource.DISTANCE, alpha / (2 * alpha + 2)),
        provenance=Proposition.RATE_S2,
    )


def schedule_empirical(alpha: float = 1.0) -> Schedule:
    """lambda = (log(nu+2)/nu)^(alpha/2)."""
    return Schedule(alpha, Rule(RuleSource.LIL, alpha / 2), provenance=Proposition.EMPIRICAL)


def schedule_explicit(alpha: float = 1.0, exponent: float = 0.5, coefficient: float = 1.0) -> Schedule:
    """lambda = coefficient * nu^(-exponent)."""
    if not exponent > 0 or not coefficient > 0:
        raise InvalidInputError(f"explicit schedule needs positive exponent and coefficient, got {exponent}, {coefficient}")
    return Schedule(alpha, Rule(RuleSource.INDEX, exponent, coefficient), provenance=Proposition.EXPLICIT)


def build_schedule(block: ScheduleBlock) -> Schedule:
    """Schedule for a config block, with overrides applied."""
    o = block.overrides
    eps0 = o.eps0 if o is not None and o.eps0 is not None else DEFAULT_EPS0
    alpha = block.alpha
    builders = {
        Proposition.BL: lambda: schedule_bl(alpha, eps0),
        Proposition.FM: lambda: schedule_fm(alpha, eps0),
        Proposition.W1: lambda: schedule_w1(alpha, eps0),
        Proposition.MI: lambda: schedule_mi(alpha),
        Proposition.TV: lambda: schedule_tv(alpha),
        Proposition.KL: lambda: schedule_kl(alpha),
        Proposition.EMPIRICAL: lambda: schedule_empirical(alpha),
        Proposition.RATE_S1: lambda: schedule_rate_s1(alpha),
        Proposition.RATE_S2: lambda: schedule_rate_s2(alpha),
        Proposition.EXPLICIT: lambda: schedule_explicit(alpha),
    }
    schedule = builders[block.proposition]()
    if o is None:
        return schedule
    lam = schedule.lam_rule
    if o.lam_exponent is not None:
        lam = Rule(lam.source, o.lam_exponent, lam.coefficient)
    if o.lam_coefficient is not None:
        lam = Rule(lam.source, lam.exponent, o.lam_coefficient)
    theta = schedule.theta_rule
    if o.theta_exponent is not None:
        theta = Rule(RuleSource.DISTANCE, o.theta_exponent)
    eps = schedule.eps_rule
    if o.eps_exponent is not None:
        eps = Rule(RuleSource.DISTANCE, o.eps_exponent)
    return Schedule(alpha, lam, theta, eps, schedule.provenance)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

@dataclass
class ConditionVerdict:
    name: str
    passed: bool
    first: float
    last: float
    diverging: bool = False


@dataclass
class ScheduleValidation:
    horizon: int
    verdicts: Dict[str, ConditionVerdict] = field(default_factory=dict)
    vacuous: bool = False

    @property
    def passed(self) -> bool:
        return self.vacuous or all(v.passed for v in self.verdicts.values())

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "vacuous": self.vacuous,
            "passed": self.passed,
            "conditions": {k: vars(v) for k, v in self.verdicts.items()},
        }


def tends_to_zero(seq: Sequence[float], tail: int = TAIL) -> bool:
    """Last `tail` values strictly decreasing and the last one below first/10."""
    s = np.asarray(seq, dtype=float)
    window = s[-tail:]
    decreasing = np.all(window[1:] <= window[:-1] * (1.0 + SLACK))
    return bool(decreasing and s[-1] <= s[0] / TAIL_DROP * (1.0 + SLACK))


def tends_to_infinity(seq: Sequence[float], tail: int = TAIL) -> bool:
    window = np.asarray(seq, dtype=float)[-tail:]
    return bool(np.all(np.diff(window) > 0))


def _verdict(name: str, seq: List[float], diverging: bool = False) -> ConditionVerdict:
    ok = tends_to_infinity(seq) if diverging else tends_to_zero(seq)
    return ConditionVerdict(name, ok, float(seq[0]), float(seq[-1]), diverging)


def validate(schedule: Schedule, ds: Sequence[float], nus: Optional[Sequence[int]] = None) -> ScheduleValidation:
    """Tail-heuristic verdicts for lambda -> 0, theta -> 0 and the ratio condition."""
    ds = [float(d) for d in ds]
    nus = list(range(1, len(ds) + 1)) if nus is None else [int(n) for n in nus]
    if len(nus) != len(ds):
        raise InvalidInputError(f"{len(nus)} indices for {len(ds)} distances")
    if len(ds) < MIN_HORIZON:
        raise InsufficientDataError(f"horizon {len(ds)} is below the minimum of {MIN_HORIZON}")

    report = ScheduleValidation(horizon=len(ds))
    uses_distance = schedule.lam_rule.source == RuleSource.DISTANCE
    zeros = [d <= 0 for d in ds]
    if uses_distance and all(zeros):
        report.vacuous = True
        return report
    if uses_distance and any(zeros[TAIL:]):
        logger.warning("distance sequence hits 0 in its tail; substituting the floor %g", config.DISTANCE_FLOOR)

    values = [schedule.values(nu, d) for nu, d in zip(nus, ds)]
    report.verdicts["lam"] = _verdict("lam", [v.lam for v in values])
    if schedule.theta_rule.source != RuleSource.OFF:
        report.verdicts["theta"] = _verdict("theta", [v.theta for v in values])
    ratios = [schedule.ratio(nu, d) for nu, d in zip(nus, ds)]
    report.verdicts["ratio"] = _verdict("ratio", ratios, diverging=schedule.ratio_diverges)
    return report


def geometric_horizon(count: int = 60) -> List[int]:
    """nu = 2^k for k = 0..count-1."""
    return [2 ** k for k in range(count)]
