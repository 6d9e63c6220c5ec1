"""Parameters, states and the geometry of the restricted state space.

The fluid state inside the restricted space is x = (q1, q2, z12): the two
queue contents and the amount of class-1 work held by pool 2.  Pool 1 is
then full of class 1 (z11 = m1) and pool 2 holds z22 = m2 - z12 of class 2.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields, replace
from enum import Enum

from .errors import InvalidParameters

_RATE_FIELDS = ("lambda1", "lambda2", "m1", "m2", "mu11", "mu12", "mu21", "mu22",
                "theta1", "theta2")


@dataclass(frozen=True)
class ModelParams:
    """Rates and capacities of the fluid X model.

    The target ratio r = j/k is held as the coprime integer pair
    (ratio_num, ratio_den) and its float value is only derived.
    """

    lambda1: float
    lambda2: float
    m1: float
    m2: float
    mu11: float
    mu12: float
    mu21: float
    mu22: float
    theta1: float
    theta2: float
    ratio_num: int
    ratio_den: int
    kappa: float = 0.0

    def __post_init__(self):
        for name in _RATE_FIELDS + ("kappa",):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise InvalidParameters(f"{name} must be a number, got {value!r}")
            if not math.isfinite(value):
                raise InvalidParameters(f"{name} must be finite, got {value!r}")
            if value < 0:
                raise InvalidParameters(f"{name} must be nonnegative, got {value!r}")
            object.__setattr__(self, name, float(value))
        for name in ("ratio_num", "ratio_den"):
            value = getattr(self, name)
            if isinstance(value, float) and value.is_integer():
                value = int(value)
                object.__setattr__(self, name, value)
            if isinstance(value, bool) or not isinstance(value, int) or value <= 0:
                raise InvalidParameters(f"{name} must be a positive integer, got {value!r}")
        if math.gcd(self.ratio_num, self.ratio_den) != 1:
            raise InvalidParameters(
                f"ratio_num={self.ratio_num} and ratio_den={self.ratio_den} are not coprime")

    @property
    def j(self) -> int:
        return self.ratio_num

    @property
    def k(self) -> int:
        return self.ratio_den

    @property
    def r(self) -> float:
        return self.ratio_num / self.ratio_den

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        names = [f.name for f in fields(cls)]
        unknown = sorted(set(data) - set(names))
        if unknown:
            raise InvalidParameters(f"unknown parameter keys: {', '.join(unknown)}")
        missing = [n for n in names if n not in data and n != "kappa"]
        if missing:
            raise InvalidParameters(f"missing parameter keys: {', '.join(missing)}")
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ModelParams":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidParameters(f"params file is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise InvalidParameters("params JSON must be an object")
        return cls.from_dict(data)


def canonical_params(**changes) -> ModelParams:
    """The reference overloaded instance used throughout the tests and demos."""
    p = ModelParams(lambda1=1.3, lambda2=0.9, m1=1.0, m2=1.0, mu11=1.0, mu12=0.8,
                    mu21=0.8, mu22=1.0, theta1=0.3, theta2=0.3, ratio_num=4,
                    ratio_den=5, kappa=0.0)
    return replace(p, **changes) if changes else p


@dataclass(frozen=True)
class FluidState:
    q1: float
    q2: float
    z12: float

    def __post_init__(self):
        for name in ("q1", "q2", "z12"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)

    def as_tuple(self):
        return (self.q1, self.q2, self.z12)


class RegionTag(str, Enum):
    SPlus = "SPlus"
    SMinus = "SMinus"
    Boundary = "Boundary"


class BoundarySub(str, Enum):
    A = "A"
    APlusStrict = "APlusStrict"
    APlusZero = "APlusZero"
    AMinusStrict = "AMinusStrict"
    AMinusZero = "AMinusZero"


@dataclass(frozen=True)
class Region:
    tag: RegionTag
    sub: BoundarySub | None = None

    @property
    def label(self) -> str:
        """Short string: ``SPlus``, ``SMinus`` or the boundary sub-tag name."""
        return self.sub.value if self.tag is RegionTag.Boundary else self.tag.value

    @property
    def on_boundary(self) -> bool:
        return self.tag is RegionTag.Boundary

    @classmethod
    def from_label(cls, label: str) -> "Region":
        if label in (RegionTag.SPlus.value, RegionTag.SMinus.value):
            return cls(RegionTag(label))
        return cls(RegionTag.Boundary, BoundarySub(label))

    def __str__(self):
        return self.label


@dataclass(frozen=True)
class FtspRates:
    """Jump rates of the queue-difference process at a frozen fluid state.

    The difference is measured in units of 1/k so that its jumps are +-j
    (class-2 events) and +-k (class-1 events).  ``plus`` rates apply when the
    difference is positive, ``minus`` rates when it is zero or negative.
    """

    lam_k_plus: float
    lam_j_plus: float
    mu_k_plus: float
    mu_j_plus: float
    lam_k_minus: float
    lam_j_minus: float
    mu_k_minus: float
    mu_j_minus: float

    @property
    def sigma_plus(self):
        return self.lam_k_plus + self.lam_j_plus + self.mu_k_plus + self.mu_j_plus

    @property
    def sigma_minus(self):
        return self.lam_k_minus + self.lam_j_minus + self.mu_k_minus + self.mu_j_minus


def ftsp_rates(x: FluidState, p: ModelParams, pool1_rate: float | None = None) -> FtspRates:
    """Rates of the four jump types above and below zero.

    ``pool1_rate`` overrides the class-1 service output of pool 1 (mu11*m1),
    which the transient solver needs while class-2 work drains out of pool 1.
    """
    out1 = p.mu11 * p.m1 if pool1_rate is None else pool1_rate
    pool2 = p.mu12 * x.z12 + p.mu22 * (p.m2 - x.z12)
    ab1 = p.theta1 * x.q1
    ab2 = p.theta2 * x.q2
    return FtspRates(
        lam_k_plus=p.lambda1,
        lam_j_plus=ab2,
        mu_k_plus=out1 + pool2 + ab1,
        mu_j_plus=p.lambda2,
        lam_k_minus=p.lambda1,
        lam_j_minus=pool2 + ab2,
        mu_k_minus=out1 + ab1,
        mu_j_minus=p.lambda2,
    )


@dataclass(frozen=True)
class DriftPair:
    delta_plus: float
    delta_minus: float

    @property
    def gap(self) -> float:
        return self.delta_minus - self.delta_plus


def drift_from_rates(rates: FtspRates, j: int, k: int) -> DriftPair:
    plus = j * (rates.lam_j_plus - rates.mu_j_plus) + k * (rates.lam_k_plus - rates.mu_k_plus)
    minus = j * (rates.lam_j_minus - rates.mu_j_minus) + k * (rates.lam_k_minus - rates.mu_k_minus)
    return DriftPair(plus, minus)


def drift_pair(x: FluidState, p: ModelParams, pool1_rate: float | None = None) -> DriftPair:
    """Mean drift of the queue difference above and below zero (lattice units)."""
    return drift_from_rates(ftsp_rates(x, p, pool1_rate), p.j, p.k)


def drift_gap(x: FluidState, p: ModelParams) -> float:
    """delta_minus - delta_plus, which never vanishes."""
    return (p.j + p.k) * (p.mu12 * x.z12 + p.mu22 * (p.m2 - x.z12))


@dataclass(frozen=True)
class IsolationQuantities:
    qa1: float
    qa2: float
    sa1: float
    sa2: float


def isolation_quantities(p: ModelParams) -> IsolationQuantities:
    """Stationary queue and idle capacity of each class served by its own pool only."""
    return IsolationQuantities(
        qa1=max(p.lambda1 - p.mu11 * p.m1, 0.0) / p.theta1,
        qa2=max(p.lambda2 - p.mu22 * p.m2, 0.0) / p.theta2,
        sa1=max(p.m1 - p.lambda1 / p.mu11, 0.0),
        sa2=max(p.m2 - p.lambda2 / p.mu22, 0.0),
    )


@dataclass(frozen=True)
class ValidationReport:
    positivity: bool
    coprime_ratio: bool
    assumption_a: bool
    assumption_margin: float
    isolation: IsolationQuantities
    messages: tuple = ()

    @property
    def ok(self) -> bool:
        return self.positivity and self.coprime_ratio and self.assumption_a

    def to_dict(self) -> dict:
        return {
            "positivity": self.positivity,
            "coprime_ratio": self.coprime_ratio,
            "assumption_a": self.assumption_a,
            "assumption_margin": self.assumption_margin,
            "isolation": asdict(self.isolation),
            "messages": list(self.messages),
        }


def assumption_margin(p: ModelParams) -> float:
    """theta1*(qa1 - kappa) - mu12*sa2; nonnegative when class 1 can keep pool 2 busy."""
    iso = isolation_quantities(p)
    return p.theta1 * (iso.qa1 - p.kappa) - p.mu12 * iso.sa2


def validate_params(p: ModelParams) -> ValidationReport:
    """Check strict positivity and the overload assumption.

    Raises InvalidParameters naming the first offending field.  A failed
    overload assumption is only flagged in the report.
    """
    for name in _RATE_FIELDS:
        if not getattr(p, name) > 0:
            raise InvalidParameters(f"{name} must be strictly positive, got {getattr(p, name)!r}")
    iso = isolation_quantities(p)
    margin = p.theta1 * (iso.qa1 - p.kappa) - p.mu12 * iso.sa2
    # the margin is a difference of O(1) terms; let round-off through
    ok_a = margin >= -1e-12 * max(1.0, p.theta1 * iso.qa1, p.theta1 * p.kappa, p.mu12 * iso.sa2)
    msgs = []
    if not ok_a:
        msgs.append(
            f"assumption A fails: theta1*(qa1-kappa) = {p.theta1 * (iso.qa1 - p.kappa)!r} "
            f"< mu12*sa2 = {p.mu12 * iso.sa2!r}")
    return ValidationReport(True, True, ok_a, margin, iso, tuple(msgs))


def boundary_residual(x: FluidState, p: ModelParams) -> float:
    """q1 - r*q2 - kappa, computed with the integer ratio."""
    return (p.k * x.q1 - p.j * x.q2) / p.k - p.kappa


def boundary_tolerance(x: FluidState, p: ModelParams) -> float:
    return 1e-9 * max(1.0, x.q1, p.r * x.q2)


def boundary_sub(d: DriftPair) -> BoundarySub:
    tol = 1e-9 * d.gap
    if d.delta_plus > tol:
        return BoundarySub.APlusStrict
    if d.delta_plus >= -tol:
        return BoundarySub.APlusZero
    if d.delta_minus > tol:
        return BoundarySub.A
    if d.delta_minus >= -tol:
        return BoundarySub.AMinusZero
    return BoundarySub.AMinusStrict


def classify(x: FluidState, p: ModelParams, pool1_rate: float | None = None) -> Region:
    res = boundary_residual(x, p)
    if res > boundary_tolerance(x, p):
        return Region(RegionTag.SPlus)
    if res < -boundary_tolerance(x, p):
        return Region(RegionTag.SMinus)
    return Region(RegionTag.Boundary, boundary_sub(drift_pair(x, p, pool1_rate)))


def queue_bounds(x0, p: ModelParams):
    """Upper bounds on both queues along any trajectory started at x0."""
    return max(x0.q1, p.lambda1 / p.theta1), max(x0.q2, p.lambda2 / p.theta2)
