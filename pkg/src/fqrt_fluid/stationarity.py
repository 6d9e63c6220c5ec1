"""Stationary point of the fluid ODE, its region and stability constants."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from fractions import Fraction

from .errors import AssumptionViolated, NotInA, NotInteriorCase
from .model import (BoundarySub, DriftPair, FluidState, ModelParams, Region, RegionTag,
                    boundary_sub, classify, drift_pair, isolation_quantities, validate_params)


def _exact(v: float) -> Fraction:
    # the shortest repr keeps decimal inputs such as 1.3 exact
    return Fraction(repr(float(v)))


@dataclass(frozen=True)
class ExactStar:
    z_raw: Fraction
    z: Fraction
    q1: Fraction
    q2: Fraction


def stationary_point_exact(p: ModelParams) -> ExactStar:
    """Stationary point in rational arithmetic from the decimal parameter values."""
    l1, l2, m1, m2 = map(_exact, (p.lambda1, p.lambda2, p.m1, p.m2))
    u11, u12, u22 = map(_exact, (p.mu11, p.mu12, p.mu22))
    t1, t2, kap = map(_exact, (p.theta1, p.theta2, p.kappa))
    r = Fraction(p.j, p.k)
    z_raw = (t2 * (l1 - m1 * u11) - r * t1 * (l2 - m2 * u22) - t1 * t2 * kap) / (
        r * t1 * u22 + t2 * u12)
    z = min(max(z_raw, Fraction(0)), m2)
    q1 = (l1 - m1 * u11 - u12 * z) / t1
    q2 = (l2 - u22 * (m2 - z)) / t2
    return ExactStar(z_raw, z, q1, q2)


def pi_at_star(p: ModelParams, z: float) -> float:
    num = p.mu12 * z
    return num / (num + (p.m2 - z) * p.mu22)


@dataclass(frozen=True)
class StationaryReport:
    x_star: FluidState
    pi_star: float
    region: Region
    z_raw: float
    drift_at_star: DriftPair
    lyapunov: dict
    exp_bound: dict
    ssc: dict

    def to_dict(self) -> dict:
        return {
            "x_star": {"q1": self.x_star.q1, "q2": self.x_star.q2, "z12": self.x_star.z12},
            "pi_star": self.pi_star,
            "region": self.region.label,
            "z_raw": self.z_raw,
            "drift_at_star": asdict(self.drift_at_star),
            "lyapunov": dict(self.lyapunov),
            "exp_bound": dict(self.exp_bound),
            "ssc": dict(self.ssc),
        }


def _require_assumption(p: ModelParams):
    rep = validate_params(p)
    if not rep.assumption_a:
        raise AssumptionViolated("; ".join(rep.messages))
    return rep


def _star(p: ModelParams):
    _require_assumption(p)
    ex = stationary_point_exact(p)
    x = FluidState(float(ex.q1), float(ex.q2), float(ex.z))
    return ex, x, _star_region(p, x)


def stationary_point(p: ModelParams) -> StationaryReport:
    ex, x, region = _star(p)
    pi = pi_at_star(p, x.z12)
    which, C = lyapunov_choice(p)
    pref, rate = exp_stability_constants(p)
    ok, _ = global_ssc_sufficient(p, x)
    alpha = v_ball_alpha(p) if region.sub is BoundarySub.A else None
    return StationaryReport(
        x_star=x, pi_star=pi, region=region, z_raw=float(ex.z_raw),
        drift_at_star=drift_pair(x, p),
        lyapunov={"which": which, "C": C},
        exp_bound={"prefactor": pref, "rate": rate},
        ssc={"global_sufficient": ok, "v_ball_alpha": alpha},
    )


def _star_region(p: ModelParams, x: FluidState) -> Region:
    # x* is on the boundary whenever z* is strictly inside (0, m2); rounding
    # in q1*, q2* must not push it off
    if 0.0 < x.z12 < p.m2:
        return Region(RegionTag.Boundary, boundary_sub(drift_pair(x, p)))
    return classify(x, p)


@dataclass(frozen=True)
class RateRegion:
    region: Region
    lower_margin: float
    upper_margin: float
    minus_margin: float


def region_of_star_by_rates(p: ModelParams) -> RateRegion:
    """Region of x* from the isolated-class quantities alone.

    lower_margin = (qa1 - kappa) - max(mu12*sa2/theta1, r*qa2)
    upper_margin = r*lambda2/theta2 + mu12*m2/theta1 - (qa1 - kappa)
    minus_margin = (qa1 - kappa) - r*qa2
    """
    _require_assumption(p)
    iso = isolation_quantities(p)
    excess = iso.qa1 - p.kappa
    spare_term = p.mu12 * iso.sa2 / p.theta1
    lower = excess - max(spare_term, p.r * iso.qa2)
    upper = p.r * p.lambda2 / p.theta2 + p.mu12 * p.m2 / p.theta1 - excess
    minus = excess - p.r * iso.qa2
    # same band as the state classifier: at z* = 0 or m2 the margins equal
    # -(q1* - r q2* - kappa) up to sign
    scale = 1e-9 * max(1.0, iso.qa1, p.r * p.lambda2 / p.theta2)
    if upper < -scale:
        reg = Region(RegionTag.SPlus)
    elif minus < -scale:
        reg = Region(RegionTag.SMinus)
    elif upper <= scale:
        reg = Region(RegionTag.Boundary, BoundarySub.APlusZero)
    elif lower > scale:
        reg = Region(RegionTag.Boundary, BoundarySub.A)
    elif iso.sa2 > 0 and spare_term > p.r * iso.qa2:
        # equality driven by pool-2 idle capacity still leaves z* = sa2 inside (0, m2)
        reg = Region(RegionTag.Boundary, BoundarySub.A)
    else:
        reg = Region(RegionTag.Boundary, BoundarySub.AMinusZero)
    return RateRegion(reg, lower, upper, minus)


def drift_at_star(p: ModelParams) -> DriftPair:
    """Closed-form drifts at x* in lattice units, checked against the general formula."""
    _, x, _ = _star(p)
    z = x.z12
    if not 0.0 < z < p.m2:
        raise NotInteriorCase(f"z* = {z!r} is not strictly inside (0, {p.m2!r})")
    closed = DriftPair(-(p.j + p.k) * p.mu22 * (p.m2 - z), (p.j + p.k) * p.mu12 * z)
    general = drift_pair(x, p)
    scale = closed.gap
    if (abs(general.delta_plus - closed.delta_plus) > 1e-12 * scale
            or abs(general.delta_minus - closed.delta_minus) > 1e-12 * scale):
        raise AssertionError(f"closed-form drift {closed} disagrees with {general}")
    return closed


def global_ssc_sufficient(p: ModelParams, x0) -> tuple[bool, str | None]:
    """Rate and initial-queue conditions that keep a trajectory from x0 inside A.

    Returns (True, None) or (False, tag) with tag naming the first failed check.
    """
    nu = min(p.mu12, p.mu22)
    if not p.lambda1 < nu * p.m2 + p.m1 * p.mu11:
        return False, "class1_rate"
    if not p.lambda2 > nu * p.m2:
        return False, "class2_rate"
    if not x0.q2 <= p.lambda2 / p.theta2:
        return False, "q2_initial"
    if not x0.q1 <= (p.lambda1 - p.m1 * p.mu11) / p.theta1:
        return False, "q1_initial"
    return True, None


def v_ball_alpha(p: ModelParams) -> float:
    """Radius of the Lyapunov level set around x* certified to stay inside A.

    Drifts here are normalised by (r + 1) rather than the lattice factor (j + k).
    """
    _, x, region = _star(p)
    if region.sub is not BoundarySub.A:
        raise NotInA(f"x* is in region {region.label}, not A")
    z = x.z12
    d_plus = -p.mu22 * (p.r + 1) * (p.m2 - z)
    d_minus = p.mu12 * (p.r + 1) * z
    xi = min(abs(d_plus), d_minus)
    if p.mu22 >= p.mu12:
        return xi / (p.r * p.theta2)
    return xi / (p.mu12 - p.mu22 + p.theta1 + p.r * p.theta2)


def lyapunov_choice(p: ModelParams) -> tuple[str, float | None]:
    if p.mu12 > p.mu22:
        return "V1", None
    return "V2", p.mu22 / p.mu12 + 1.0


def lyapunov_value(x: FluidState, star: FluidState, p: ModelParams) -> float:
    dq1, dq2, dz = x.q1 - star.q1, x.q2 - star.q2, x.z12 - star.z12
    which, C = lyapunov_choice(p)
    if which == "V1":
        return dq1 + dq2
    return C * dq1 + dq2 + (C - 1.0) * dz


def lyapunov_lie_derivative(x: FluidState, star: FluidState, p: ModelParams) -> float:
    """Closed form of dV/dt along the fluid field, linear in the deviations."""
    dq1, dq2, dz = x.q1 - star.q1, x.q2 - star.q2, x.z12 - star.z12
    which, C = lyapunov_choice(p)
    if which == "V1":
        return -p.theta1 * dq1 - p.theta2 * dq2 - (p.mu12 - p.mu22) * dz
    return -C * p.theta1 * dq1 - p.theta2 * dq2 - (C * p.mu12 - p.mu22) * dz


def exp_stability_constants(p: ModelParams) -> tuple[float, float]:
    """(prefactor, rate) of the exponential envelope around x*."""
    if p.mu12 > p.mu22:
        k3 = min(p.theta1, p.theta2, p.mu12 - p.mu22)
        return 1.0, k3 / 2.0
    C = p.mu22 / p.mu12 + 1.0
    k4 = min(C * p.theta1, p.theta2, C * p.mu12 - p.mu22)
    return C / min(1.0, C - 1.0), k4 / 2.0
