"""Forward-Euler integration of the fluid model, including the start-up cascade.

Inside the restricted space S the state is (q1, q2, z12) and the vector
field mixes the two sharing regimes with weight pi12 from the fast
queue-difference process.  Before S is reached the pools fill, queue 1
builds up to kappa and pool 2 starts taking class-1 work; those phases use
simple single-class fluid equations and are chained by event detection.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import AssumptionViolated, NeverReachesS, StepTooLarge
from .model import (BoundarySub, FluidState, ModelParams, Region, RegionTag,
                    boundary_residual, classify, validate_params)
from .qbd import qbd_pi12

log = logging.getLogger(__name__)

DRAIN_FLOOR = 1e-9
CLAMP_WARN = 1e-6


class Phase(str, Enum):
    FillingPools = "FillingPools"
    Queue1Growing = "Queue1Growing"
    SharingRampUp = "SharingRampUp"
    InS = "InS"
    WrongWayDrain = "WrongWayDrain"


@dataclass(frozen=True)
class ExtendedState:
    q1: float
    q2: float
    z11: float
    z12: float
    z22: float
    z21: float
    phase: Phase | None = None

    @classmethod
    def empty(cls) -> "ExtendedState":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_fluid(cls, x: FluidState, p: ModelParams) -> "ExtendedState":
        return cls(x.q1, x.q2, p.m1, x.z12, p.m2 - x.z12, 0.0, Phase.InS)

    @property
    def fluid(self) -> FluidState:
        return FluidState(self.q1, self.q2, self.z12)

    def vector(self) -> np.ndarray:
        return np.array([self.q1, self.q2, self.z11, self.z12, self.z22, self.z21])


@dataclass(frozen=True)
class Sample:
    t: float
    state: ExtendedState
    pi12: float | None
    region: Region | None


@dataclass
class Trajectory:
    h: float
    samples: list = field(default_factory=list)
    # (time, name, detail) for phase changes located inside a step
    events: list = field(default_factory=list)
    # sample index -> boundary residual before the state was snapped onto S^b
    snaps: dict = field(default_factory=dict)
    max_clamp: float = 0.0
    params: ModelParams | None = None

    def __len__(self):
        return len(self.samples)

    @property
    def terminal(self) -> Sample:
        return self.samples[-1]

    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    def column(self, name: str) -> np.ndarray:
        if name == "pi12":
            return np.array([np.nan if s.pi12 is None else s.pi12 for s in self.samples])
        return np.array([getattr(s.state, name) for s in self.samples])

    def region_labels(self) -> list:
        return [None if s.region is None else s.region.label for s in self.samples]

    def to_csv(self, fh=None) -> str | None:
        """Write ``t,q1,q2,z11,z12,z22,z21,pi12,region,phase`` rows (9 significant digits)."""
        own = fh is None
        fh = io.StringIO() if own else fh
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "q1", "q2", "z11", "z12", "z22", "z21", "pi12", "region", "phase"])
        for s in self.samples:
            st = s.state
            w.writerow([f"{s.t:.9g}"] + [f"{v:.9g}" for v in (st.q1, st.q2, st.z11, st.z12,
                                                                st.z22, st.z21)]
                       + ["" if s.pi12 is None else f"{s.pi12:.9g}",
                          "" if s.region is None else s.region.label, st.phase.value])
        return fh.getvalue() if own else None


def read_trajectory_csv(text: str, h: float) -> Trajectory:
    traj = Trajectory(h)
    for row in csv.DictReader(io.StringIO(text)):
        st = ExtendedState(*(float(row[k]) for k in ("q1", "q2", "z11", "z12", "z22", "z21")),
                           phase=Phase(row["phase"]))
        pi = float(row["pi12"]) if row["pi12"] else None
        reg = Region.from_label(row["region"]) if row["region"] else None
        traj.samples.append(Sample(float(row["t"]), st, pi, reg))
    return traj


def psi(x: FluidState, p: ModelParams, pi: float, pool1_rate: float | None = None):
    """Right-hand side (dq1, dq2, dz12) inside S for a given sharing weight pi."""
    out1 = p.mu11 * p.m1 if pool1_rate is None else pool1_rate
    z22 = p.m2 - x.z12
    pool2 = x.z12 * p.mu12 + z22 * p.mu22
    dq1 = p.lambda1 - out1 - pi * pool2 - p.theta1 * x.q1
    dq2 = p.lambda2 - (1.0 - pi) * pool2 - p.theta2 * x.q2
    dz = pi * z22 * p.mu22 - (1.0 - pi) * x.z12 * p.mu12
    return dq1, dq2, dz


def pi_for_region(x: FluidState, p: ModelParams, region: Region,
                  pool1_rate: float | None = None, lattice=None) -> float:
    if region.tag is RegionTag.SPlus:
        return 1.0
    if region.tag is RegionTag.SMinus:
        return 0.0
    if region.sub is BoundarySub.A:
        return qbd_pi12(x, p, pool1_rate, lattice)
    return 1.0 if region.sub in (BoundarySub.APlusStrict, BoundarySub.APlusZero) else 0.0


@dataclass(frozen=True)
class StepResult:
    x: FluidState
    pi12: float
    region: Region
    residual_before_snap: float | None
    clamp: float


def euler_step(x: FluidState, p: ModelParams, h: float, region: Region | None = None,
               pi: float | None = None, pool1_rate: float | None = None,
               lattice: tuple[int, int] | None = None) -> StepResult:
    """One Euler step inside S, with snapping onto S^b.

    The state is put back on S^b when the step crosses it, when it lands
    within h of it while closing in, or when it started in A (where the
    exact flow stays on S^b).  A state leaving S^b into S+ or S- is left
    alone so it can move away.
    """
    if region is None:
        region = classify(x, p, pool1_rate)
    if pi is None:
        pi = pi_for_region(x, p, region, pool1_rate, lattice)
    scale = max(x.q1, p.r * x.q2, 1.0)
    if h > 0.1 * scale:
        raise StepTooLarge(f"snap band {h!r} exceeds 10% of the state scale {scale!r}")
    dq1, dq2, dz = psi(x, p, pi, pool1_rate)
    q1, q2, z = x.q1 + h * dq1, x.q2 + h * dq2, x.z12 + h * dz

    d_new = (p.k * q1 - p.j * q2) / p.k - p.kappa
    if region.on_boundary:
        snap = region.sub is BoundarySub.A
    else:
        d_old = boundary_residual(x, p)
        snap = (d_old > 0) != (d_new > 0) or (abs(d_new) < h and abs(d_new) < abs(d_old))

    clamp = 0.0
    if q1 < p.kappa:
        clamp = max(clamp, p.kappa - q1)
        q1 = p.kappa
    raw = None
    if snap:
        raw = d_new
        q2 = (q1 - p.kappa) * p.k / p.j
    if q2 < 0.0:
        clamp = max(clamp, -q2)
        q2 = 0.0
    if z < 0.0 or z > p.m2:
        zc = min(max(z, 0.0), p.m2)
        clamp = max(clamp, abs(z - zc))
        z = zc
    if clamp > CLAMP_WARN * scale:
        log.warning("clamped state by %.3e at %s", clamp, x)
    return StepResult(FluidState(q1, q2, z), pi, region, raw, clamp)


# ---------------------------------------------------------------- transient

def _pool1_output(s: ExtendedState, p: ModelParams) -> float:
    return p.mu11 * s.z11 + p.mu21 * s.z21


def _in_s_shape(s: ExtendedState, p: ModelParams) -> bool:
    return (s.z11 + s.z21 >= p.m1 and s.z12 + s.z22 >= p.m2 and s.q1 >= p.kappa)


def infer_phase(s: ExtendedState, p: ModelParams) -> Phase:
    if s.z21 > DRAIN_FLOOR * p.m1:
        return Phase.WrongWayDrain
    if _in_s_shape(s, p):
        return Phase.InS
    if s.z11 < p.m1:
        return Phase.FillingPools
    if s.q1 < p.kappa or s.z12 + s.z22 >= p.m2:
        return Phase.Queue1Growing
    return Phase.SharingRampUp


def normalize_state(s: ExtendedState, p: ModelParams) -> ExtendedState:
    """Check ranges, push queued work into idle servers and set the phase."""
    vals = dict(q1=s.q1, q2=s.q2, z11=s.z11, z12=s.z12, z22=s.z22, z21=s.z21)
    for name, v in vals.items():
        if not math.isfinite(v) or v < 0:
            raise ValueError(f"{name} must be finite and nonnegative, got {v!r}")
    eps = 1e-12
    if s.z11 + s.z21 > p.m1 * (1 + eps):
        raise ValueError("pool 1 content exceeds m1")
    if s.z12 + s.z22 > p.m2 * (1 + eps):
        raise ValueError("pool 2 content exceeds m2")
    if s.z12 > 0 and s.z21 > 0:
        raise ValueError("sharing can only go one way: z12 and z21 are both positive")
    # idle servers of a class's own pool absorb its queue at once
    idle1 = p.m1 - s.z11 - s.z21
    move = min(vals["q1"], max(idle1, 0.0))
    vals["q1"] -= move
    vals["z11"] += move
    idle2 = p.m2 - s.z12 - s.z22
    move = min(vals["q2"], max(idle2, 0.0))
    vals["q2"] -= move
    vals["z22"] += move
    if abs(vals["z11"] + s.z21 - p.m1) <= eps * p.m1:
        vals["z11"] = p.m1 - s.z21
    if abs(vals["z12"] + vals["z22"] - p.m2) <= eps * p.m2:
        vals["z22"] = p.m2 - vals["z12"]
    out = ExtendedState(**vals)
    return replace(out, phase=infer_phase(out, p))


def _pre_s_field(s: ExtendedState, p: ModelParams):
    """Derivatives of (q1, q2, z11, z12, z22, z21) before S is reached."""
    q1, q2, z11, z12, z22, z21 = s.q1, s.q2, s.z11, s.z12, s.z22, s.z21
    d = np.zeros(6)
    out1 = _pool1_output(s, p)
    full1 = z11 + z21 >= p.m1
    full2 = z12 + z22 >= p.m2
    if z21 > 0:
        d[5] = -p.mu21 * z21
        d[2] = p.mu21 * z21

    flow12 = 0.0
    if not full1:
        d[2] += p.lambda1 - p.mu11 * z11
    else:
        net1 = p.lambda1 - out1 - p.theta1 * q1
        if q1 <= 0.0 and net1 < 0.0:
            # pool 1 stops being full
            d[2] += p.lambda1 - p.mu11 * z11 - (p.mu21 * z21 if z21 > 0 else 0.0)
        elif q1 >= p.kappa and not full2 and net1 >= 0.0:
            flow12 = net1
        else:
            d[0] = net1

    if not full2:
        d[4] = p.lambda2 - p.mu22 * z22
        d[3] = flow12 - p.mu12 * z12
    else:
        net2 = p.lambda2 - p.mu22 * z22 - p.mu12 * z12 - p.theta2 * q2
        if q2 <= 0.0 and net2 < 0.0:
            d[4] = p.lambda2 - p.mu22 * z22
            d[3] = -p.mu12 * z12
        else:
            # pool-2 servers freed by class 1 go to class 2
            d[1] = net2
            d[3] = -p.mu12 * z12
            d[4] = p.mu12 * z12
    return d


def _event_residuals(v: np.ndarray, p: ModelParams) -> np.ndarray:
    """Signed residuals whose sign change marks a phase change.

    Order: pool 1 full, queue 1 at kappa, pool 2 full, queue 1 empty,
    queue 2 empty, drain finished.
    """
    q1, q2, z11, z12, z22, z21 = v
    return np.array([
        z11 + z21 - p.m1,
        q1 - p.kappa,
        z12 + z22 - p.m2,
        q1,
        q2,
        z21 - DRAIN_FLOOR * p.m1,
    ])


def _apply_cap(v: np.ndarray, which: int, p: ModelParams) -> np.ndarray:
    v = v.copy()
    if which == 0:
        v[2] = p.m1 - v[5]
    elif which == 1:
        v[0] = p.kappa
    elif which == 2:
        v[4] = p.m2 - v[3]
    elif which == 3:
        v[0] = 0.0
    elif which == 4:
        v[1] = 0.0
    elif which == 5:
        v[2] += v[5]
        v[5] = 0.0
    return v


def _clip_transient(v: np.ndarray, p: ModelParams) -> np.ndarray:
    v = np.maximum(v, 0.0)
    v[2] = min(v[2], p.m1 - v[5])
    v[4] = min(v[4], p.m2 - v[3])
    return v


def _state_from_vector(v: np.ndarray, p: ModelParams) -> ExtendedState:
    s = ExtendedState(*map(float, v))
    return replace(s, phase=infer_phase(s, p))


def _s_shaped(s: ExtendedState, p: ModelParams) -> bool:
    return s.phase is Phase.InS or (s.phase is Phase.WrongWayDrain and _in_s_shape(s, p))


def _transient_step(s: ExtendedState, p: ModelParams, t: float, h: float, traj: Trajectory):
    """Advance a state outside S by h, stopping at phase changes inside the step.

    Returns (new_state, remaining_time).  remaining_time is positive only if
    the state took the shape of S part way through; the caller finishes the
    step with the in-S integrator.
    """
    v = s.vector()
    remaining = h
    cur = s
    for _ in range(16):
        f = _pre_s_field(cur, p)
        new = v + remaining * f
        g_old = _event_residuals(v, p)
        g_new = _event_residuals(new, p)
        # an event fires when a residual leaves its side strictly or lands on zero
        crossing = ((g_old < 0) & (g_new >= 0)) | ((g_old > 0) & (g_new <= 0))
        if not crossing.any():
            return _state_from_vector(_clip_transient(new, p), p), 0.0
        fracs = np.full(len(g_old), np.inf)
        fracs[crossing] = g_old[crossing] / (g_old[crossing] - g_new[crossing])
        which = int(np.argmin(fracs))
        tau = float(min(max(fracs[which], 0.0), 1.0))
        v = _clip_transient(_apply_cap(v + tau * remaining * f, which, p), p)
        remaining *= 1.0 - tau
        after = _state_from_vector(v, p)
        if after.phase is not cur.phase:
            traj.events.append((t + h - remaining, after.phase.value, None))
        cur = after
        if _s_shaped(cur, p):
            return cur, remaining
        if remaining <= 1e-15 * h:
            return cur, 0.0
    return cur, 0.0


def _in_s_sample(t, s: ExtendedState, p: ModelParams, lattice=None):
    x = s.fluid
    region = classify(x, p)
    return Sample(t, s, pi_for_region(x, p, region, lattice=lattice), region)


def _s_step(s: ExtendedState, p: ModelParams, dt: float, t_end_of_step: float,
            traj: Trajectory, sample: Sample, lattice=None):
    """Euler step for an S-shaped state, including the tail of a class-2 drain out of pool 1."""
    if s.phase is Phase.InS:
        res = euler_step(s.fluid, p, dt, sample.region, sample.pi12)
        traj.max_clamp = max(traj.max_clamp, res.clamp)
        return ExtendedState.from_fluid(res.x, p), res.residual_before_snap
    out1 = _pool1_output(s, p)
    res = euler_step(s.fluid, p, dt, pool1_rate=out1, lattice=lattice)
    traj.max_clamp = max(traj.max_clamp, res.clamp)
    z21 = s.z21 * (1.0 - p.mu21 * dt)
    if z21 <= DRAIN_FLOOR * p.m1:
        z21 = 0.0
        traj.events.append((t_end_of_step, Phase.InS.value, classify(res.x, p).label))
    x = res.x
    new = ExtendedState(x.q1, x.q2, p.m1 - z21, x.z12, p.m2 - x.z12, z21)
    return replace(new, phase=infer_phase(new, p)), res.residual_before_snap


def solve_ivp(x0, p: ModelParams, h: float = 0.01, t_end: float = 50.0,
              lattice: tuple[int, int] | None = None) -> Trajectory:
    """Integrate from x0 (an ExtendedState or FluidState) up to t_end.

    Raises AssumptionViolated if the run reaches S while the overload
    assumption fails.  Raises NeverReachesS (carrying the partial
    trajectory) if S is never reached and x* is outside A and S+; a run that
    is merely too short for an x* in A or S+ is returned as is.

    ``lattice`` = (J, K) is passed to the QBD that supplies pi12.
    """
    if not (h > 0 and t_end > 0):
        raise ValueError("h and t_end must be positive")
    report = validate_params(p)
    if isinstance(x0, FluidState):
        x0 = ExtendedState.from_fluid(x0, p)
    state = normalize_state(x0, p)
    traj = Trajectory(h, params=p)
    n_steps = int(math.ceil(t_end / h - 1e-9))

    def check_assumption():
        if not report.assumption_a:
            raise AssumptionViolated("; ".join(report.messages))

    if state.phase is Phase.InS:
        check_assumption()
        current = _in_s_sample(0.0, state, p, lattice)
        traj.events.append((0.0, Phase.InS.value, current.region.label))
    else:
        current = Sample(0.0, state, None, None)
    traj.samples.append(current)

    for i in range(n_steps):
        t = i * h
        t_next = (i + 1) * h
        st = current.state
        raw = None
        if _s_shaped(st, p):
            check_assumption()
            st, raw = _s_step(st, p, h, t_next, traj, current, lattice)
        else:
            # a step that reaches S ends there; the remainder (< h) is dropped
            # so that the entry point is recorded as a grid sample
            st, remaining = _transient_step(st, p, t, h, traj)
            if remaining > 0.0 and st.phase is Phase.InS:
                check_assumption()
                entry = _in_s_sample(t_next - remaining, st, p, lattice)
                traj.events[-1] = (entry.t, Phase.InS.value, entry.region.label)
        if st.phase is Phase.InS:
            current = _in_s_sample(t_next, st, p, lattice)
        else:
            current = Sample(t_next, st, None, None)
        if raw is not None:
            traj.snaps[len(traj.samples)] = raw
        traj.samples.append(current)

    if not any(smp.state.phase is Phase.InS for smp in traj.samples):
        _maybe_never_reaches(p, traj)
    return traj


def _maybe_never_reaches(p: ModelParams, traj: Trajectory):
    from .stationarity import stationary_point
    try:
        star = stationary_point(p)
    except AssumptionViolated:
        raise NeverReachesS("S was not reached and the overload assumption fails", traj)
    reg = star.region
    if not (reg.tag is RegionTag.SPlus or reg.sub is BoundarySub.A):
        raise NeverReachesS(
            f"S was not reached by t = {traj.terminal.t:g}; x* lies in {reg.label}", traj)


def hitting_time(traj: Trajectory) -> float | None:
    """First time the InS part of the trajectory sits on S^b."""
    for i, smp in enumerate(traj.samples):
        if smp.state.phase is not Phase.InS or smp.region is None or not smp.region.on_boundary:
            continue
        if i == 0:
            return smp.t
        prev = traj.samples[i - 1]
        if prev.state.phase is not Phase.InS:
            for t, name, detail in traj.events:
                if name == Phase.InS.value and prev.t <= t <= smp.t:
                    if detail is not None and Region.from_label(detail).on_boundary:
                        return t
            return smp.t
        raw = traj.snaps.get(i)
        if raw is None or traj.params is None:
            return smp.t
        d_prev = boundary_residual(prev.state.fluid, traj.params)
        if (d_prev > 0) != (raw > 0):
            return prev.t + (smp.t - prev.t) * d_prev / (d_prev - raw)
        return smp.t
    return None
