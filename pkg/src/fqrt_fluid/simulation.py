"""Exact-jump simulation of the scale-n Markovian X model under FQR-T.

Counts are integers.  The routing difference D = (Q1 - kappa_n) - r*Q2 is
tracked as the integer k*D so that its sign is never subject to round-off.
"""
from __future__ import annotations

import csv
import io
import math
from array import array
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from fractions import Fraction

import numpy as np

from .errors import InvalidParameters, WindowTooShort
from .model import ModelParams

_BATCH = 1 << 14


class SharingMode(str, Enum):
    None_ = "None"
    Pool2HelpsClass1 = "Pool2HelpsClass1"
    Pool1HelpsClass2 = "Pool1HelpsClass2"


@dataclass(frozen=True)
class SimState:
    Q1: int = 0
    Q2: int = 0
    Z11: int = 0
    Z12: int = 0
    Z21: int = 0
    Z22: int = 0
    sharing_mode: SharingMode = SharingMode.None_
    clock: float = 0.0

    def check(self, n1: int, n2: int):
        counts = (self.Q1, self.Q2, self.Z11, self.Z12, self.Z21, self.Z22)
        if any(c < 0 for c in counts):
            raise AssertionError(f"negative count in {self}")
        if self.Z11 + self.Z21 > n1 or self.Z12 + self.Z22 > n2:
            raise AssertionError(f"pool capacity exceeded in {self}")
        if self.Z12 > 0 and self.Z21 > 0:
            raise AssertionError(f"two-way sharing in {self}")


def threshold_default(n: int, c: float = 1.0, exponent: float = 0.6) -> int:
    """Threshold count growing like n**exponent, between sqrt(n) and n."""
    return int(math.ceil(c * n ** exponent))


@dataclass(frozen=True)
class SimConfig:
    params: ModelParams
    n: int
    seed: int = 0
    t_end: float = 50.0
    sample_dt: float = 0.1
    k12: int | None = None
    k21: int | None = None
    kappa_n: int | None = None
    threshold_c: float = 1.0
    threshold_exp: float = 0.6
    # ratio used by the reverse control; defaults to r
    r21: Fraction | None = None
    initial: SimState | None = None

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, int) or self.n <= 0:
            raise InvalidParameters(f"n must be a positive integer, got {self.n!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2 ** 64:
            raise InvalidParameters(f"seed must be an integer in [0, 2**64), got {self.seed!r}")
        for name in ("t_end", "sample_dt", "threshold_c", "threshold_exp"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise InvalidParameters(f"{name} must be a positive number, got {v!r}")
        for name in ("k12", "k21", "kappa_n"):
            v = getattr(self, name)
            if v is not None and (isinstance(v, bool) or not isinstance(v, int) or v < 0):
                raise InvalidParameters(f"{name} must be a nonnegative integer, got {v!r}")
        if self.r21 is not None:
            object.__setattr__(self, "r21", Fraction(self.r21))
            if self.r21 <= 0:
                raise InvalidParameters("r21 must be positive")

    @property
    def servers(self) -> tuple[int, int]:
        return round(self.n * self.params.m1), round(self.n * self.params.m2)

    def resolved(self) -> "SimConfig":
        """Copy with every default filled in."""
        k = threshold_default(self.n, self.threshold_c, self.threshold_exp)
        return replace(
            self,
            k12=k if self.k12 is None else self.k12,
            k21=k if self.k21 is None else self.k21,
            kappa_n=round(self.n * self.params.kappa) if self.kappa_n is None else self.kappa_n,
            r21=Fraction(self.params.j, self.params.k) if self.r21 is None else self.r21,
            initial=SimState() if self.initial is None else self.initial,
        )

    def to_dict(self) -> dict:
        c = self.resolved()
        init = asdict(c.initial)
        init["sharing_mode"] = c.initial.sharing_mode.value
        return {
            "params": c.params.to_dict(), "n": c.n, "seed": c.seed, "t_end": c.t_end,
            "sample_dt": c.sample_dt, "k12": c.k12, "k21": c.k21, "kappa_n": c.kappa_n,
            "threshold_c": c.threshold_c, "threshold_exp": c.threshold_exp,
            "r21": [c.r21.numerator, c.r21.denominator], "initial": init,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        d["params"] = ModelParams.from_dict(d["params"])
        if d.get("r21") is not None:
            d["r21"] = Fraction(*d["r21"])
        if d.get("initial") is not None:
            init = dict(d["initial"])
            init["sharing_mode"] = SharingMode(init.get("sharing_mode", "None"))
            d["initial"] = SimState(**init)
        return cls(**d)


def initial_from_fluid(x, n: int, servers: tuple[int, int] | None = None) -> SimState:
    """Round a fluid state (ExtendedState-like, with q1..z21) to counts at scale n."""
    z12, z21 = round(n * x.z12), round(n * x.z21)
    z11, z22 = round(n * x.z11), round(n * x.z22)
    if servers is not None:
        # rounding must not overfill a pool
        z11 = min(z11, servers[0] - z21)
        z22 = min(z22, servers[1] - z12)
    mode = SharingMode.None_
    if z12 > 0:
        mode = SharingMode.Pool2HelpsClass1
    elif z21 > 0:
        mode = SharingMode.Pool1HelpsClass2
    return SimState(round(n * x.q1), round(n * x.q2), z11, z12, z21, z22, mode)


COLUMNS = ("Q1", "Q2", "Z11", "Z12", "Z21", "Z22")


@dataclass
class SimPath:
    """Sampled fluid-scaled path plus the event-level trace of k*D."""

    config: SimConfig
    t: np.ndarray
    counts: np.ndarray          # shape (len(t), 6), unscaled, order COLUMNS
    D: np.ndarray               # unscaled D at the sample times
    event_t: np.ndarray         # times at which k*D changed, starting with t=0
    event_kD: np.ndarray        # k*D after each of those changes
    n_events: int
    final: SimState
    modes: list = field(default_factory=list)
    # (Q1, Q2, Z11, Z12, Z21, Z22, mode index) after each event, when requested
    trace: list | None = None

    def scaled(self, name: str) -> np.ndarray:
        return self.counts[:, COLUMNS.index(name)] / self.config.n

    def to_csv(self, fh=None) -> str | None:
        """``t,Q1,Q2,Z11,Z12,Z21,Z22,D``; counts divided by n, D left unscaled."""
        own = fh is None
        fh = io.StringIO() if own else fh
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", *COLUMNS, "D"])
        n = self.config.n
        for t, row, d in zip(self.t, self.counts, self.D):
            w.writerow([repr(float(t))] + [repr(float(c) / n) for c in row] + [repr(float(d))])
        return fh.getvalue() if own else None


def simulate(cfg: SimConfig, trace: bool = False) -> SimPath:
    """Run the CTMC from cfg.initial (default: empty) up to cfg.t_end.

    Each step draws the time to the next event from the total rate and picks
    the event in proportion to its rate.  The per-event routing is FQR-T with
    one-way sharing; a tie D = 0 sends a freed agent to its own queue.
    With ``trace`` the full state after every event is kept on ``path.trace``.
    """
    cfg = cfg.resolved()
    p = cfg.params
    N1, N2 = cfg.servers
    j, k = p.j, p.k
    rn, rd = cfg.r21.numerator, cfg.r21.denominator
    kap = cfg.kappa_n
    k12, k21 = cfg.k12, cfg.k21
    a1, a2 = cfg.n * p.lambda1, cfg.n * p.lambda2
    mu11, mu12, mu21, mu22 = p.mu11, p.mu12, p.mu21, p.mu22
    th1, th2 = p.theta1, p.theta2
    NONE, P2H1, P1H2 = 0, 1, 2
    mode_enum = (SharingMode.None_, SharingMode.Pool2HelpsClass1, SharingMode.Pool1HelpsClass2)

    init = cfg.initial
    init.check(N1, N2)
    Q1, Q2, Z11, Z12, Z21, Z22 = init.Q1, init.Q2, init.Z11, init.Z12, init.Z21, init.Z22
    mode = mode_enum.index(init.sharing_mode)
    t = init.clock

    rng = np.random.default_rng(cfg.seed)
    exps: list = []
    unis: list = []
    pos = _BATCH

    dt = cfg.sample_dt
    n_samples = int(math.floor((cfg.t_end - t) / dt + 1e-9)) + 1
    sample_t = t + dt * np.arange(n_samples)
    samples = np.zeros((n_samples, 6), dtype=np.int64)
    modes = []
    si = 0

    kD = k * (Q1 - kap) - j * Q2
    ev_t = array("d", [t])
    ev_kD = array("q", [kD])
    n_events = 0
    t_end = cfg.t_end
    states = [(Q1, Q2, Z11, Z12, Z21, Z22, mode)] if trace else None

    while True:
        r_ab1 = th1 * Q1
        r_ab2 = th2 * Q2
        s11 = mu11 * Z11
        s12 = mu12 * Z12
        s21 = mu21 * Z21
        s22 = mu22 * Z22
        total = a1 + a2 + s11 + s12 + s21 + s22 + r_ab1 + r_ab2
        if pos == _BATCH:
            exps = rng.standard_exponential(_BATCH).tolist()
            unis = rng.random(_BATCH).tolist()
            pos = 0
        t_new = t + exps[pos] / total if total > 0 else math.inf
        u = unis[pos] * total
        pos += 1
        while si < n_samples and sample_t[si] <= t_new:
            samples[si] = (Q1, Q2, Z11, Z12, Z21, Z22)
            modes.append(mode)
            si += 1
        if t_new > t_end:
            break
        t = t_new
        n_events += 1

        # ------------------------------------------------ apply one event
        if u < a1:
            if Z11 + Z21 < N1:
                Z11 += 1
            elif (mode == P2H1 and Z12 + Z22 < N2
                  and k * (Q1 + 1 - kap) - j * Q2 > 0):
                Z12 += 1
            else:
                Q1 += 1
        elif (u := u - a1) < a2:
            if Z12 + Z22 < N2:
                Z22 += 1
            elif (mode == P1H2 and Z11 + Z21 < N1
                  and rn * (Q2 + 1) - rd * Q1 > 0):
                Z21 += 1
            else:
                Q2 += 1
        elif (u := u - a2) < r_ab1:
            Q1 -= 1
        elif (u := u - r_ab1) < r_ab2:
            Q2 -= 1
        else:
            u -= r_ab2
            # a service completion frees one agent in pool 1 or pool 2
            if u < s11:
                Z11 -= 1
                pool = 1
            elif (u := u - s11) < s21:
                Z21 -= 1
                pool = 1
            elif (u := u - s21) < s12:
                Z12 -= 1
                pool = 2
            else:
                Z22 -= 1
                pool = 2
            if pool == 1:
                if mode == P1H2 and Q2 > 0 and rn * Q2 - rd * Q1 > 0:
                    Q2 -= 1
                    Z21 += 1
                elif Q1 > 0:
                    Q1 -= 1
                    Z11 += 1
            else:
                if mode == P2H1 and Q1 > 0 and k * (Q1 - kap) - j * Q2 > 0:
                    Q1 -= 1
                    Z12 += 1
                elif Q2 > 0:
                    Q2 -= 1
                    Z22 += 1

        # ------------------------------------------------ control state
        if mode == NONE:
            if k * Q1 - j * Q2 > k * k12 and Z21 == 0:
                mode = P2H1
                # idle pool-2 agents become available to class 1 at once
                while Z12 + Z22 < N2 and Q1 > 0 and k * (Q1 - kap) - j * Q2 > 0:
                    Q1 -= 1
                    Z12 += 1
            elif rn * Q2 - rd * Q1 > rd * k21 and Z12 == 0:
                mode = P1H2
                while Z11 + Z21 < N1 and Q2 > 0 and rn * Q2 - rd * Q1 > 0:
                    Q2 -= 1
                    Z21 += 1
        elif mode == P2H1:
            if Q1 == 0 or rn * Q2 - rd * Q1 >= rd * k21:
                mode = NONE
        else:
            if Q2 == 0 or k * Q1 - j * Q2 >= k * k12:
                mode = NONE

        if trace:
            states.append((Q1, Q2, Z11, Z12, Z21, Z22, mode))
        new_kD = k * (Q1 - kap) - j * Q2
        if new_kD != kD:
            kD = new_kD
            ev_t.append(t)
            ev_kD.append(kD)

    final = SimState(Q1, Q2, Z11, Z12, Z21, Z22, mode_enum[mode], min(t, t_end))
    samples = samples[:si]
    D = (k * (samples[:, 0] - kap) - j * samples[:, 1]) / k
    return SimPath(cfg, sample_t[:si], samples, D, np.frombuffer(ev_t, dtype=float).copy(),
                   np.frombuffer(ev_kD, dtype=np.int64).copy(), n_events, final,
                   [mode_enum[m] for m in modes], states)


@dataclass(frozen=True)
class DifferenceStats:
    fraction_positive: float
    transitions: int
    mean_queue_ratio: float


MIN_TRANSITIONS = 10_000


def difference_process_stats(path: SimPath, window: tuple[float, float],
                             min_transitions: int = MIN_TRANSITIONS) -> DifferenceStats:
    """Time fraction of {D > 0} inside the window, plus the mean sampled Q1/Q2 there."""
    a, b = window
    if not (path.t[0] <= a < b <= path.t[-1] + 1e-12):
        raise WindowTooShort(f"window {window} is not inside [{path.t[0]}, {path.t[-1]}]")
    et, ekd = path.event_t, path.event_kD
    inside = (et > a) & (et <= b)
    transitions = int(inside.sum())
    if transitions < min_transitions:
        raise WindowTooShort(
            f"only {transitions} D transitions in {window}; need {min_transitions}")
    # piecewise-constant D: value ekd[i] holds on [et[i], et[i+1])
    starts = np.clip(et, a, b)
    ends = np.clip(np.append(et[1:], np.inf), a, b)
    positive = float(np.sum((ends - starts)[ekd > 0]))
    sel = (path.t >= a) & (path.t <= b)
    q1, q2 = path.counts[sel, 0], path.counts[sel, 1]
    ok = q2 > 0
    ratio = float(np.mean(q1[ok] / q2[ok])) if ok.any() else math.nan
    return DifferenceStats(positive / (b - a), transitions, ratio)
