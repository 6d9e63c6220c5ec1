"""Post-processing of fluid trajectories and fluid-vs-simulation comparison."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import AssumptionViolated
from .model import ModelParams
from .simulation import SimConfig, difference_process_stats, simulate
from .solver import ExtendedState, Phase, Trajectory, hitting_time, solve_ivp
from .stationarity import stationary_point


def region_occupancy(traj: Trajectory) -> dict:
    """Fraction of the horizon spent in each region; pre-S time is counted as ``transient``."""
    labels = traj.region_labels()[:-1]
    counts = Counter("transient" if lab is None else lab for lab in labels)
    total = max(len(labels), 1)
    return {lab: c / total for lab, c in sorted(counts.items())}


def fit_exponential_rate(traj: Trajectory, star, t_min: float | None = None,
                         floor: float = 1e-9) -> float | None:
    """Least-squares slope of -log|x(t) - x*| over the in-S tail.

    Samples closer than ``floor`` to x* are dropped since round-off dominates
    there.  Returns None when fewer than 10 samples remain.
    """
    t = traj.times()
    x = np.column_stack([traj.column("q1"), traj.column("q2"), traj.column("z12")])
    dist = np.max(np.abs(x - np.asarray(star.as_tuple())), axis=1)
    in_s = np.array([s.state.phase is Phase.InS for s in traj.samples])
    if t_min is None:
        t_min = hitting_time(traj) or 0.0
    keep = in_s & (t >= t_min) & (dist > floor)
    if keep.sum() < 10:
        return None
    slope = np.polyfit(t[keep], np.log(dist[keep]), 1)[0]
    return float(-slope)


def summarize(traj: Trajectory, p: ModelParams) -> dict:
    term = traj.terminal
    st = term.state
    try:
        star = stationary_point(p).x_star
        rate = fit_exponential_rate(traj, star)
    except AssumptionViolated:
        star, rate = None, None
    return {
        "terminal": {"t": term.t, "q1": st.q1, "q2": st.q2, "z11": st.z11, "z12": st.z12,
                     "z22": st.z22, "z21": st.z21, "pi12": term.pi12,
                     "region": None if term.region is None else term.region.label},
        "hitting_time": hitting_time(traj),
        "fitted_rate": rate,
        "region_occupancy": region_occupancy(traj),
        "max_clamp": traj.max_clamp,
    }


def sup_deviation(path, traj: Trajectory, t_min: float = 5.0,
                  columns=(("Q1", "q1"), ("Z12", "z12"))) -> float:
    """Largest gap between the scaled simulated path and the fluid one after t_min."""
    ft = traj.times()
    m = path.t >= t_min
    return max(float(np.max(np.abs(path.scaled(sc)[m] - np.interp(path.t[m], ft, traj.column(fc)))))
               for sc, fc in columns)


@dataclass
class CompareReport:
    n: int
    seeds: list
    sup_norms: list
    median_sup_norm: float
    averaged_path_sup_norm: float
    pi_empirical: list
    pi_mean: float
    pi_fluid: float
    pi_deviation: float
    queue_ratio_mean: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def compare(p: ModelParams, n: int, seeds, h: float = 0.01, t_end: float = 50.0,
            t_min: float = 5.0, window=(20.0, 50.0), sample_dt: float = 0.1,
            traj: Trajectory | None = None) -> CompareReport:
    """Simulate each seed from empty and measure it against the fluid run from empty.

    The fluid pi12 in the window is the time average of the trajectory's pi12
    there, which equals pi12(x*) once the run has settled.
    """
    seeds = list(seeds)
    if traj is None:
        traj = solve_ivp(ExtendedState.empty(), p, h, t_end)
    sups, pis, ratios, paths = [], [], [], []
    for s in seeds:
        path = simulate(SimConfig(p, n, seed=s, t_end=t_end, sample_dt=sample_dt))
        sups.append(sup_deviation(path, traj, t_min))
        st = difference_process_stats(path, window)
        pis.append(st.fraction_positive)
        ratios.append(st.mean_queue_ratio)
        paths.append(path)
    ft = traj.times()
    sel = (ft >= window[0]) & (ft <= window[1])
    pi_fluid = float(np.nanmean(traj.column("pi12")[sel]))
    avg_q1 = np.mean([pth.scaled("Q1") for pth in paths], axis=0)
    avg_z12 = np.mean([pth.scaled("Z12") for pth in paths], axis=0)
    t = paths[0].t
    m = t >= t_min
    avg_sup = max(float(np.max(np.abs(avg_q1[m] - np.interp(t[m], ft, traj.column("q1"))))),
                  float(np.max(np.abs(avg_z12[m] - np.interp(t[m], ft, traj.column("z12"))))))
    pi_mean = float(np.mean(pis))
    return CompareReport(n, seeds, sups, float(np.median(sups)), avg_sup, pis, pi_mean,
                         pi_fluid, abs(pi_mean - pi_fluid), float(np.mean(ratios)))


def n_sweep(p: ModelParams, ns=(100, 400, 1600), seeds=range(10), **kw) -> dict:
    """Median sup-norm deviation per n and whether it strictly decreases."""
    traj = solve_ivp(ExtendedState.empty(), p, kw.pop("h", 0.01), kw.get("t_end", 50.0))
    medians = {}
    for n in ns:
        medians[n] = compare(p, n, seeds, traj=traj, **kw).median_sup_norm
    vals = [medians[n] for n in ns]
    return {"median_sup_norm": medians,
            "strictly_decreasing": all(a > b for a, b in zip(vals, vals[1:])),
            "finite": all(math.isfinite(v) for v in vals)}
