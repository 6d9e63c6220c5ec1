import numpy as np
import pytest

from fqrt_fluid.errors import AssumptionViolated, NeverReachesS, StepTooLarge
from fqrt_fluid.model import (BoundarySub, FluidState, Region, RegionTag, boundary_residual,
                              canonical_params, queue_bounds)
from fqrt_fluid.solver import (ExtendedState, Phase, euler_step, hitting_time, infer_phase,
                               normalize_state, psi, read_trajectory_csv, solve_ivp)
from fqrt_fluid.stationarity import stationary_point

from conftest import SWITCH_OFF_PARAMS

P = canonical_params()
STAR = stationary_point(P)


def test_psi_vanishes_at_star():
    assert np.abs(psi(STAR.x_star, P, STAR.pi_star)).max() < 1e-12


def test_psi_keeps_z_inside():
    assert psi(FluidState(1.0, 0.5, P.m2), P, 1.0)[2] == 0.0
    assert psi(FluidState(0.1, 0.5, 0.0), P, 0.0)[2] == 0.0


def test_step_from_star_stays():
    res = euler_step(STAR.x_star, P, 0.01)
    assert np.abs(np.subtract(res.x.as_tuple(), STAR.x_star.as_tuple())).max() < 1e-14
    assert res.region.sub is BoundarySub.A


def test_step_in_splus_is_linear_field():
    x = FluidState(3.0, 0.5, 0.4)
    res = euler_step(x, P, 0.01)
    assert res.pi12 == 1.0 and res.region.tag is RegionTag.SPlus
    expected = np.add(x.as_tuple(), 0.01 * np.array(psi(x, P, 1.0)))
    np.testing.assert_allclose(res.x.as_tuple(), expected, rtol=0, atol=1e-15)
    assert res.residual_before_snap is None


def test_step_snaps_when_crossing():
    # just above S^b, heading down through it
    x = FluidState(0.4 + 1e-4, 0.5, 0.0)
    res = euler_step(x, P, 0.01, region=Region(RegionTag.SPlus), pi=1.0)
    assert res.residual_before_snap is not None and res.residual_before_snap < 0
    assert boundary_residual(res.x, P) == pytest.approx(0.0, abs=1e-15)


def test_step_too_large():
    with pytest.raises(StepTooLarge):
        euler_step(FluidState(0.4, 0.5, 0.25), P, 0.5)


def test_phase_inference():
    assert infer_phase(ExtendedState.empty(), P) is Phase.FillingPools
    s = normalize_state(ExtendedState(1.0, 0.0, 0.0, 0.0, 0.0, 0.0), P)
    assert s.z11 == 1.0 and s.q1 == 0.0
    assert normalize_state(ExtendedState.from_fluid(STAR.x_star, P), P).phase is Phase.InS
    with pytest.raises(ValueError):
        normalize_state(ExtendedState(0, 0, 0.5, 0.2, 0.5, 0.1), P)


def test_canonical_run(canonical_run):
    traj, _ = canonical_run
    term = traj.terminal
    assert term.state.phase is Phase.InS
    assert term.state.q1 == pytest.approx(STAR.x_star.q1, abs=5e-3)
    assert term.state.z12 == pytest.approx(STAR.x_star.z12, abs=5e-3)
    assert term.pi12 == pytest.approx(0.2, abs=1e-2)
    t_hit = hitting_time(traj)
    assert t_hit is not None and 0 < t_hit < 50
    # frozen: the run enters S^b at 2.3209 and then stays on it
    assert t_hit == pytest.approx(2.3209, abs=1e-3)


def test_canonical_run_bounded_and_confined(canonical_run):
    traj, _ = canonical_run
    b1, b2 = queue_bounds(FluidState(0, 0, 0), P)
    assert traj.column("q1").max() <= b1 + 1e-9
    assert traj.column("q2").max() <= b2 + 1e-9
    assert traj.max_clamp == 0.0
    for smp in traj.samples:
        s = smp.state
        assert s.z11 + s.z21 <= P.m1 + 1e-12 and s.z12 + s.z22 <= P.m2 + 1e-12
        assert min(s.q1, s.q2, s.z11, s.z12, s.z22, s.z21) >= 0.0


def test_exponential_convergence(canonical_run):
    traj, _ = canonical_run
    t_hit = hitting_time(traj)
    t = traj.times()
    x = np.column_stack([traj.column("q1"), traj.column("q2"), traj.column("z12")])
    dist = np.abs(x - np.array(STAR.x_star.as_tuple())).sum(axis=1)
    sel = (t >= t_hit) & (dist > 1e-9)
    slope, icpt = np.polyfit(t[sel], np.log(dist[sel]), 1)
    fit = slope * t[sel] + icpt
    resid = np.log(dist[sel]) - fit
    r2 = 1 - resid.var() / np.log(dist[sel]).var()
    assert -slope > 0.05 and r2 > 0.95


def test_h_halving(canonical_run):
    coarse, _ = canonical_run
    fine = solve_ivp(ExtendedState.empty(), P, h=0.005, t_end=50.0)
    a = np.array(coarse.terminal.state.fluid.as_tuple())
    b = np.array(fine.terminal.state.fluid.as_tuple())
    assert np.abs(a - b).max() < 2e-3


def test_start_on_boundary_hits_at_zero():
    traj = solve_ivp(FluidState(0.4, 0.5, 0.25), P, h=0.01, t_end=0.5)
    assert hitting_time(traj) == 0.0


def test_sminus_start_never_hits():
    traj = solve_ivp(FluidState(1.5, 2.6, 0.0), SWITCH_OFF_PARAMS, h=0.01, t_end=10.0)
    assert hitting_time(traj) is None
    assert set(traj.region_labels()) == {"SMinus"}


def test_never_reaches_s():
    with pytest.raises(NeverReachesS) as err:
        solve_ivp(ExtendedState.empty(), SWITCH_OFF_PARAMS, h=0.01, t_end=0.02)
    assert err.value.trajectory is not None and len(err.value.trajectory) == 3


def test_assumption_checked_in_s():
    with pytest.raises(AssumptionViolated):
        solve_ivp(FluidState(6.0, 0.5, 0.2), P.with_(kappa=5.0), h=0.01, t_end=0.1)


def test_csv_round_trip():
    traj = solve_ivp(ExtendedState.empty(), P, h=0.01, t_end=3.0)
    text = traj.to_csv()
    assert text.splitlines()[0] == "t,q1,q2,z11,z12,z22,z21,pi12,region,phase"
    back = read_trajectory_csv(text, traj.h)
    assert len(back) == len(traj)
    np.testing.assert_allclose(back.column("q1"), traj.column("q1"), rtol=1e-8, atol=1e-12)
    assert back.region_labels() == traj.region_labels()
    assert back.to_csv() == text
