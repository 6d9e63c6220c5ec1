# %% [markdown]
# # Fluid trajectories from an empty system
#
# The solver fills the pools first, then follows the fluid ODE with forward
# Euler, snapping onto S^b whenever a step crosses it.

# %%
import time

from fqrt_fluid import canonical_params, solve_ivp
from fqrt_fluid.analysis import summarize
from fqrt_fluid.solver import ExtendedState

p = canonical_params()
t0 = time.perf_counter()
traj = solve_ivp(ExtendedState.empty(), p, h=0.01, t_end=50.0)
print(f"{len(traj)} samples in {time.perf_counter() - t0:.1f} s")
print(summarize(traj, p))

# %%
# every 5 time units
for s in traj.samples[::500]:
    x = s.state
    print(f"t={s.t:5.1f} q1={x.q1:.4f} q2={x.q2:.4f} z12={x.z12:.4f} pi12={s.pi12}")


# %% [markdown]
# With lambda1 = 3 sharing saturates: z12 climbs to all of pool 2 and z22
# drops to zero. In the second set the trajectory crosses A and then
# settles in S-.

# %%
def regions(traj):
    out = []
    for lab in traj.region_labels():
        if not out or out[-1] != lab:
            out.append(lab)
    return out


saturated = p.with_(lambda1=3.0)
switch_off = p.with_(lambda1=13.0, lambda2=1.5, mu11=10.0, mu12=0.8, mu22=1.0, theta1=2.0, theta2=0.2)
for q in (saturated, switch_off):
    tr = solve_ivp(ExtendedState.empty(), q, h=0.01, t_end=50.0)
    print(regions(tr), tr.terminal.state)

# %%
# the trajectory is written as CSV, one row per sample
print(traj.to_csv().splitlines()[:3])
