# %% [markdown]
# # Stationary point and stability constants
#
# The stationary point is computed in exact rational arithmetic first, then
# rounded. Which region it lands in depends on the rates only.

# %%
from fqrt_fluid import canonical_params, stationary_point
from fqrt_fluid.stationarity import (drift_at_star, exp_stability_constants,
                                     region_of_star_by_rates, stationary_point_exact,
                                     v_ball_alpha)

p = canonical_params()
ex = stationary_point_exact(p)
print("exact", ex.q1, ex.q2, ex.z_raw)
rep = stationary_point(p)
print(rep.x_star, rep.region.label, rep.pi_star)

# %%
print(region_of_star_by_rates(p))
print(drift_at_star(p))
print("V-ball radius", v_ball_alpha(p))
print("envelope (prefactor, rate)", exp_stability_constants(p))

# %% [markdown]
# Two other parameter sets put x* in S+ (sharing saturates pool 2) and in
# S- (sharing is switched off).

# %%
saturated = p.with_(lambda1=3.0)
switch_off = p.with_(lambda1=13.0, lambda2=1.5, mu11=10.0, mu12=0.8, mu22=1.0, theta1=2.0, theta2=0.2)
for q in (saturated, switch_off):
    r = stationary_point(q)
    print(r.x_star, r.region.label, r.pi_star)
