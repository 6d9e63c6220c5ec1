# %% [markdown]
# # Mixing weight pi12 from the QBD
#
# Frozen at a state on S^b, the queue difference is a quasi-birth-death
# process. The weight pi12 is the stationary probability that it is positive.
# Here it is computed three ways at one state.

# %%
import time

from fqrt_fluid import canonical_params, pi12
from fqrt_fluid.model import FluidState, drift_pair, ftsp_rates
from fqrt_fluid.qbd import build_blocks, solve_qbd, truncated_oracle_pi12

p = canonical_params()
x = FluidState(0.4, 0.5, 0.25)

t0 = time.perf_counter()
sol = solve_qbd(build_blocks(ftsp_rates(x, p), p.j, p.k))
print("matrix-geometric", sol.pi12, f"{(time.perf_counter() - t0) * 1e3:.1f} ms")
print("spectral radius of R", sol.spectral_radius_R)

# %%
print("truncated sparse solve", truncated_oracle_pi12(x, p, level_cap=200))
d = drift_pair(x, p)
print("zero mean drift: delta_minus / gap", d.delta_minus / d.gap)

# %% [markdown]
# Scaling the lattice by 5 gives the same answer. The chain then splits into
# classes by gcd(J, K), and only the class that holds 0 is solved.

# %%
from fqrt_fluid.qbd import qbd_pi12

print(qbd_pi12(x, p, lattice=(20, 25)))

# %% [markdown]
# Off the switching surface the value is 1 or 0 without any solve.

# %%
print(pi12(FluidState(3.0, 0.5, 0.4), p), pi12(FluidState(0.0, 1.0, 0.0), p))
