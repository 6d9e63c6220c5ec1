# %% [markdown]
# # Simulating the scaled system
#
# The CTMC with n times the arrival rates and pool sizes runs under the same
# routing rule with thresholds. Over a window the fraction of time the queue
# difference is positive should match pi12 from the fluid model.

# %%
import time

from fqrt_fluid import canonical_params
from fqrt_fluid.simulation import SimConfig, difference_process_stats, simulate

p = canonical_params()
t0 = time.perf_counter()
path = simulate(SimConfig(p, n=1000, seed=0, t_end=50.0))
print(f"{path.n_events} events in {time.perf_counter() - t0:.1f} s")
stats = difference_process_stats(path, (20.0, 50.0))
print(stats)

# %% [markdown]
# The scaled path, sampled every 0.1 time units.

# %%
for name in ("Q1", "Q2", "Z12"):
    print(name, path.scaled(name)[::100].round(3))
