# %% [markdown]
# # Parameters and the overload check
#
# A `ModelParams` holds arrival, service and abandonment rates for the two
# classes, the pool sizes, the target queue ratio r = j/k and the shift kappa.
# `validate_params` reports the isolated-class queue and spare capacity and
# whether class 1 is overloaded enough for sharing to make sense.

# %%
from fqrt_fluid import canonical_params, classify, drift_pair, validate_params
from fqrt_fluid.model import FluidState

p = canonical_params()
rep = validate_params(p)
print(rep.to_dict())

# %% [markdown]
# Raising kappa past what class 1's queue can reach breaks the assumption.
# The report says so instead of raising.

# %%
bad = validate_params(p.with_(kappa=5.0))
print(bad.assumption_a, bad.messages)

# %% [markdown]
# States are sorted into S+, S- and the switching surface S^b. On S^b the
# sub-tag comes from the two drifts of the queue-difference process.

# %%
for x in [FluidState(0.4, 0.5, 0.25), FluidState(1.0, 0.0, 0.0), FluidState(0.0, 1.0, 0.0)]:
    d = drift_pair(x, p)
    print(x, classify(x, p).label, round(d.delta_plus, 4), round(d.delta_minus, 4))
