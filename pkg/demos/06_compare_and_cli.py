# %% [markdown]
# # Fluid against simulation, and the command line
#
# `compare` runs several seeds and measures each path against the fluid
# trajectory. Single paths keep noise of order 1/sqrt(n). The average over
# seeds gets much closer, and the median deviation shrinks as n grows.

# %%
from fqrt_fluid import canonical_params
from fqrt_fluid.analysis import compare, n_sweep

p = canonical_params()
rep = compare(p, 1000, range(10))
print(rep.median_sup_norm, rep.averaged_path_sup_norm, rep.pi_mean, rep.pi_fluid)

# %%
print(n_sweep(p, ns=(100, 400, 1600), seeds=range(5)))

# %% [markdown]
# The same runs through the CLI. Every subcommand with `--out` writes
# manifest.json before its results.

# %%
import json
import tempfile
from pathlib import Path

from fqrt_fluid.cli import main

out = Path(tempfile.mkdtemp())
main(["solve", "--t-end", "10", "--out", str(out / "solve")])
main(["pi", "--x0", "0.4,0.5,0.25", "--oracle", "--out", str(out / "pi")])
print(sorted(p.name for p in (out / "solve").iterdir()))
print(json.loads((out / "pi" / "manifest.json").read_text())["options"])
