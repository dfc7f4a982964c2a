# %% [markdown]
# # Adaptive proximal tuning
#
# Starting from a small proximal weight, the iteration doubles `tau` and
# discards the step whenever the `Q`-norm of the step is not safely positive.
# The trace shows where the triggers fire and how `tau` settles far below
# the certified bound.

# %%
import numpy as np

from pifslp.ci_model import assemble_instance, generate_scenario
from pifslp.harness import ExperimentConfig, scheme_config
from pifslp.partition import make_partition
from pifslp.solvers import run_solver

# %%
cfg = ExperimentConfig(n_tx=16, n_users=12, partition={"scheme": "adjacent", "N": 8})
inst = assemble_instance(generate_scenario(16, 12, 4, gamma=10.0, seed=7))
part = make_partition(inst.dim, 8)
for scheme in ("PSLP-LA", "PSLP-LC", "PSLP-SA", "PSLP-SC"):
    res = run_solver(inst, part, scheme_config(scheme, cfg, inst, part))
    c = res.certificate
    print(f"{scheme}: {res.iterations:4d} iters, {c.triggers} triggers, "
          f"final tau {c.used_tau_final:.3f} vs bound {c.certified_bound_tau:.3f}")

# %%
res = run_solver(inst, part, scheme_config("PSLP-LA", cfg, inst, part))
for row in res.trace[:12]:
    flag = "backtrack" if row.backtracked else ""
    print(f"{row.iter:3d}  dx={row.delta_x:9.2e}  q={row.q_form:+10.3e}  tau={row.tau_max:.3f} {flag}")
