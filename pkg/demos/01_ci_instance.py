# %% [markdown]
# # Building a CI-constrained instance
#
# One symbol slot: a Rayleigh channel, QPSK symbols, and the real-valued
# system `A x >= b` whose feasible set keeps every noiseless received point
# inside its constructive-interference wedge.

# %%
import numpy as np

from pifslp.ci_model import (assemble_instance, ci_margins, complexify, generate_scenario,
                             linear_to_db, psk_constellation)
from pifslp.baselines import solve_oracle

# %%
sc = generate_scenario(n_tx=16, n_users=12, order=4, gamma=10.0, sigma2=1.0, seed=1)
inst = assemble_instance(sc)
print("A:", inst.A.shape, " b[:4]:", inst.b[:4])

# %% [markdown]
# Each user owns two rows. The minimum-power feasible point comes from the
# dual oracle; all of its margins are nonnegative and many are active.

# %%
orc = solve_oracle(inst)
marg = ci_margins(inst, orc.x)
print(f"oracle power {orc.power:.4f} ({linear_to_db(orc.power):.2f} dB)")
print(f"min margin {marg.min():.2e}, active rows {(marg < 1e-7).sum()} of {marg.size}")

# %% [markdown]
# The noiseless received symbols, rotated back by the intended symbol, sit
# beyond the threshold and inside the +-45 degree wedge.

# %%
r = (sc.channel @ complexify(orc.x)) / sc.symbols
print(np.round(r, 3))
print("constellation:", np.round(psk_constellation(4).points, 3))
