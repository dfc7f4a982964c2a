# %% [markdown]
# # Monte Carlo: power, BER and iteration counts
#
# A small grid at desk scale. Each realization has its own random
# substreams, so the CSV does not change with the worker count.

# %%
from pifslp.harness import ExperimentConfig, sweep_ber, sweep_power, table1

cfg = ExperimentConfig(n_tx=16, n_users=12, gamma_db=[0.0, 5.0, 10.0, 15.0],
                       partition={"scheme": "adjacent", "N": 8},
                       schemes=["PSLP-LA", "PSLP-SA"], realizations=30, n_symbols=60000)

# %%
print(sweep_power(cfg).to_csv())

# %%
cfg.gamma_db = [12.0]
print(sweep_ber(cfg).to_csv())

# %%
cfg.gamma_db = [5.0]
cfg.schemes = ["PSLP-LA", "PSLP-LC", "PSLP-SA", "PSLP-SC"]
print(table1(cfg).to_csv())
