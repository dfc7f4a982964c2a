# %% [markdown]
# # Every solver variant on one desk instance
#
# Jacobian ADMM with standard or prox-linear proximal terms, the Gauss-Seidel
# sweep and the proximal Jacobian ALM all reach the oracle power. The
# certified proximal bound is used throughout.

# %%
from pifslp.baselines import feasible_round, solve_oracle
from pifslp.ci_model import assemble_instance, generate_scenario
from pifslp.partition import make_partition
from pifslp.solvers import SolverConfig, run_solver

# %%
inst = assemble_instance(generate_scenario(16, 12, 4, gamma=10.0, seed=3))
oracle = solve_oracle(inst).power
blocks = make_partition(inst.dim, 8)
pairs = make_partition(inst.dim, 16, "antenna_pair")

# %%
print(f"{'variant':20s} {'iters':>6s} {'power':>10s} {'gap':>9s}")
for variant in ["pj_admm", "pj_admm_svd", "pj_admm_pair", "pif", "gauss_seidel",
                "pj_alm", "decentralized_pj", "decentralized_pif"]:
    part = pairs if variant == "pj_admm_pair" else blocks
    res = run_solver(inst, part, SolverConfig(variant, eps_x=1e-6, max_iter=20000))
    x = feasible_round(inst, res.x)
    print(f"{variant:20s} {res.iterations:6d} {x @ x:10.5f} {(x @ x - oracle) / oracle:9.2e}")
print(f"{'oracle':20s} {'':6s} {oracle:10.5f}")
