# %% [markdown]
# # Convergence certificate
#
# At the sufficient proximal bound the matrix `Q` is PSD, and the distance
# to the solution in the `G` norm shrinks every iteration by at least the
# `Q`-norm of the step. Below the bound `Q` picks up negative directions.

# %%
import numpy as np

from pifslp.baselines import dual_nnls_solve
from pifslp.ci_model import assemble_instance, generate_scenario
from pifslp.partition import make_partition
from pifslp.solvers import SolverConfig, run_solver
from pifslp.tuning import ProximalSpec, block_norms_sq, certify_psd, g_form, sufficient_tau

# %%
inst = assemble_instance(generate_scenario(16, 12, 4, gamma=10.0, seed=5))
part = make_partition(inst.dim, 8)
rho, beta = 0.06, 1.0
tau = sufficient_tau("standard", rho, beta, 8, block_norms_sq(inst.A, part))
for scale in (1.0, 0.5, 0.1, 0.0):
    chk = certify_psd(inst.A, part, ProximalSpec.standard(scale * tau), rho, beta)
    print(f"tau = {scale:.1f} x bound: certified={chk.certified}, lambda_min={chk.lambda_min:+.3e}")

# %%
orc = dual_nnls_solve(inst.A, inst.b, tol=1e-12)
spec = ProximalSpec.standard(tau)
res = run_solver(inst, part, SolverConfig("pj_admm", proximal=spec, eps_x=1e-9, max_iter=300, record_iterates=True))
dist = np.array([g_form(x - orc.x, l - orc.lam, inst.A, part, spec, rho, beta) for x, l in res.iterates])
print("G-distance at t = 0, 10, 50, 100, 200:", np.round(dist[[0, 10, 50, 100, 200]], 6))
print("largest one-step increase:", np.diff(dist).max())
