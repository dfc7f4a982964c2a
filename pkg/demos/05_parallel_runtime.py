# %% [markdown]
# # Threads, messages and coordination cost
#
# Blocks are spread over a thread pool; each iteration exchanges the
# partial products `A_i x_i`. The iterates do not depend on the worker
# count because the reduction always runs in block order.

# %%
import time

from pifslp.ci_model import assemble_instance, generate_scenario
from pifslp.partition import make_partition
from pifslp.runtime import (Topology, flop_estimate, iterate_traces_equal, ledger_for, ledger_row,
                            run_parallel)
from pifslp.solvers import SolverConfig

# %%
inst = assemble_instance(generate_scenario(64, 48, 4, gamma=10.0, seed=11))
part = make_partition(inst.dim, 16)
cfg = SolverConfig("decentralized_pif", eps_x=1e-5, record_iterates=True)
runs = {}
for workers in (1, 4, 16):
    t0 = time.perf_counter()
    runs[workers] = run_parallel(inst, part, cfg, workers=workers)
    print(f"workers={workers:2d}: {runs[workers].iterations} iters in {time.perf_counter() - t0:.2f}s")
print("identical iterates:", all(iterate_traces_equal(runs[1], r) for r in runs.values()))

# %%
topo = Topology("decentralized", 16, inst.n_rows)
print(ledger_row(topo, runs[1].iterations))
print("messages:", ledger_for(runs[1], topo).messages)
for mode in ("centralized", "decentralized"):
    print(mode, "bits/iter at N=64, m=224:", Topology(mode, 64, 224).bits_per_iter)
for v in ("naive", "svd", "pif"):
    print(v, flop_estimate(v, 224, 4))
