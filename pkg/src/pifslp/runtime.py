"""Bulk-synchronous execution of Jacobian iterations on a worker pool.

Blocks are dealt round-robin onto ``workers`` threads. Each iteration is
one barrier: every thread runs its blocks, the messages ``A_i x_i`` come back
and are reduced in block order. Results are therefore independent of the
worker count and of completion order.

Coordination cost per iteration, with ``m = 2K`` reals per message and
``Q`` bits per real:

* centralized (N workers plus a consensus node): ``Q N (N + 2) m``
* decentralized (N workers, all-to-all):          ``Q N (N - 1) m``
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .ci_model import CiInstance
from .partition import BlockPartition
from .solvers import DECENTRALIZED, ConfigError, JacobiEngine, SolveResult, SolverConfig

MODES = ("centralized", "decentralized")


class WorkerFailure(RuntimeError):
    """A worker raised; ``trace`` holds the iterations completed so far."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []


@dataclass(frozen=True)
class Topology:
    mode: str
    n_workers: int
    n_rows: int
    scalar_bits: int = 32

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.n_workers < 1:
            raise ValueError("need at least one worker")
        if self.scalar_bits <= 0:
            raise ValueError("scalar_bits must be positive")

    @property
    def bits_per_iter(self) -> int:
        n, m, q = self.n_workers, self.n_rows, self.scalar_bits
        if self.mode == "centralized":
            return q * n * (n + 2) * m
        return q * n * (n - 1) * m


@dataclass
class OverheadLedger:
    bits_per_iter: int
    iterations: int = 0
    messages: int = 0
    per_iter: list = field(default_factory=list, repr=False)

    @property
    def bits_total(self) -> int:
        return self.bits_per_iter * self.iterations


def overhead_bits(topology: Topology, iterations: int = 1) -> int:
    return int(topology.bits_per_iter) * int(iterations)


def topology_for(config: SolverConfig, partition: BlockPartition, instance: CiInstance,
                 scalar_bits: int = 32) -> Topology:
    mode = "decentralized" if config.variant in DECENTRALIZED else "centralized"
    return Topology(mode, partition.n_blocks, instance.n_rows, scalar_bits)


def flop_estimate(variant: str, m: int, n: int, with_cache: bool = True) -> dict:
    """Per-iteration cost class and leading-term count for one block.

    ``m = 2K`` rows, ``n = 2 N_t / N`` columns per block. Direct solves
    without a cache are dominated by ``(m + n) n^2``; a cached eigenbasis
    leaves ``(m + n) n``; the inverse-free kernel needs ``(m + 1) n``.
    """
    if variant in ("pif", "decentralized_pif"):
        return {"class": "O(m)+O((m+1)n)+O(m)", "leading": (m + 1) * n}
    if variant in ("svd", "pj_admm_svd") or (with_cache and variant != "naive"):
        return {"class": "O(m)+O((m+n)n)+O(m)", "leading": (m + n) * n}
    return {"class": "O(m)+O((m+n)n^2)+O((m+n)n)+O(m)", "leading": (m + n) * n * n}


def run_parallel(instance: CiInstance, partition: BlockPartition, config: SolverConfig,
                 topology: Topology = None, workers: int = 1) -> SolveResult:
    """Run a Jacobian variant with blocks multiplexed onto ``workers`` threads.

    In decentralized mode every worker keeps and updates its own copy of the
    multipliers from the shared messages; the copies are checked to agree.
    """
    if config.variant == "gauss_seidel":
        raise ConfigError("gauss_seidel is sequential and cannot run in parallel")
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    if topology is None:
        topology = topology_for(config, partition, instance)
    if topology.n_workers != partition.n_blocks or topology.n_rows != instance.n_rows:
        raise ConfigError("topology does not match the partition / instance")
    n_blocks = partition.n_blocks
    groups = [list(range(g, n_blocks, workers)) for g in range(min(workers, n_blocks))]

    with ThreadPoolExecutor(max_workers=len(groups)) as pool:
        def map_fn(fn, block_workers):
            def run_group(idx):
                return [(i, fn(block_workers[i])) for i in idx]

            futures = [pool.submit(run_group, idx) for idx in groups]
            out = [None] * len(block_workers)
            try:
                for fut in futures:
                    for i, value in fut.result():
                        out[i] = value
            except Exception as exc:
                raise WorkerFailure(f"worker failed: {exc}", list(getattr(engine, "trace", []))) from exc
            return out

        engine = None
        engine = JacobiEngine(instance, partition, config, map_fn=map_fn,
                              bits_per_iter=topology.bits_per_iter,
                              local_duals=topology.mode == "decentralized")
        result = engine.run()
    return result


def ledger_for(result: SolveResult, topology: Topology) -> OverheadLedger:
    ledger = OverheadLedger(topology.bits_per_iter, result.iterations)
    per_msg = topology.n_workers - 1 if topology.mode == "decentralized" else topology.n_workers + 2
    ledger.messages = result.iterations * topology.n_workers * per_msg
    ledger.per_iter = [row.messages_bits for row in result.trace]
    return ledger


def ledger_row(topology: Topology, iterations: int) -> dict:
    return {
        "mode": topology.mode,
        "N": topology.n_workers,
        "Q_bits": topology.scalar_bits,
        "bits_per_iter": topology.bits_per_iter,
        "bits_total": overhead_bits(topology, iterations),
    }


def iterate_traces_equal(a: SolveResult, b: SolveResult, atol: float = 1e-12) -> bool:
    if len(a.iterates) != len(b.iterates):
        return False
    return all(np.max(np.abs(xa - xb), initial=0.0) <= atol and np.max(np.abs(la - lb), initial=0.0) <= atol
               for (xa, la), (xb, lb) in zip(a.iterates, b.iterates))
