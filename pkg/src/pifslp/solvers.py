"""ADMM drivers for power-minimization SLP.

Every Jacobian variant runs on :class:`JacobiEngine`, which keeps one
:class:`BlockWorker` per block. A worker only ever sees its own column block
``A_i``, its own ``x_i`` and tuning, and the vector broadcast to all blocks;
it returns ``x_i^+`` and the message ``A_i x_i^+``. The engine reduces the
messages in block order, so the arithmetic is the same whether blocks run
sequentially here or on a thread pool in :mod:`pifslp.runtime`.

Variants
--------
pj_admm            proximal Jacobian ADMM, cached direct solve per block
pj_admm_svd        standard proximal, cached eigenbasis of ``A_i^T A_i``
pj_admm_pair       antenna-pair blocks with diagonal proximal (elementwise)
pif                prox-linear proximal, inverse free
gauss_seidel       sequential exact block minimization, undamped dual step
pj_alm             proximal term ``tau rho/2 ||A_i (x_i - x_i^t)||^2``
decentralized_pj   slack folded into ``g+``; dual step uses the new ``x``
decentralized_pif  the above with the inverse-free kernel
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kernels
from .ci_model import CiInstance, ci_margins
from .partition import BlockPartition, StructureError, antenna_pair_gram
from .tuning import (Certificate, ProximalSpec, adapt, balanced_epsilon, block_norms_sq,
                     sufficient_tau)

VARIANTS = ("pj_admm", "pj_admm_svd", "pj_admm_pair", "pif", "gauss_seidel",
            "pj_alm", "decentralized_pj", "decentralized_pif")
DECENTRALIZED = ("decentralized_pj", "decentralized_pif")
INVERSE_FREE = ("pif", "decentralized_pif")

DIVERGENCE_NORM = 1e12


class DivergenceError(FloatingPointError):
    """Non-finite or exploding iterate; ``trace`` holds what was recorded."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AdaptiveSpec:
    delta: object = 2.0
    eta: float = 1e-3

    def __post_init__(self):
        if np.any(np.asarray(self.delta, dtype=float) <= 1):
            raise ConfigError("adaptive delta must exceed 1")
        if self.eta <= 0:
            raise ConfigError("adaptive eta must be positive")


@dataclass
class SolverConfig:
    """Variant selector and every tunable scalar.

    ``proximal=None`` picks the certified bound for the variant's proximal
    kind. ``alm_tau`` is the PJ-ALM coefficient (default ``N - 1``).
    """

    variant: str = "pif"
    rho: float = 0.06
    beta: float = 1.0
    proximal: Optional[ProximalSpec] = None
    adaptive: Optional[AdaptiveSpec] = None
    eps_x: float = 1e-3
    max_iter: int = 5000
    x0: Optional[np.ndarray] = None
    lambda0: Optional[np.ndarray] = None
    alm_tau: Optional[float] = None
    record_iterates: bool = False
    trace_len: Optional[int] = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if self.rho <= 0:
            raise ConfigError("rho must be positive")
        if not 0 < self.beta < 2:
            raise ConfigError("beta must lie in (0, 2)")
        if self.eps_x <= 0:
            raise ConfigError("eps_x must be positive")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be at least 1")
        if self.adaptive is not None and self.variant in ("gauss_seidel", "pj_alm"):
            raise ConfigError(f"{self.variant} has no adaptive proximal")


@dataclass
class TraceRow:
    iter: int
    delta_x: float
    delta_lambda: float
    power: float
    q_form: float
    tau_max: float
    messages_bits: int = 0
    backtracked: bool = False


@dataclass
class SolveResult:
    x: np.ndarray
    lam: np.ndarray
    power: float
    iterations: int
    accepted: int
    converged: bool
    margins: np.ndarray
    trace: list
    certificate: Certificate
    variant: str
    messages_bits: int = 0
    bits_per_iter: int = 0
    iterates: list = field(default_factory=list, repr=False)

    @property
    def min_margin(self) -> float:
        return float(self.margins.min())


class BlockWorker:
    """One block's local state and kernel.

    ``step`` receives the broadcast ``w = -A x^t + b + c + lam/rho`` (the
    decentralized form builds the same vector from ``g+``) and returns the
    new block together with its message ``A_i x_i^+``.
    """

    def __init__(self, index: int, A_i: np.ndarray, x_i: np.ndarray, rho: float, kind: str):
        self.index = index
        self.A_i = np.ascontiguousarray(A_i)
        self.x_i = np.array(x_i, dtype=float)
        self.rho = rho
        self.kind = kind
        self.message = self.A_i @ self.x_i
        self.version = -1
        self._factor = None
        self._svd = kernels.BlockSvdCache.build(self.A_i) if kind == "svd" else None
        self._d = antenna_pair_gram(self.A_i) if kind == "pair" else None
        self.p_i = None
        self.tau_i = None
        self.lam = None

    def retune(self, proximal: ProximalSpec, version: int) -> None:
        i = self.index
        if self.kind == "general":
            self.p_i = proximal.matrix(i, self.A_i, self.rho)
            self._factor = kernels.BlockFactor.build(self.A_i, self.rho, self.p_i, version)
        elif self.kind == "pair":
            p = proximal.matrix(i, self.A_i, self.rho)
            if np.any(p - np.diag(np.diag(p))):
                raise ConfigError("pair kernel needs diagonal proximal matrices")
            self.p_i = np.diag(p).copy()
        else:
            self.tau_i = float(proximal.tau[i])
        self.version = version

    def step(self, w: np.ndarray, version: int):
        if version != self.version:
            raise kernels.StaleCacheError(f"worker {self.index} tuned for version {self.version}")
        A_i, x_i, rho = self.A_i, self.x_i, self.rho
        if self.kind == "proxlinear":
            new = (self.tau_i * x_i + rho * (A_i.T @ w)) / (2.0 + self.tau_i)
        else:
            v = w + self.message
            if self.kind == "general":
                new = self._factor.solve(kernels.block_rhs(A_i, x_i, v, rho, self.p_i), version)
            elif self.kind == "svd":
                r = kernels.block_rhs(A_i, x_i, v, rho, self.tau_i)
                new = kernels.update_block_svd(self._svd, r, rho, self.tau_i)
            else:
                r = kernels.block_rhs(A_i, x_i, v, rho, self.p_i)
                new = kernels.update_block_pair(self._d, r, rho, self.p_i)
        return new, A_i @ new

    def commit(self, new, message) -> None:
        self.x_i = new
        self.message = message

    def local_dual(self, ax_new: np.ndarray, b: np.ndarray, beta: float) -> np.ndarray:
        """Decentralized dual step computed from the worker's own copy of ``lam``."""
        return self.lam + beta * self.rho * kernels.gplus(ax_new, self.lam, self.rho, b)


def reduce_messages(messages) -> np.ndarray:
    """Sum ``A_i x_i`` strictly in block order."""
    acc = np.array(messages[0], dtype=float, copy=True)
    for msg in messages[1:]:
        acc += msg
    return acc


def serial_map(fn, workers):
    return [fn(w) for w in workers]


def default_proximal(variant: str, instance: CiInstance, partition: BlockPartition,
                     rho: float, beta: float, alm_tau: Optional[float] = None) -> ProximalSpec:
    n_blocks = partition.n_blocks
    A = instance.A
    if variant == "gauss_seidel":
        return ProximalSpec.explicit([np.zeros((s.size, s.size)) for s in partition.selectors])
    if variant == "pj_alm":
        tau = float(n_blocks - 1) if alm_tau is None else float(alm_tau)
        return ProximalSpec.explicit([tau * rho * (A[:, s].T @ A[:, s]) for s in partition.selectors])
    kind = "prox_linear" if variant in INVERSE_FREE else "standard"
    return ProximalSpec(kind, tau=sufficient_tau(kind, rho, beta, n_blocks, block_norms_sq(A, partition)))


def _kernel_kind(variant: str, proximal: ProximalSpec) -> str:
    if variant in INVERSE_FREE:
        if proximal.kind != "prox_linear":
            raise ConfigError(f"{variant} requires the prox-linear proximal")
        return "proxlinear"
    if variant == "pj_admm_svd":
        if proximal.kind != "standard":
            raise ConfigError("pj_admm_svd requires the standard proximal")
        return "svd"
    if variant == "pj_admm_pair":
        if proximal.kind == "prox_linear":
            raise ConfigError("pj_admm_pair needs a diagonal proximal")
        return "pair"
    return "general"


class JacobiEngine:
    """Iteration state and loop shared by the serial and threaded drivers.

    Parameters
    ----------
    map_fn : callable
        ``map_fn(fn, workers) -> list`` applied to the block workers; the
        result list must be in block order.
    bits_per_iter : int
        Coordination cost charged to every loop pass (0 when not tracked).
    local_duals : bool
        Decentralized only: keep a copy of ``lam`` on every worker and
        update it there.
    """

    def __init__(self, instance: CiInstance, partition: BlockPartition, config: SolverConfig,
                 map_fn: Callable = serial_map, bits_per_iter: int = 0, local_duals: bool = False):
        if partition.dim != instance.dim:
            raise ConfigError(f"partition covers {partition.dim} coordinates, instance has {instance.dim}")
        self.instance = instance
        self.partition = partition
        self.config = config
        self.map_fn = map_fn
        self.bits_per_iter = int(bits_per_iter)
        self.variant = config.variant
        self.decentralized = config.variant in DECENTRALIZED
        self.local_duals = local_duals and self.decentralized
        self.rho, self.beta = config.rho, (1.0 if config.variant in ("gauss_seidel", "pj_alm") else config.beta)
        self.b = instance.b
        prox = config.proximal
        if prox is None:
            prox = default_proximal(config.variant, instance, partition, config.rho, self.beta, config.alm_tau)
        self.proximal = prox.broadcast(partition.n_blocks)
        kind = "general" if config.variant == "gauss_seidel" else _kernel_kind(config.variant, self.proximal)
        if kind == "pair":
            try:
                [antenna_pair_gram(instance.A[:, s]) for s in partition.selectors]
            except StructureError as exc:
                raise ConfigError(f"pj_admm_pair: {exc}") from exc
        x0 = np.zeros(instance.dim) if config.x0 is None else np.asarray(config.x0, dtype=float)
        lam0 = np.zeros(instance.n_rows) if config.lambda0 is None else np.asarray(config.lambda0, dtype=float)
        if x0.shape != (instance.dim,) or lam0.shape != (instance.n_rows,):
            raise ConfigError("x0 / lambda0 dimension mismatch")
        self.workers = [BlockWorker(i, instance.A[:, s], x0[s], self.rho, kind)
                        for i, s in enumerate(partition.selectors)]
        self.lam = lam0.copy()
        if self.local_duals:
            for w in self.workers:
                w.lam = lam0.copy()
        self.version = 0
        self._retune()
        bound_kind = self.proximal.kind if self.proximal.kind != "explicit_matrix" else "standard"
        norms = block_norms_sq(instance.A, partition)
        self.certificate = Certificate(
            epsilon=balanced_epsilon(self.beta, partition.n_blocks), beta=self.beta, rho=self.rho,
            certified_bound_tau=float(sufficient_tau(bound_kind, self.rho, self.beta, partition.n_blocks, norms).max()),
            used_tau_final=self.proximal.tau_max())
        self.trace = deque(maxlen=config.trace_len)
        self.iterates = []
        self.bits_total = 0

    # -- helpers -----------------------------------------------------------
    def _retune(self):
        self.map_fn(lambda w: w.retune(self.proximal, self.version), self.workers)

    def x(self) -> np.ndarray:
        x = np.empty(self.partition.dim)
        for s, w in zip(self.partition.selectors, self.workers):
            x[s] = w.x_i
        return x

    def ax(self) -> np.ndarray:
        return reduce_messages([w.message for w in self.workers])

    def _q_value(self, old, new, lam_old, lam_new):
        dlam = lam_old - lam_new
        adx = []
        gx = 0.0
        for i, ((x_o, m_o), (x_n, m_n)) in enumerate(zip(old, new)):
            d, ad = x_o - x_n, m_o - m_n
            gx += self.proximal.gx_quad(i, d, ad, self.rho)
            adx.append(ad)
        cross = dlam @ reduce_messages(adx)
        return gx + (2.0 - self.beta) / (self.beta ** 2 * self.rho) * (dlam @ dlam) + (2.0 / self.beta) * cross

    # -- one pass ----------------------------------------------------------
    def _jacobi_pass(self):
        rho, b, lam = self.rho, self.b, self.lam
        ax = self.ax()
        if self.decentralized:
            w = kernels.gplus(ax, lam, rho, b) + lam / rho
        else:
            c = kernels.update_slack(ax, b, lam, rho)
            w = -ax + b + c + lam / rho
        version = self.version
        new = self.map_fn(lambda wk: wk.step(w, version), self.workers)
        ax_new = reduce_messages([m for _, m in new])
        if self.decentralized:
            if self.local_duals:
                duals = self.map_fn(lambda wk: wk.local_dual(ax_new, b, self.beta), self.workers)
                for d in duals[1:]:
                    if not np.array_equal(d, duals[0]):
                        raise RuntimeError("decentralized dual copies diverged")
                lam_new = duals[0]
            else:
                lam_new = lam + self.beta * rho * kernels.gplus(ax_new, lam, rho, b)
        else:
            lam_new = kernels.update_dual(lam, self.beta, rho, kernels.constraint_residual(ax_new, b, c))
        return new, lam_new

    def _gauss_seidel_pass(self):
        rho, b, lam = self.rho, self.b, self.lam
        ax = self.ax()
        c = kernels.update_slack(ax, b, lam, rho)
        base = b + c + lam / rho
        running = ax.copy()
        new = []
        for wk in self.workers:
            w = base - running
            x_n, m_n = wk.step(w, self.version)
            running += m_n - wk.message
            new.append((x_n, m_n))
        ax_new = reduce_messages([m for _, m in new])
        lam_new = kernels.update_dual(lam, 1.0, rho, kernels.constraint_residual(ax_new, b, c))
        return new, lam_new

    # -- driver ------------------------------------------------------------
    def run(self) -> SolveResult:
        cfg = self.config
        adaptive = cfg.adaptive
        x = self.x()
        if cfg.record_iterates:
            self.iterates.append((x.copy(), self.lam.copy()))
        converged = False
        accepted = 0
        t = 0
        while t < cfg.max_iter:
            t += 1
            old = [(wk.x_i, wk.message) for wk in self.workers]
            if self.variant == "gauss_seidel":
                new, lam_new = self._gauss_seidel_pass()
            else:
                new, lam_new = self._jacobi_pass()
            self.bits_total += self.bits_per_iter
            x_new = np.empty_like(x)
            for s, (x_n, _) in zip(self.partition.selectors, new):
                x_new[s] = x_n
            nx = np.linalg.norm(x_new)
            if not (np.all(np.isfinite(x_new)) and np.all(np.isfinite(lam_new))) or nx > DIVERGENCE_NORM:
                raise DivergenceError(f"{self.variant} diverged at iteration {t}", list(self.trace))
            q = self._q_value(old, new, self.lam, lam_new)
            dx = np.linalg.norm(x - x_new)
            dlam = np.linalg.norm(self.lam - lam_new)
            self.certificate.q_form_min_observed = min(self.certificate.q_form_min_observed, q)
            backtracked = False
            if adaptive is not None:
                du_sq = dx ** 2 + dlam ** 2
                self.proximal, backtracked = adapt(self.proximal, q, du_sq, adaptive.eta, adaptive.delta)
                if backtracked:
                    self.certificate.triggers += 1
                    self.version += 1
                    self._retune()
            nl = np.linalg.norm(lam_new)
            self.trace.append(TraceRow(
                t, dx / nx if nx > 0 else np.inf, dlam / nl if nl > 0 else np.inf,
                float(x_new @ x_new), float(q), self.proximal.tau_max(), self.bits_total, backtracked))
            if backtracked:
                continue
            for wk, (x_n, m_n) in zip(self.workers, new):
                wk.commit(x_n, m_n)
            if self.local_duals:
                for wk in self.workers:
                    wk.lam = lam_new.copy()
            self.lam = lam_new
            accepted += 1
            if cfg.record_iterates:
                self.iterates.append((x_new.copy(), lam_new.copy()))
            gap_ok = nx > 0 and dx / nx < cfg.eps_x
            x = x_new
            if gap_ok:
                converged = True
                break
        self.certificate.used_tau_final = self.proximal.tau_max()
        return SolveResult(
            x=x, lam=self.lam.copy(), power=float(x @ x), iterations=t, accepted=accepted,
            converged=converged, margins=ci_margins(self.instance, x), trace=list(self.trace),
            certificate=self.certificate, variant=self.variant, messages_bits=self.bits_total,
            bits_per_iter=self.bits_per_iter, iterates=self.iterates)


def run_solver(instance: CiInstance, partition: BlockPartition, config: SolverConfig) -> SolveResult:
    """Run one variant serially until the relative iterate gap drops below ``eps_x``."""
    return JacobiEngine(instance, partition, config).run()
