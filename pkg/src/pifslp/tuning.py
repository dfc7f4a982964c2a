"""Proximal terms, the convergence certificate, and adaptive tuning.

Iterates are ``u = (x_1, ..., x_N, lam)``. With ``G_x = blkdiag(P_i + rho
A_i^T A_i)`` the certificate uses two quadratic forms:

    ||u||_G^2 = ||x||_{G_x}^2 + ||lam||^2 / (beta rho)
    ||u||_Q^2 = ||x||_{G_x}^2 + (2 - beta)/(beta^2 rho) ||lam||^2
                + (2/beta) lam^T A x

Convergence is certified when ``Q`` is PSD, which holds whenever every
``P_i >= rho (N/(2 - beta) - 1) A_i^T A_i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .partition import BlockPartition, block_columns, spectral_norm_sq

KINDS = ("standard", "prox_linear", "explicit_matrix")


@dataclass(frozen=True)
class ProximalSpec:
    """Per-block proximal matrices ``P_i``.

    ``standard`` is ``tau_i I``, ``prox_linear`` is ``tau_i I - rho A_i^T A_i``
    and ``explicit_matrix`` carries the matrices themselves.
    """

    kind: str
    tau: Optional[np.ndarray] = None
    matrices: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown proximal kind {self.kind!r}")
        if self.kind == "explicit_matrix":
            if self.matrices is None:
                raise ValueError("explicit proximal needs matrices")
            mats = tuple(np.atleast_2d(np.asarray(m, dtype=float)) for m in self.matrices)
            for m in mats:
                if m.shape[0] != m.shape[1] or np.max(np.abs(m - m.T), initial=0.0) > 1e-12 * max(1.0, np.abs(m).max()):
                    raise ValueError("proximal matrices must be symmetric")
                if np.linalg.eigvalsh(m)[0] < -1e-10 * max(1.0, np.abs(m).max()):
                    raise ValueError("proximal matrices must be positive semidefinite")
            object.__setattr__(self, "matrices", mats)
        else:
            if self.tau is None:
                raise ValueError(f"{self.kind} proximal needs tau")
            tau = np.atleast_1d(np.asarray(self.tau, dtype=float)).copy()
            if np.any(tau < 0) or not np.all(np.isfinite(tau)):
                raise ValueError("tau must be finite and nonnegative")
            object.__setattr__(self, "tau", tau)

    @classmethod
    def standard(cls, tau) -> "ProximalSpec":
        return cls("standard", tau=tau)

    @classmethod
    def prox_linear(cls, tau) -> "ProximalSpec":
        return cls("prox_linear", tau=tau)

    @classmethod
    def explicit(cls, matrices: Sequence[np.ndarray]) -> "ProximalSpec":
        return cls("explicit_matrix", matrices=tuple(matrices))

    @property
    def n_blocks(self) -> int:
        return len(self.matrices) if self.kind == "explicit_matrix" else self.tau.size

    def broadcast(self, n_blocks: int) -> "ProximalSpec":
        if self.kind != "explicit_matrix" and self.tau.size == 1 and n_blocks > 1:
            return replace(self, tau=np.full(n_blocks, self.tau[0]))
        if self.n_blocks != n_blocks:
            raise ValueError(f"proximal has {self.n_blocks} blocks, partition has {n_blocks}")
        return self

    def matrix(self, i: int, A_i: np.ndarray, rho: float) -> np.ndarray:
        n = A_i.shape[1]
        if self.kind == "standard":
            return self.tau[i] * np.eye(n)
        if self.kind == "prox_linear":
            return self.tau[i] * np.eye(n) - rho * (A_i.T @ A_i)
        return self.matrices[i]

    def scaled(self, delta) -> "ProximalSpec":
        """Multiply every ``P_i`` by ``delta_i`` (the tau for the parametric kinds)."""
        delta = np.broadcast_to(np.asarray(delta, dtype=float), (self.n_blocks,))
        if self.kind == "explicit_matrix":
            return replace(self, matrices=tuple(d * m for d, m in zip(delta, self.matrices)))
        return replace(self, tau=self.tau * delta)

    def tau_max(self) -> float:
        if self.kind == "explicit_matrix":
            return max(float(np.linalg.eigvalsh(m)[-1]) for m in self.matrices)
        return float(self.tau.max())

    def gx_quad(self, i: int, dx_i: np.ndarray, adx_i: np.ndarray, rho: float) -> float:
        """``dx_i^T (P_i + rho A_i^T A_i) dx_i`` given ``adx_i = A_i dx_i``."""
        if self.kind == "prox_linear":
            return float(self.tau[i] * (dx_i @ dx_i))
        if self.kind == "standard":
            return float(self.tau[i] * (dx_i @ dx_i) + rho * (adx_i @ adx_i))
        return float(dx_i @ self.matrices[i] @ dx_i + rho * (adx_i @ adx_i))


def balanced_epsilon(beta: float, n_blocks: int) -> np.ndarray:
    return np.full(n_blocks, (2.0 - beta) / n_blocks)


def sufficient_tau(kind: str, rho: float, beta: float, n_blocks: int, norms_sq) -> np.ndarray:
    """Smallest ``tau_i`` meeting the PSD bound with balanced ``eps_i = (2-beta)/N``.

    ``standard``: ``rho (N/(2-beta) - 1) ||A_i||^2``;
    ``prox_linear``: ``rho N/(2-beta) ||A_i||^2``.
    """
    if not 0 < beta < 2:
        raise ValueError(f"beta must lie in (0, 2), got {beta}")
    norms_sq = np.asarray(norms_sq, dtype=float)
    ratio = n_blocks / (2.0 - beta)
    if kind == "standard":
        return rho * (ratio - 1.0) * norms_sq
    if kind == "prox_linear":
        return rho * ratio * norms_sq
    raise ValueError(f"no scalar bound for proximal kind {kind!r}")


def block_norms_sq(A: np.ndarray, partition: BlockPartition) -> np.ndarray:
    return np.array([spectral_norm_sq(block_columns(A, partition, i)) for i in range(partition.n_blocks)])


def _gx_form(dx, A, partition, proximal, rho):
    total = 0.0
    for i, sel in enumerate(partition.selectors):
        A_i = A[:, sel]
        total += proximal.gx_quad(i, dx[sel], A_i @ dx[sel], rho)
    return total


def q_form(dx: np.ndarray, dlam: np.ndarray, A: np.ndarray, partition: BlockPartition,
           proximal: ProximalSpec, rho: float, beta: float) -> float:
    """``||(dx, dlam)||_Q^2`` without forming ``Q``; ``dx`` in natural coordinates."""
    dx, dlam = np.asarray(dx, dtype=float), np.asarray(dlam, dtype=float)
    if dx.shape != (A.shape[1],) or dlam.shape != (A.shape[0],):
        raise ValueError("dimension mismatch between (dx, dlam) and A")
    return (_gx_form(dx, A, partition, proximal, rho)
            + (2.0 - beta) / (beta ** 2 * rho) * (dlam @ dlam)
            + (2.0 / beta) * (dlam @ (A @ dx)))


def g_form(dx: np.ndarray, dlam: np.ndarray, A: np.ndarray, partition: BlockPartition,
           proximal: ProximalSpec, rho: float, beta: float) -> float:
    dx, dlam = np.asarray(dx, dtype=float), np.asarray(dlam, dtype=float)
    if dx.shape != (A.shape[1],) or dlam.shape != (A.shape[0],):
        raise ValueError("dimension mismatch between (dx, dlam) and A")
    return _gx_form(dx, A, partition, proximal, rho) + (dlam @ dlam) / (beta * rho)


def dense_gx(A: np.ndarray, partition: BlockPartition, proximal: ProximalSpec, rho: float) -> np.ndarray:
    """``G_x`` in natural coordinate order (blocks scattered back by their selectors)."""
    n = A.shape[1]
    gx = np.zeros((n, n))
    for i, sel in enumerate(partition.selectors):
        A_i = A[:, sel]
        gx[np.ix_(sel, sel)] = proximal.matrix(i, A_i, rho) + rho * (A_i.T @ A_i)
    return gx


def dense_q(A: np.ndarray, partition: BlockPartition, proximal: ProximalSpec,
            rho: float, beta: float) -> np.ndarray:
    m, n = A.shape
    q = np.zeros((n + m, n + m))
    q[:n, :n] = dense_gx(A, partition, proximal, rho)
    q[:n, n:] = A.T / beta
    q[n:, :n] = A / beta
    q[n:, n:] = (2.0 - beta) / (rho * beta ** 2) * np.eye(m)
    return q


def dense_g(A: np.ndarray, partition: BlockPartition, proximal: ProximalSpec,
            rho: float, beta: float) -> np.ndarray:
    m, n = A.shape
    g = np.zeros((n + m, n + m))
    g[:n, :n] = dense_gx(A, partition, proximal, rho)
    g[n:, n:] = np.eye(m) / (beta * rho)
    return g


@dataclass
class PsdCheck:
    certified: bool
    lambda_min: float
    method: str
    witness: Optional[np.ndarray] = None
    norm: float = 0.0


def certify_psd(A: np.ndarray, partition: BlockPartition, proximal: ProximalSpec,
                rho: float, beta: float, trials: int = 256, seed: int = 0,
                dense_limit: int = 1024, rtol: float = 1e-8) -> PsdCheck:
    """Check ``Q >= 0``.

    Small systems get a dense eigendecomposition and ``lambda_min >= -rtol
    ||Q||``. Larger ones are probed with ``trials`` random unit directions:
    a negative probe is a conclusive witness, a clean run is only advisory.
    """
    m, n = A.shape
    if n + m <= dense_limit:
        q = dense_q(A, partition, proximal, rho, beta)
        w, v = np.linalg.eigh(q)
        scale = float(np.abs(w).max())
        ok = bool(w[0] >= -rtol * scale)
        return PsdCheck(ok, float(w[0]), "dense", None if ok else v[:, 0], scale)
    rng = np.random.default_rng(seed)
    worst, witness = np.inf, None
    for _ in range(trials):
        u = rng.standard_normal(n + m)
        u /= np.linalg.norm(u)
        val = q_form(u[:n], u[n:], A, partition, proximal, rho, beta)
        if val < worst:
            worst, witness = val, u
    ok = bool(worst >= 0)
    return PsdCheck(ok, float(worst), "probe", None if ok else witness, np.nan)


def adapt(proximal: ProximalSpec, q_value: float, du_norm_sq: float, eta: float, delta):
    """Grow the proximal term when ``||du||_Q^2 < eta ||du||^2``.

    Returns ``(proximal, triggered)``; ``proximal`` is scaled by ``delta`` when
    triggered and returned unchanged otherwise. The caller is responsible for
    backtracking the iterate.
    """
    if q_value < eta * du_norm_sq:
        return proximal.scaled(delta), True
    return proximal, False


@dataclass
class Certificate:
    """Summary of the convergence certificate attached to a solve."""

    epsilon: np.ndarray
    beta: float
    rho: float
    certified_bound_tau: float
    used_tau_final: float
    q_form_min_observed: float = np.inf
    triggers: int = 0
    q_log: list = field(default_factory=list, repr=False)

    def as_row(self) -> dict:
        return {
            "certified_bound_tau": self.certified_bound_tau,
            "used_tau_final": self.used_tau_final,
            "q_form_min_observed": self.q_form_min_observed,
            "triggers": self.triggers,
        }
