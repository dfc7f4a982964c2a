"""Closed-form iterate maps shared by every solver variant.

All block kernels solve the same strongly convex block subproblem

    min_x  ||x||^2 + rho/2 ||A_i x - v_i||^2 + 1/2 ||x - x_i^t||_{P_i}^2,

with ``v_i = b + c + lam/rho - sum_{j != i} A_j x_j``. They differ only in
how ``(2I + rho A_i^T A_i + P_i)^{-1}`` is applied. ``rhs`` below always
means ``P_i x_i^t + rho A_i^T v_i``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg


class StaleCacheError(RuntimeError):
    """A cached factorization no longer matches its block or tuning."""


def update_slack(ax: np.ndarray, b: np.ndarray, lam: np.ndarray, rho: float) -> np.ndarray:
    """Projection of ``A x - b - lam/rho`` onto the nonnegative orthant."""
    return np.maximum(ax - b - lam / rho, 0.0)


def constraint_residual(ax: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    return -ax + b + c


def update_dual(lam: np.ndarray, beta: float, rho: float, residual: np.ndarray) -> np.ndarray:
    return lam + beta * rho * residual


def g_value(ax: np.ndarray, b: np.ndarray) -> np.ndarray:
    return -ax + b


def gplus(ax: np.ndarray, lam: np.ndarray, rho: float, b: np.ndarray) -> np.ndarray:
    """``max(g(x), -lam/rho)`` with ``g(x) = -A x + b``; equals ``g(x) + c``."""
    return np.maximum(-ax + b, -lam / rho)


def block_rhs(A_i: np.ndarray, x_i: np.ndarray, v_i: np.ndarray, rho: float, P_i) -> np.ndarray:
    """``P_i x_i + rho A_i^T v_i`` for a matrix, diagonal vector, or scalar ``P_i``."""
    if np.ndim(P_i) == 2:
        px = P_i @ x_i
    else:
        px = P_i * x_i
    return px + rho * (A_i.T @ v_i)


def update_block_general(A_i: np.ndarray, x_i: np.ndarray, others_sum: np.ndarray,
                         b: np.ndarray, c: np.ndarray, lam: np.ndarray, rho: float,
                         P_i: np.ndarray) -> np.ndarray:
    """Direct solve of the block optimality system.

    ``others_sum`` is ``sum_{j != i} A_j x_j^t``.
    """
    n = A_i.shape[1]
    P_i = np.atleast_2d(np.asarray(P_i, dtype=float))
    if P_i.shape == (1, 1) and n > 1:
        P_i = P_i[0, 0] * np.eye(n)
    v = -others_sum + b + c + lam / rho
    H = 2.0 * np.eye(n) + rho * (A_i.T @ A_i) + P_i
    try:
        return np.linalg.solve(H, block_rhs(A_i, x_i, v, rho, P_i))
    except np.linalg.LinAlgError as exc:
        raise FloatingPointError(f"block system is singular: {exc}") from exc


@dataclass
class BlockFactor:
    """Cholesky factor of ``2I + rho A_i^T A_i + P_i`` tagged with a tuning version."""

    cho: tuple
    version: int

    @classmethod
    def build(cls, A_i: np.ndarray, rho: float, P_i: np.ndarray, version: int) -> "BlockFactor":
        n = A_i.shape[1]
        H = 2.0 * np.eye(n) + rho * (A_i.T @ A_i) + P_i
        try:
            return cls(linalg.cho_factor(H), version)
        except linalg.LinAlgError as exc:
            raise FloatingPointError(f"block system is not positive definite: {exc}") from exc

    def solve(self, rhs: np.ndarray, version: int) -> np.ndarray:
        if version != self.version:
            raise StaleCacheError(f"factor built for tuning version {self.version}, now {version}")
        return linalg.cho_solve(self.cho, rhs)


@dataclass
class BlockSvdCache:
    """Eigenpairs of ``A_i^T A_i``; reusable across any ``(rho, tau_i)``."""

    U: np.ndarray
    sigma: np.ndarray
    gram: np.ndarray

    @classmethod
    def build(cls, A_i: np.ndarray) -> "BlockSvdCache":
        gram = A_i.T @ A_i
        U, sigma, _ = np.linalg.svd(gram, hermitian=True)
        return cls(U, sigma, gram)

    def check(self, A_i: np.ndarray) -> None:
        gram = A_i.T @ A_i
        if gram.shape != self.gram.shape or not np.allclose(gram, self.gram, rtol=1e-12, atol=0.0):
            raise StaleCacheError("SVD cache was built for a different block")

    def divisor(self, rho: float, tau: float) -> np.ndarray:
        return rho * self.sigma + (2.0 + tau)


def update_block_svd(cache: BlockSvdCache, r_i: np.ndarray, rho: float, tau: float,
                     A_i: np.ndarray = None) -> np.ndarray:
    """Apply ``(rho A^T A + (2 + tau) I)^{-1}`` through the cached eigenbasis.

    Passing ``A_i`` re-validates the cache against the block.
    """
    if A_i is not None:
        cache.check(A_i)
    return cache.U @ ((cache.U.T @ r_i) / cache.divisor(rho, tau))


def update_block_pair(d_i: float, r_i: np.ndarray, rho: float, p_diag) -> np.ndarray:
    """Antenna-pair fast path: ``A_i^T A_i = d_i I`` and diagonal ``P_i``."""
    p = np.asarray(p_diag, dtype=float)
    if p.ndim == 2:
        if np.any(p - np.diag(np.diag(p))):
            raise ValueError("pair kernel needs a diagonal proximal matrix")
        p = np.diag(p)
    return r_i / (2.0 + rho * d_i + p)


def update_block_scalar(a_i: np.ndarray, x_i: float, v_i: np.ndarray, rho: float, p_i: float) -> float:
    """Single-coordinate block; ``v_i`` as in the module docstring."""
    a_i = np.ravel(a_i)
    return float((p_i * x_i + rho * (a_i @ v_i)) / (2.0 + rho * (a_i @ a_i) + p_i))


def update_block_proxlinear(A_i: np.ndarray, x_i: np.ndarray, ax: np.ndarray, b: np.ndarray,
                            c: np.ndarray, lam: np.ndarray, rho: float, tau: float) -> np.ndarray:
    """Inverse-free update with ``P_i = tau I - rho A_i^T A_i``.

    ``ax`` is the full ``A x^t``. No factorization of any kind is used.
    """
    return (tau * x_i + rho * (A_i.T @ (-ax + b + c + lam / rho))) / (2.0 + tau)
