"""Ground truth and comparison precoders.

The optimal power comes from the Lagrangian dual of the PM problem,

    max_{lam >= 0}  b^T lam - 1/4 ||A^T lam||^2,     x* = A^T lam* / 2,

solved by accelerated projected gradient with adaptive restart and a final
active-set polish. ZF and RZF are normalized to a reference power, and
detection is nearest-point PSK with Gray labels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ci_model import CiInstance, PskConstellation, Scenario


class NotConvergedError(RuntimeError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class RankError(np.linalg.LinAlgError):
    pass


@dataclass
class OracleResult:
    lam: np.ndarray
    x: np.ndarray
    power: float
    iterations: int
    pg_norm: float


def _projected_gradient(lam, grad):
    pg = grad.copy()
    at_bound = lam <= 0
    pg[at_bound] = np.minimum(grad[at_bound], 0.0)
    return pg


def _polish(A, b, lam, gram):
    """Solve the equality system on the estimated active set; keep it only if KKT holds."""
    active = lam > 0
    if not active.any():
        return None
    try:
        lam_s = 2.0 * np.linalg.solve(gram[np.ix_(active, active)], b[active])
    except np.linalg.LinAlgError:
        return None
    if np.any(lam_s < 0):
        return None
    cand = np.zeros_like(lam)
    cand[active] = lam_s
    return cand


def dual_nnls_solve(A: np.ndarray, b: np.ndarray, tol: float = 1e-9, max_iter: int = 200000) -> OracleResult:
    """Minimum-power CI-feasible ``x`` via the nonnegative dual.

    Stops once the projected-gradient norm of ``1/4 ||A^T lam||^2 - b^T lam``
    is at most ``tol (1 + ||b||)``.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    gram = A @ A.T
    lip = 0.5 * np.linalg.eigvalsh(gram)[-1]
    step = 1.0 / lip
    thresh = tol * (1.0 + np.linalg.norm(b))

    def grad(lam):
        return 0.5 * (gram @ lam) - b

    def objective(lam):
        return 0.25 * lam @ gram @ lam - b @ lam

    lam = np.zeros_like(b)
    y = lam.copy()
    theta = 1.0
    f_old = objective(lam)
    pg_norm = np.inf
    restarted = False
    for it in range(1, max_iter + 1):
        lam_new = np.maximum(y - step * grad(y), 0.0)
        f_new = objective(lam_new)
        if not restarted and f_new > f_old + 1e-15 * abs(f_old):
            # function-value restart; a plain projected step from lam always descends
            theta = 1.0
            y = lam.copy()
            restarted = True
            continue
        restarted = False
        theta_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta ** 2))
        y = lam_new + ((theta - 1.0) / theta_new) * (lam_new - lam)
        lam, theta, f_old = lam_new, theta_new, f_new
        if it % 10 == 0:
            pg_norm = np.linalg.norm(_projected_gradient(lam, grad(lam)))
            if pg_norm <= 1e3 * thresh:
                cand = _polish(A, b, lam, gram)
                if cand is not None:
                    pg_c = np.linalg.norm(_projected_gradient(cand, grad(cand)))
                    if pg_c <= thresh:
                        lam, pg_norm = cand, pg_c
                        break
            if pg_norm <= thresh:
                break
    else:
        x = 0.5 * A.T @ lam
        raise NotConvergedError(f"dual oracle stopped at projected gradient {pg_norm:.3e}",
                                OracleResult(lam, x, float(x @ x), max_iter, pg_norm))
    x = 0.5 * A.T @ lam
    return OracleResult(lam, x, float(x @ x), it, float(pg_norm))


def solve_oracle(instance: CiInstance, tol: float = 1e-9, max_iter: int = 200000) -> OracleResult:
    return dual_nnls_solve(instance.A, instance.b, tol, max_iter)


def feasible_round(instance: CiInstance, x: np.ndarray) -> np.ndarray:
    """Scale ``x`` up by the least factor that makes every CI margin nonnegative."""
    ax = instance.A @ x
    b = instance.b
    need = b > 0
    if np.any(ax[need] <= 0):
        raise ValueError("x cannot be made feasible by scaling")
    alpha = max(1.0, float(np.max(b[need] / ax[need]))) if need.any() else 1.0
    return alpha * x


def _normalize(direction: np.ndarray, reference_power: float) -> np.ndarray:
    norm = np.linalg.norm(direction)
    return direction * (np.sqrt(reference_power) / norm)


def zf_direction(scenario: Scenario) -> np.ndarray:
    H = scenario.channel
    gram = H @ H.conj().T
    if np.linalg.matrix_rank(gram) < H.shape[0]:
        raise RankError("channel Gram matrix is singular")
    return H.conj().T @ np.linalg.solve(gram, scenario.symbols)


def zf_precode(scenario: Scenario, reference_power: float) -> np.ndarray:
    """ZF transmit vector with power exactly ``reference_power``."""
    return _normalize(zf_direction(scenario), reference_power)


def rzf_precode(scenario: Scenario, reference_power: float, phi: float = None) -> np.ndarray:
    """RZF with regularizer ``phi`` (default: the mean noise variance)."""
    H = scenario.channel
    if phi is None:
        phi = float(np.mean(scenario.sigma2))
    if phi == 0:
        return zf_precode(scenario, reference_power)
    gram = H @ H.conj().T + phi * np.eye(H.shape[0])
    return _normalize(H.conj().T @ np.linalg.solve(gram, scenario.symbols), reference_power)


def gray_labels(order: int) -> np.ndarray:
    """Gray label of each constellation index (adjacent points differ in one bit)."""
    k = np.arange(order)
    return k ^ (k >> 1)


def detect(received: np.ndarray, constellation: PskConstellation) -> np.ndarray:
    """Nearest-point decisions, returned as constellation indices."""
    received = np.asarray(received)
    return np.argmin(np.abs(received[..., None] - constellation.points), axis=-1)


def symbol_indices(symbols: np.ndarray, constellation: PskConstellation) -> np.ndarray:
    return detect(symbols, constellation)


def bit_errors(received: np.ndarray, constellation: PskConstellation, true_symbols: np.ndarray) -> int:
    """Errored Gray-coded bits between detected and transmitted symbols."""
    labels = gray_labels(constellation.order)
    diff = labels[detect(received, constellation)] ^ labels[symbol_indices(true_symbols, constellation)]
    popcount = np.array([bin(v).count("1") for v in range(constellation.order)])
    return int(popcount[diff].sum())


def detect_and_ber(received: np.ndarray, constellation: PskConstellation, true_symbols: np.ndarray):
    """Return ``(bit_errors, total_bits)`` for one or more symbol slots."""
    n_bits = np.size(true_symbols) * constellation.bits_per_symbol
    return bit_errors(received, constellation, true_symbols), n_bits
