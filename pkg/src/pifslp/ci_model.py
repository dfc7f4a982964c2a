"""Constructive-interference constraint model for PSK symbol-level precoding.

A downlink of ``n_tx`` antennas serves ``n_users`` single-antenna users. For
a given channel realization and symbol vector, the requirement that every
noiseless received point lies inside its symbol's CI region is a set of
linear inequalities ``A @ x >= b`` on the real-valued transmit vector
``x = [Re(x~); Im(x~)]``. This module builds ``(A, b)``, the scenarios they
come from, and the small helpers used to evaluate a transmit vector.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

SCHEMA_VERSION = 1

# Purpose tags for RNG substreams.
STREAM_CHANNEL = 0
STREAM_SYMBOLS = 1
STREAM_NOISE = 2


class InvalidOrderError(ValueError):
    """Constellation order outside the supported range."""


def rng_stream(seed: int, realization: int = 0, purpose: int = 0) -> np.random.Generator:
    """Counter-based generator for one ``(realization, purpose)`` substream.

    Philox keyed through ``SeedSequence`` spawn keys, so realization ``r``
    draws the same numbers whether it runs alone, in a batch, or on a
    different worker.
    """
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=(int(realization), int(purpose)))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class PskConstellation:
    order: int
    points: np.ndarray

    @property
    def bits_per_symbol(self) -> int:
        return int(round(np.log2(self.order)))


def psk_constellation(order: int) -> PskConstellation:
    """Unit-modulus M-PSK points ``exp(j*pi*(2k-1)/M)``, ``k = 1..M``.

    With this offset QPSK is ``(+-1 +-j)/sqrt(2)`` and its decision regions
    are the four quadrants.
    """
    if int(order) != order or order < 2:
        raise InvalidOrderError(f"constellation order must be an integer >= 2, got {order!r}")
    order = int(order)
    k = np.arange(1, order + 1)
    return PskConstellation(order, np.exp(1j * np.pi * (2 * k - 1) / order))


@dataclass
class Scenario:
    """One symbol slot: channel ``H~`` (K x N_t), symbols, SINR targets, noise."""

    n_tx: int
    n_users: int
    order: int
    channel: np.ndarray
    symbols: np.ndarray
    gamma: np.ndarray
    sigma2: np.ndarray

    def __post_init__(self):
        self.channel = np.asarray(self.channel, dtype=complex)
        self.symbols = np.asarray(self.symbols, dtype=complex)
        self.gamma = np.broadcast_to(np.asarray(self.gamma, dtype=float), (self.n_users,)).copy()
        self.sigma2 = np.broadcast_to(np.asarray(self.sigma2, dtype=float), (self.n_users,)).copy()
        if self.channel.shape != (self.n_users, self.n_tx):
            raise ValueError(f"channel must be {self.n_users}x{self.n_tx}, got {self.channel.shape}")
        if self.symbols.shape != (self.n_users,):
            raise ValueError("symbols must have one entry per user")
        if np.any(self.gamma <= 0) or np.any(self.sigma2 <= 0):
            raise ValueError("gamma and sigma2 must be positive")
        if not np.all(np.isfinite(self.channel)):
            raise ValueError("channel entries must be finite")
        pts = psk_constellation(self.order).points
        dist = np.abs(self.symbols[:, None] - pts[None, :]).min(axis=1)
        if np.any(dist > 1e-9):
            raise ValueError("every symbol must be a constellation point")


def generate_scenario(
    n_tx: int,
    n_users: int,
    order: int = 4,
    gamma: Union[float, Sequence[float]] = 1.0,
    sigma2: Union[float, Sequence[float]] = 1.0,
    seed: int = 0,
    realization: int = 0,
) -> Scenario:
    """Draw an i.i.d. Rayleigh channel (unit variance per entry) and uniform symbols."""
    if n_tx < 1 or n_users < 1:
        raise ValueError("n_tx and n_users must be positive")
    const = psk_constellation(order)
    g = rng_stream(seed, realization, STREAM_CHANNEL)
    channel = (g.standard_normal((n_users, n_tx)) + 1j * g.standard_normal((n_users, n_tx))) / np.sqrt(2)
    idx = rng_stream(seed, realization, STREAM_SYMBOLS).integers(0, const.order, size=n_users)
    return Scenario(n_tx, n_users, const.order, channel, const.points[idx], gamma, sigma2)


@dataclass
class CiInstance:
    """Real-valued constraint system ``A @ x >= b`` and the scenario behind it.

    Rows ``2k, 2k+1`` belong to user ``k`` (one row per user for BPSK).
    """

    A: np.ndarray
    b: np.ndarray
    scenario: Scenario = field(repr=False)
    order: int = 4

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @property
    def dim(self) -> int:
        return self.A.shape[1]


def real_channel_block(h: np.ndarray) -> np.ndarray:
    """The 2 x 2N_t real matrix acting on ``[Re x; Im x]`` like ``h^T x``."""
    return np.block([[h.real[None, :], -h.imag[None, :]], [h.imag[None, :], h.real[None, :]]])


def boundary_matrix(order: int) -> np.ndarray:
    cot = 1.0 / np.tan(np.pi / order)
    return np.array([[1.0, -cot], [1.0, cot]])


def assemble_instance(scenario: Scenario) -> CiInstance:
    """Stack the per-user CI constraints into ``(A, b)``.

    For ``M >= 4`` each user contributes ``N @ S_k @ H_k`` where ``S_k`` is the
    real form of ``1/s_k``. BPSK keeps only the half-plane
    ``Re(h_k^T x / s_k) >= sqrt(gamma_k) sigma_k`` (one row per user).
    """
    order = scenario.order
    hhat = scenario.channel / scenario.symbols[:, None]
    thresh = np.sqrt(scenario.gamma * scenario.sigma2)
    if order == 2:
        A = np.hstack([hhat.real, -hhat.imag])
        b = thresh.copy()
    else:
        nmat = boundary_matrix(order)
        A = np.vstack([nmat @ real_channel_block(hk) for hk in hhat])
        b = np.repeat(thresh, 2)
    return CiInstance(A, b, scenario, order)


def ci_margins(instance: CiInstance, x: np.ndarray) -> np.ndarray:
    """``A @ x - b``; ``x`` is CI-feasible iff every entry is nonnegative."""
    x = np.asarray(x, dtype=float)
    if x.shape != (instance.dim,):
        raise ValueError(f"x must have length {instance.dim}, got shape {x.shape}")
    return instance.A @ x - instance.b


def complexify(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size % 2:
        raise ValueError("real transmit vector must have even length")
    half = x.size // 2
    return x[:half] + 1j * x[half:]


def realify(xc: np.ndarray) -> np.ndarray:
    xc = np.asarray(xc, dtype=complex)
    return np.concatenate([xc.real, xc.imag])


def power(x: np.ndarray) -> float:
    x = np.asarray(x)
    return float(np.vdot(x, x).real)


def db_to_linear(value_db):
    return 10.0 ** (np.asarray(value_db, dtype=float) / 10.0)


def linear_to_db(value):
    return 10.0 * np.log10(np.asarray(value, dtype=float))


# -- JSON fixtures -----------------------------------------------------------

def _pairs(z: np.ndarray) -> list:
    z = np.asarray(z, dtype=complex).ravel()
    return [[float(v.real), float(v.imag)] for v in z]


def scenario_to_dict(scenario: Scenario) -> dict:
    return {
        "version": SCHEMA_VERSION,
        "N_t": scenario.n_tx,
        "K": scenario.n_users,
        "M": scenario.order,
        "gamma": [float(v) for v in scenario.gamma],
        "sigma2": [float(v) for v in scenario.sigma2],
        "channel": _pairs(scenario.channel),
        "symbols": _pairs(scenario.symbols),
    }


def scenario_from_dict(doc: dict) -> Scenario:
    if doc.get("version", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise ValueError(f"unsupported scenario schema version {doc.get('version')!r}")
    n_tx, n_users = int(doc["N_t"]), int(doc["K"])
    ch = np.asarray(doc["channel"], dtype=float)
    sy = np.asarray(doc["symbols"], dtype=float)
    channel = (ch[:, 0] + 1j * ch[:, 1]).reshape(n_users, n_tx)
    symbols = sy[:, 0] + 1j * sy[:, 1]
    return Scenario(n_tx, n_users, int(doc["M"]), channel, symbols, doc["gamma"], doc["sigma2"])


def scenario_to_json(scenario: Scenario) -> str:
    return json.dumps(scenario_to_dict(scenario))


def scenario_from_json(text: str) -> Scenario:
    return scenario_from_dict(json.loads(text))


def instance_to_json(instance: CiInstance) -> str:
    """Instances serialize as their scenario; ``(A, b)`` is rebuilt on load."""
    return scenario_to_json(instance.scenario)


def instance_from_json(text: str) -> CiInstance:
    return assemble_instance(scenario_from_json(text))
