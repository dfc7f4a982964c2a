"""Block decomposition of the real transmit vector.

A :class:`BlockPartition` splits the ``2 N_t`` coordinates of ``x`` into ``N``
disjoint index sets. ``A_i`` is the column block of ``A`` on set ``i``; the
constraint sum ``A @ x`` is then ``sum_i A_i @ x_i``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

SCHEMES = ("adjacent", "antenna_pair", "scalar", "explicit")


class PartitionError(ValueError):
    """Selectors do not form a disjoint cover."""


class StructureError(ValueError):
    """A block lacks the orthogonal equal-norm column structure."""


@dataclass(frozen=True)
class BlockPartition:
    dim: int
    selectors: tuple
    scheme: str = "explicit"

    def __post_init__(self):
        sels = tuple(np.asarray(s, dtype=np.intp) for s in self.selectors)
        object.__setattr__(self, "selectors", sels)
        if not 1 <= len(sels) <= self.dim:
            raise PartitionError(f"need 1 <= N <= {self.dim} blocks, got {len(sels)}")
        if any(s.ndim != 1 or s.size == 0 for s in sels):
            raise PartitionError("every block must be a non-empty index list")
        flat = np.concatenate(sels)
        if flat.min() < 0 or flat.max() >= self.dim:
            raise PartitionError("block index out of range")
        if flat.size != self.dim or np.unique(flat).size != self.dim:
            raise PartitionError("blocks must be disjoint and cover every coordinate")

    @property
    def n_blocks(self) -> int:
        return len(self.selectors)

    @property
    def sizes(self) -> tuple:
        return tuple(int(s.size) for s in self.selectors)

    def to_dict(self) -> dict:
        if self.scheme == "explicit":
            return {"scheme": "explicit", "N": self.n_blocks,
                    "lists": [s.tolist() for s in self.selectors]}
        return {"scheme": self.scheme, "N": self.n_blocks}

    @classmethod
    def from_dict(cls, doc: dict, dim: int) -> "BlockPartition":
        return make_partition(dim, int(doc["N"]), doc.get("scheme", "adjacent"), doc.get("lists"))


def make_partition(dim: int, n_blocks: int, scheme: str = "adjacent",
                   lists: Optional[Sequence[Sequence[int]]] = None) -> BlockPartition:
    """Build a partition of ``range(dim)`` into ``n_blocks`` blocks.

    Parameters
    ----------
    dim : int
        ``2 N_t``.
    n_blocks : int
        Number of blocks ``N``.
    scheme : {"adjacent", "antenna_pair", "scalar", "explicit"}
        ``adjacent`` gives contiguous blocks (the first ``dim % N`` blocks are
        one longer when ``N`` does not divide ``dim``); ``antenna_pair``
        groups coordinate ``i`` with ``N_t + i``; ``scalar`` gives singletons;
        ``explicit`` takes ``lists`` verbatim.
    """
    if scheme not in SCHEMES:
        raise PartitionError(f"unknown partition scheme {scheme!r}")
    if scheme == "explicit":
        if lists is None:
            raise PartitionError("explicit scheme needs index lists")
        if len(lists) != n_blocks:
            raise PartitionError("number of lists must equal N")
        return BlockPartition(dim, tuple(lists), "explicit")
    if dim % 2 and scheme == "antenna_pair":
        raise PartitionError("antenna_pair needs an even dimension")
    if scheme == "antenna_pair":
        n_tx = dim // 2
        if n_blocks != n_tx:
            raise PartitionError(f"antenna_pair requires N = N_t = {n_tx}")
        return BlockPartition(dim, tuple([i, n_tx + i] for i in range(n_tx)), scheme)
    if scheme == "scalar":
        if n_blocks != dim:
            raise PartitionError(f"scalar scheme requires N = {dim}")
        return BlockPartition(dim, tuple([i] for i in range(dim)), scheme)
    if not 1 <= n_blocks <= dim:
        raise PartitionError(f"need 1 <= N <= {dim} blocks, got {n_blocks}")
    return BlockPartition(dim, tuple(np.array_split(np.arange(dim), n_blocks)), scheme)


def block_columns(A: np.ndarray, partition: BlockPartition, i: int) -> np.ndarray:
    if not 0 <= i < partition.n_blocks:
        raise IndexError(f"block {i} out of range for N = {partition.n_blocks}")
    return A[:, partition.selectors[i]]


def gather(x: np.ndarray, partition: BlockPartition, i: int) -> np.ndarray:
    if not 0 <= i < partition.n_blocks:
        raise IndexError(f"block {i} out of range for N = {partition.n_blocks}")
    return np.asarray(x)[partition.selectors[i]]


def scatter(x: np.ndarray, partition: BlockPartition, i: int, x_i: np.ndarray) -> np.ndarray:
    """Write block ``i`` into ``x`` in place and return ``x``."""
    x[partition.selectors[i]] = x_i
    return x


def split_blocks(x: np.ndarray, partition: BlockPartition) -> list:
    return [np.asarray(x)[s] for s in partition.selectors]


def join_blocks(blocks: Sequence[np.ndarray], partition: BlockPartition) -> np.ndarray:
    x = np.empty(partition.dim)
    for s, xi in zip(partition.selectors, blocks):
        x[s] = xi
    return x


def antenna_pair_gram(A_i: np.ndarray, rtol: float = 1e-9) -> float:
    """Return ``d`` with ``A_i^T A_i = d I_2``, or raise :class:`StructureError`."""
    A_i = np.asarray(A_i, dtype=float)
    if A_i.ndim != 2 or A_i.shape[1] != 2:
        raise StructureError("antenna-pair blocks have exactly two columns")
    gram = A_i.T @ A_i
    d = 0.5 * (gram[0, 0] + gram[1, 1])
    if d <= 0:
        raise StructureError("zero block")
    if abs(gram[0, 1]) > rtol * d or abs(gram[0, 0] - gram[1, 1]) > rtol * d:
        raise StructureError("block columns are not orthogonal with equal norm")
    return float(d)


def spectral_norm_sq(A_i: np.ndarray) -> float:
    """Largest eigenvalue of ``A_i^T A_i``."""
    A_i = np.atleast_2d(np.asarray(A_i, dtype=float))
    gram = A_i.T @ A_i
    n = gram.shape[0]
    if n == 1:
        return float(gram[0, 0])
    if n == 2:
        tr = gram[0, 0] + gram[1, 1]
        gap = np.hypot(gram[0, 0] - gram[1, 1], 2.0 * gram[0, 1])
        return float(0.5 * (tr + gap))
    return float(np.linalg.eigvalsh(gram)[-1])
