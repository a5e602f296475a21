"""Binary network snapshots, series, and the canonical dyad ordering.

Node indices are 0-based everywhere inside the package; file formats and
user-facing reports use 1-based labels.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np


class NetworkError(ValueError):
    """Raised when a network or series violates a structural invariant."""


class DyadIndex(NamedTuple):
    ordinal: int
    i: int
    j: int


def n_dyads(n: int, directed: bool) -> int:
    return n * (n - 1) if directed else n * (n - 1) // 2


def dyad_arrays(n: int, directed: bool) -> tuple[np.ndarray, np.ndarray]:
    """Row and column index arrays of all dyads in canonical order.

    Directed: row-major over ``i != j``. Undirected: row-major over ``i < j``.
    """
    if n < 2:
        raise NetworkError(f"need at least 2 nodes, got n={n}")
    if directed:
        mask = ~np.eye(n, dtype=bool)
    else:
        mask = np.triu(np.ones((n, n), dtype=bool), k=1)
    rows, cols = np.nonzero(mask)
    return rows, cols


def enumerate_dyads(n: int, directed: bool) -> list[DyadIndex]:
    rows, cols = dyad_arrays(n, directed)
    return [DyadIndex(k, int(i), int(j)) for k, (i, j) in enumerate(zip(rows, cols))]


def _as_adjacency(adjacency, directed: bool) -> np.ndarray:
    a = np.asarray(adjacency)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise NetworkError(f"adjacency must be square, got shape {a.shape}")
    if not np.isin(a, (0, 1)).all():
        raise NetworkError("adjacency entries must be 0 or 1")
    a = a.astype(np.uint8)
    if np.diagonal(a, axis1=-2, axis2=-1).any():
        raise NetworkError("self-edges are not allowed (non-zero diagonal)")
    if not directed and not np.array_equal(a, np.swapaxes(a, -1, -2)):
        raise NetworkError("undirected network has an asymmetric adjacency matrix")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class NetworkSnapshot:
    """One binary network observed at a single time point."""

    adjacency: np.ndarray
    directed: bool = True

    def __post_init__(self):
        a = _as_adjacency(self.adjacency, self.directed)
        if a.ndim != 2:
            raise NetworkError("snapshot adjacency must be a 2-d matrix")
        object.__setattr__(self, "adjacency", a)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    def __eq__(self, other):
        if not isinstance(other, NetworkSnapshot):
            return NotImplemented
        return self.directed == other.directed and np.array_equal(
            self.adjacency, other.adjacency
        )

    def edges(self) -> list[tuple[int, int]]:
        rows, cols = dyad_arrays(self.n, self.directed)
        on = self.adjacency[rows, cols] == 1
        return list(zip(rows[on].tolist(), cols[on].tolist()))

    def dyad_values(self) -> np.ndarray:
        rows, cols = dyad_arrays(self.n, self.directed)
        return self.adjacency[rows, cols]

    @classmethod
    def from_edges(cls, n: int, edges, directed: bool = True) -> "NetworkSnapshot":
        a = np.zeros((n, n), dtype=np.uint8)
        for i, j in edges:
            a[i, j] = 1
            if not directed:
                a[j, i] = 1
        return cls(a, directed)


@dataclass(frozen=True)
class NodalAttributes:
    """Categorical node labels, fixed over time."""

    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))

    def __len__(self) -> int:
        return len(self.values)

    def codes(self) -> np.ndarray:
        """Integer code per node; equal labels share a code."""
        lookup: dict = {}
        return np.array([lookup.setdefault(v, len(lookup)) for v in self.values], dtype=np.int64)


@dataclass(frozen=True, eq=False)
class NetworkSeries:
    """T snapshots over a fixed node set, stored as a read-only (T, n, n) array."""

    adjacency: np.ndarray
    directed: bool = True
    attributes: NodalAttributes | None = None

    def __post_init__(self):
        a = _as_adjacency(self.adjacency, self.directed)
        if a.ndim != 3:
            raise NetworkError("series adjacency must have shape (T, n, n)")
        if a.shape[0] < 2:
            raise NetworkError(f"a series needs at least 2 snapshots, got T={a.shape[0]}")
        if a.shape[1] < 2:
            raise NetworkError("a series needs at least 2 nodes")
        object.__setattr__(self, "adjacency", a)
        attrs = self.attributes
        if attrs is not None:
            if not isinstance(attrs, NodalAttributes):
                attrs = NodalAttributes(attrs)
                object.__setattr__(self, "attributes", attrs)
            if len(attrs) != a.shape[1]:
                raise NetworkError(
                    f"attribute vector has length {len(attrs)}, expected n={a.shape[1]}"
                )

    @classmethod
    def from_snapshots(
        cls, snapshots: Sequence[NetworkSnapshot], attributes=None
    ) -> "NetworkSeries":
        if not snapshots:
            raise NetworkError("empty snapshot list")
        directed = snapshots[0].directed
        n = snapshots[0].n
        for s in snapshots:
            if s.directed != directed or s.n != n:
                raise NetworkError("snapshots disagree on node count or directedness")
        return cls(np.stack([s.adjacency for s in snapshots]), directed, attributes)

    @property
    def T(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n(self) -> int:
        return self.adjacency.shape[1]

    @property
    def n_dyads(self) -> int:
        return n_dyads(self.n, self.directed)

    def __len__(self) -> int:
        return self.T

    def __getitem__(self, t: int) -> NetworkSnapshot:
        """Snapshot at 0-based position ``t`` (time point t + 1)."""
        return NetworkSnapshot(self.adjacency[t], self.directed)

    @property
    def snapshots(self) -> tuple[NetworkSnapshot, ...]:
        return tuple(self[t] for t in range(self.T))

    def __eq__(self, other):
        if not isinstance(other, NetworkSeries):
            return NotImplemented
        return (
            self.directed == other.directed
            and self.attributes == other.attributes
            and np.array_equal(self.adjacency, other.adjacency)
        )


def _check_pair(a: NetworkSnapshot, b: NetworkSnapshot) -> None:
    if a.n != b.n or a.directed != b.directed:
        raise NetworkError(
            f"snapshot mismatch: n={a.n}/{b.n}, directed={a.directed}/{b.directed}"
        )


def derive_formation(y_prev: NetworkSnapshot, y_curr: NetworkSnapshot) -> NetworkSnapshot:
    """Previous network plus the edges that formed."""
    _check_pair(y_prev, y_curr)
    return NetworkSnapshot(np.maximum(y_prev.adjacency, y_curr.adjacency), y_prev.directed)


def derive_dissolution(y_prev: NetworkSnapshot, y_curr: NetworkSnapshot) -> NetworkSnapshot:
    """Previous network minus the edges that dissolved."""
    _check_pair(y_prev, y_curr)
    return NetworkSnapshot(np.minimum(y_prev.adjacency, y_curr.adjacency), y_prev.directed)


def reconstruct_current(
    y_prev: NetworkSnapshot, y_plus: NetworkSnapshot, y_minus: NetworkSnapshot
) -> NetworkSnapshot:
    """Inverse of the formation/dissolution split.

    Existing edges take their value from the dissolution network, absent
    ones from the formation network.
    """
    _check_pair(y_prev, y_plus)
    _check_pair(y_prev, y_minus)
    prev = y_prev.adjacency
    if (y_plus.adjacency < prev).any():
        raise NetworkError("formation network must contain the previous network")
    if (y_minus.adjacency > prev).any():
        raise NetworkError("dissolution network must be contained in the previous network")
    out = np.where(prev == 1, y_minus.adjacency, y_plus.adjacency)
    return NetworkSnapshot(out, y_prev.directed)
