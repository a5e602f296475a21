"""Network statistics, change statistics and the per-transition design blocks.

Supported terms: edges, mutual, triangles, homophily, isolates. For directed
networks ``triangles`` is transitive triples plus cyclic triples (each
directed 3-cycle counted once).
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numba
import numpy as np

from .network import (
    NetworkError,
    NetworkSeries,
    NetworkSnapshot,
    NodalAttributes,
    dyad_arrays,
)


class Term(str, Enum):
    EDGES = "edges"
    MUTUAL = "mutual"
    TRIANGLES = "triangles"
    HOMOPHILY = "homophily"
    ISOLATES = "isolates"

    @property
    def code(self) -> int:
        return _CODES[self]

    @classmethod
    def parse(cls, name: str) -> "Term":
        key = name.strip().lower()
        key = _ALIASES.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown network statistic {name!r}") from None


_CODES = {Term.EDGES: 0, Term.MUTUAL: 1, Term.TRIANGLES: 2, Term.HOMOPHILY: 3, Term.ISOLATES: 4}
_ALIASES = {
    "edge": "edges",
    "mutuality": "mutual",
    "triangle": "triangles",
    "nodematch": "homophily",
    "isolate": "isolates",
}


def check_term(term: Term, directed: bool, attrs: NodalAttributes | None) -> None:
    if term is Term.MUTUAL and not directed:
        raise NetworkError("mutual is only defined for directed networks")
    if term is Term.HOMOPHILY and attrs is None:
        raise NetworkError("homophily requires nodal attributes")


@dataclass(frozen=True)
class StatisticSpec:
    """Ordered terms for the formation and the dissolution model."""

    formation: tuple[Term, ...]
    dissolution: tuple[Term, ...]

    def __post_init__(self):
        form = tuple(Term.parse(t) if isinstance(t, str) else Term(t) for t in self.formation)
        diss = tuple(Term.parse(t) if isinstance(t, str) else Term(t) for t in self.dissolution)
        if not form or not diss:
            raise ValueError("both models need at least one term")
        object.__setattr__(self, "formation", form)
        object.__setattr__(self, "dissolution", diss)

    @property
    def p1(self) -> int:
        return len(self.formation)

    @property
    def p2(self) -> int:
        return len(self.dissolution)

    @property
    def p(self) -> int:
        return self.p1 + self.p2

    def validate(self, directed: bool, attrs: NodalAttributes | None) -> None:
        for term in self.formation + self.dissolution:
            check_term(term, directed, attrs)

    def column_names(self) -> list[str]:
        return [f"form.{t.value}" for t in self.formation] + [
            f"diss.{t.value}" for t in self.dissolution
        ]

    @classmethod
    def parse(cls, text: str) -> "StatisticSpec":
        """Parse ``"form=edges,mutual;diss=edges"``.

        A bare term list (no ``=``) applies to both models.
        """
        text = text.strip()
        if "=" not in text:
            terms = [t for t in text.split(",") if t.strip()]
            return cls(tuple(terms), tuple(terms))
        parts = {}
        for chunk in text.split(";"):
            if not chunk.strip():
                continue
            key, _, value = chunk.partition("=")
            key = key.strip().lower()
            if key in ("form", "formation"):
                key = "form"
            elif key in ("diss", "dissolution"):
                key = "diss"
            else:
                raise ValueError(f"unknown model {key!r} in spec {text!r}")
            parts[key] = [t for t in value.split(",") if t.strip()]
        if set(parts) != {"form", "diss"}:
            raise ValueError(f"spec {text!r} must name both form= and diss=")
        return cls(tuple(parts["form"]), tuple(parts["diss"]))

    def __str__(self) -> str:
        form = ",".join(t.value for t in self.formation)
        diss = ",".join(t.value for t in self.dissolution)
        return f"form={form};diss={diss}"


def network_statistic(
    y: NetworkSnapshot, kind: Term, attrs: NodalAttributes | None = None
) -> float:
    kind = Term.parse(kind) if isinstance(kind, str) else kind
    check_term(kind, y.directed, attrs)
    a = y.adjacency.astype(np.float64)
    directed = y.directed
    if kind is Term.EDGES:
        s = a.sum()
        return float(s if directed else s / 2)
    if kind is Term.MUTUAL:
        return float((a * a.T).sum() / 2)
    if kind is Term.TRIANGLES:
        a2 = a @ a
        if directed:
            transitive = (a2 * a).sum()
            cyclic = np.trace(a2 @ a) / 3
            return float(transitive + cyclic)
        return float(np.trace(a2 @ a) / 6)
    if kind is Term.HOMOPHILY:
        codes = attrs.codes()
        same = codes[:, None] == codes[None, :]
        s = (a * same).sum()
        return float(s if directed else s / 2)
    if kind is Term.ISOLATES:
        deg = a.sum(axis=0) + a.sum(axis=1)
        return float((deg == 0).sum())
    raise AssertionError(kind)


@numba.njit(cache=True)
def _delta_one(adj, i, j, code, attr_codes, directed):
    # Change in one statistic when dyad (i, j) goes 0 -> 1 with the rest of
    # ``adj`` held fixed. The current value of adj[i, j] (and adj[j, i] when
    # undirected) is ignored.
    n = adj.shape[0]
    if code == 0:
        return 1.0
    if code == 1:
        return float(adj[j, i])
    if code == 2:
        s = 0
        for k in range(n):
            if k == i or k == j:
                continue
            if directed:
                s += adj[j, k] * adj[i, k] + adj[k, i] * adj[k, j]
                s += adj[i, k] * adj[k, j] + adj[j, k] * adj[k, i]
            else:
                s += adj[i, k] * adj[j, k]
        return float(s)
    if code == 3:
        return 1.0 if attr_codes[i] == attr_codes[j] else 0.0
    if code == 4:
        di = 0
        dj = 0
        for k in range(n):
            if k != j:
                di += adj[i, k]
                if directed:
                    di += adj[k, i]
            if k != i:
                dj += adj[j, k]
                if directed:
                    dj += adj[k, j]
        if directed:
            # arc j->i stays in both degrees; only i->j is excluded
            di += adj[j, i]
            dj += adj[j, i]
        out = 0.0
        if di == 0:
            out -= 1.0
        if dj == 0:
            out -= 1.0
        return out
    return np.nan


def _attr_codes(attrs: NodalAttributes | None, n: int) -> np.ndarray:
    return attrs.codes() if attrs is not None else np.zeros(n, dtype=np.int64)


def change_statistic(
    y: NetworkSnapshot, dyad, kind: Term, attrs: NodalAttributes | None = None
) -> float:
    """Change in ``kind`` when ``dyad`` flips from 0 to 1, rest of ``y`` fixed.

    ``dyad`` is a ``DyadIndex`` or an ``(i, j)`` pair of 0-based node indices.
    """
    kind = Term.parse(kind) if isinstance(kind, str) else kind
    check_term(kind, y.directed, attrs)
    i, j = (dyad.i, dyad.j) if hasattr(dyad, "ordinal") else dyad
    if i == j:
        raise NetworkError("diagonal dyads are not allowed")
    return _delta_one(
        y.adjacency, int(i), int(j), kind.code, _attr_codes(attrs, y.n), y.directed
    )


def change_stat_matrix(
    adj: np.ndarray,
    terms: tuple[Term, ...],
    directed: bool,
    attrs: NodalAttributes | None = None,
) -> np.ndarray:
    """E x len(terms) change statistics of every dyad of ``adj`` in canonical order."""
    n = adj.shape[0]
    rows, cols = dyad_arrays(n, directed)
    a = adj.astype(np.float64)
    out = np.empty((rows.size, len(terms)))
    a2 = None
    for col, term in enumerate(terms):
        if term is Term.EDGES:
            out[:, col] = 1.0
        elif term is Term.MUTUAL:
            out[:, col] = a[cols, rows]
        elif term is Term.TRIANGLES:
            if a2 is None:
                a2 = a @ a
            if directed:
                shared = a @ a.T + a.T @ a + a2 + a2.T
                out[:, col] = shared[rows, cols]
            else:
                out[:, col] = a2[rows, cols]
        elif term is Term.HOMOPHILY:
            codes = attrs.codes()
            out[:, col] = codes[rows] == codes[cols]
        elif term is Term.ISOLATES:
            deg = a.sum(axis=1) + (a.sum(axis=0) if directed else 0.0)
            own = a[rows, cols]
            out[:, col] = -((deg[rows] - own) == 0).astype(float) - (
                (deg[cols] - own) == 0
            ).astype(float)
        else:
            raise AssertionError(term)
    return out


@dataclass(frozen=True)
class ModelDesign:
    """Compressed logistic design for one model across all transitions.

    Rows of the per-transition E x p block that share the same change
    statistics and response are merged into one row with a count weight, so
    every likelihood quantity is an exact weighted sum. Arrays are padded to
    a common row count ``m``; padding rows have weight 0.
    """

    X: np.ndarray  # (tau, m, p)
    y: np.ndarray  # (tau, m)
    w: np.ndarray  # (tau, m)


def _compress(delta: np.ndarray, resp: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    stacked = np.column_stack([delta, resp])
    uniq, counts = np.unique(stacked, axis=0, return_counts=True)
    return uniq[:, :-1], uniq[:, -1], counts.astype(np.float64)


def _pad(parts, p):
    tau = len(parts)
    m = max(part[0].shape[0] for part in parts)
    X = np.zeros((tau, m, p))
    y = np.zeros((tau, m))
    w = np.zeros((tau, m))
    for t, (xt, yt, wt) in enumerate(parts):
        k = xt.shape[0]
        X[t, :k] = xt
        y[t, :k] = yt
        w[t, :k] = wt
    return ModelDesign(X, y, w)


@dataclass(frozen=True, eq=False)
class ChangeStatBlocks:
    """Change statistics and responses for transitions t = 2..T.

    The full E x p blocks are recomputed on request from the series; the
    solver only touches the compressed designs.
    """

    series: NetworkSeries
    spec: StatisticSpec
    formation: ModelDesign
    dissolution: ModelDesign

    @property
    def tau(self) -> int:
        return self.series.T - 1

    @property
    def n_dyads(self) -> int:
        return self.series.n_dyads

    @property
    def p1(self) -> int:
        return self.spec.p1

    @property
    def p2(self) -> int:
        return self.spec.p2

    @property
    def p(self) -> int:
        return self.spec.p

    def _nets(self, t: int) -> tuple[np.ndarray, np.ndarray]:
        if not 2 <= t <= self.series.T:
            raise IndexError(f"transition t must be in [2, {self.series.T}], got {t}")
        prev = self.series.adjacency[t - 2]
        curr = self.series.adjacency[t - 1]
        return np.maximum(prev, curr), np.minimum(prev, curr)

    def formation_block(self, t: int) -> np.ndarray:
        """E x p1 change statistics on the formation network of transition ``t``."""
        plus, _ = self._nets(t)
        s = self.series
        return change_stat_matrix(plus, self.spec.formation, s.directed, s.attributes)

    def dissolution_block(self, t: int) -> np.ndarray:
        _, minus = self._nets(t)
        s = self.series
        return change_stat_matrix(minus, self.spec.dissolution, s.directed, s.attributes)

    def responses(self, t: int) -> tuple[np.ndarray, np.ndarray]:
        """Dyad values of the formation and dissolution networks at ``t``."""
        plus, minus = self._nets(t)
        rows, cols = dyad_arrays(self.series.n, self.series.directed)
        return plus[rows, cols].astype(np.float64), minus[rows, cols].astype(np.float64)


def build_change_stat_blocks(series: NetworkSeries, spec: StatisticSpec) -> ChangeStatBlocks:
    spec.validate(series.directed, series.attributes)
    rows, cols = dyad_arrays(series.n, series.directed)
    form_parts, diss_parts = [], []
    adj = series.adjacency
    for t in range(1, series.T):
        plus = np.maximum(adj[t - 1], adj[t])
        minus = np.minimum(adj[t - 1], adj[t])
        d_plus = change_stat_matrix(plus, spec.formation, series.directed, series.attributes)
        d_minus = change_stat_matrix(minus, spec.dissolution, series.directed, series.attributes)
        form_parts.append(_compress(d_plus, plus[rows, cols]))
        diss_parts.append(_compress(d_minus, minus[rows, cols]))
    return ChangeStatBlocks(
        series, spec, _pad(form_parts, spec.p1), _pad(diss_parts, spec.p2)
    )
