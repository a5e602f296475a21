"""Ground-truth dynamic network generators.

Random streams come from numpy's PCG64 through ``SeedSequence``: the
scenario seed spawns one child stream per time point, so a given seed
reproduces the same series on every platform.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .network import NetworkSeries, NodalAttributes, dyad_arrays
from .stats import StatisticSpec, _attr_codes, _delta_one

DEFAULT_CHANGE_POINTS = (26, 51, 76)


def _check_change_points(change_points, T: int) -> tuple[int, ...]:
    cps = tuple(int(c) for c in change_points)
    if list(cps) != sorted(set(cps)):
        raise ValueError(f"change points must be strictly increasing, got {cps}")
    if cps and (cps[0] <= 1 or cps[-1] > T):
        raise ValueError(f"change points must lie in (1, {T}], got {cps}")
    return cps


def segment_index(T: int, change_points) -> np.ndarray:
    """0-based segment label of each time point 1..T."""
    t = np.arange(1, T + 1)
    return np.searchsorted(np.asarray(change_points, dtype=int), t, side="right")


def _streams(seed: int, count: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


# --- Scenario 1: stochastic block model with persistence ----------------------


@dataclass(frozen=True)
class SbmScenario:
    n: int = 50
    T: int = 100
    change_points: tuple[int, ...] = DEFAULT_CHANGE_POINTS
    rho: float = 0.5
    n_blocks: int = 3
    p_within: float = 0.5
    p_between: float = 0.3
    q_within: float = 0.45
    q_between: float = 0.2
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "change_points", _check_change_points(self.change_points, self.T))
        if not 0 <= self.rho < 1:
            raise ValueError(f"rho must be in [0, 1), got {self.rho}")
        for name in ("p_within", "p_between", "q_within", "q_between"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name} must be a probability, got {v}")
        if self.n < max(2, self.n_blocks):
            raise ValueError("too few nodes for the block structure")

    def blocks(self) -> np.ndarray:
        """Block label per node; blocks are contiguous and as even as possible."""
        return np.concatenate(
            [np.full(len(part), b) for b, part in enumerate(np.array_split(np.arange(self.n), self.n_blocks))]
        )

    def probability_matrices(self) -> tuple[np.ndarray, np.ndarray]:
        lab = self.blocks()
        same = lab[:, None] == lab[None, :]
        P = np.where(same, self.p_within, self.p_between)
        Q = np.where(same, self.q_within, self.q_between)
        np.fill_diagonal(P, 0.0)
        np.fill_diagonal(Q, 0.0)
        return P, Q

    def edge_probabilities(self, t: int) -> np.ndarray:
        """E^t: regime P on even segments, Q on odd ones (t is 1-based)."""
        P, Q = self.probability_matrices()
        seg = segment_index(self.T, self.change_points)[t - 1]
        return P if seg % 2 == 0 else Q


def simulate_sbm_series(sc: SbmScenario) -> NetworkSeries:
    P, Q = sc.probability_matrices()
    seg = segment_index(sc.T, sc.change_points)
    rngs = _streams(sc.seed, sc.T)
    out = np.zeros((sc.T, sc.n, sc.n), dtype=np.uint8)
    rho = sc.rho
    off_diag = ~np.eye(sc.n, dtype=bool)
    for t in range(sc.T):
        E = P if seg[t] % 2 == 0 else Q
        if t == 0:
            prob = E
        else:
            prob = np.where(out[t - 1] == 1, rho * (1 - E) + E, (1 - rho) * E)
        draw = rngs[t].random((sc.n, sc.n)) < prob
        out[t] = draw & off_diag
    return NetworkSeries(out, directed=True)


# --- Scenario 2: piecewise time-homogeneous STERGM ----------------------------


@numba.njit(cache=True)
def _mh_constrained(adj, free_i, free_j, picks, uniforms, theta, codes, attr_codes, directed):
    # Metropolis single-dyad toggles restricted to the ``free`` dyads; adj is
    # modified in place.
    for step in range(picks.shape[0]):
        k = picks[step]
        i = free_i[k]
        j = free_j[k]
        eta = 0.0
        for c in range(codes.shape[0]):
            eta += theta[c] * _delta_one(adj, i, j, codes[c], attr_codes, directed)
        if adj[i, j] == 1:
            eta = -eta
        if np.log(uniforms[step]) < eta:
            v = 1 - adj[i, j]
            adj[i, j] = v
            if not directed:
                adj[j, i] = v


def sample_constrained_ergm(
    start: np.ndarray,
    free_mask: np.ndarray,
    theta,
    terms,
    directed: bool,
    attrs: NodalAttributes | None,
    n_proposals: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Metropolis sampler for an ERGM whose only toggleable dyads are ``free_mask``.

    ``free_mask`` is evaluated on canonical dyads; all other dyads keep their
    value from ``start``.
    """
    n = start.shape[0]
    rows, cols = dyad_arrays(n, directed)
    free = free_mask[rows, cols].astype(bool)
    adj = np.array(start, dtype=np.uint8, copy=True)
    if not free.any() or n_proposals <= 0:
        return adj
    free_i = rows[free].astype(np.int64)
    free_j = cols[free].astype(np.int64)
    picks = rng.integers(0, free_i.size, size=n_proposals)
    uniforms = rng.random(n_proposals)
    codes = np.array([t.code for t in terms], dtype=np.int64)
    _mh_constrained(
        adj, free_i, free_j, picks, uniforms, np.asarray(theta, dtype=np.float64),
        codes, _attr_codes(attrs, n), directed,
    )
    return adj


@dataclass(frozen=True)
class StergmScenario:
    """Piecewise STERGM: segment k uses ``regimes[k % len(regimes)]``.

    Each regime is a (formation, dissolution) pair of parameter vectors
    matching ``spec``.
    """

    spec: StatisticSpec
    regimes: tuple
    n: int = 50
    T: int = 100
    change_points: tuple[int, ...] = DEFAULT_CHANGE_POINTS
    directed: bool = True
    attributes: NodalAttributes | None = None
    mh_sweeps: int = 10
    initial_density: float = 0.1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "change_points", _check_change_points(self.change_points, self.T))
        regimes = []
        for form, diss in self.regimes:
            form = np.asarray(form, dtype=float)
            diss = np.asarray(diss, dtype=float)
            if form.shape != (self.spec.p1,) or diss.shape != (self.spec.p2,):
                raise ValueError("regime parameter lengths do not match the statistic spec")
            if not (np.isfinite(form).all() and np.isfinite(diss).all()):
                raise ValueError("regime parameters must be finite")
            regimes.append((tuple(form), tuple(diss)))
        if not regimes:
            raise ValueError("need at least one regime")
        object.__setattr__(self, "regimes", tuple(regimes))
        self.spec.validate(self.directed, self.attributes)
        if self.mh_sweeps < 0:
            raise ValueError("mh_sweeps must be non-negative")

    def parameters_at(self, t: int) -> tuple[tuple, tuple]:
        """Regime governing the transition into 1-based time ``t``."""
        seg = segment_index(self.T, self.change_points)[t - 1]
        return self.regimes[seg % len(self.regimes)]


def simulate_stergm_series(sc: StergmScenario) -> NetworkSeries:
    n = sc.n
    rngs = _streams(sc.seed, sc.T)
    rows, cols = dyad_arrays(n, sc.directed)
    out = np.zeros((sc.T, n, n), dtype=np.uint8)
    first = np.zeros((n, n), dtype=np.uint8)
    first[rows, cols] = rngs[0].random(rows.size) < sc.initial_density
    if not sc.directed:
        first = first | first.T
    out[0] = first
    for t in range(1, sc.T):
        prev = out[t - 1]
        form, diss = sc.parameters_at(t + 1)
        rng = rngs[t]
        absent = prev == 0
        present = ~absent
        n_form = sc.mh_sweeps * int(absent[rows, cols].sum())
        n_diss = sc.mh_sweeps * int(present[rows, cols].sum())
        plus = sample_constrained_ergm(
            prev, absent, form, sc.spec.formation, sc.directed, sc.attributes, n_form, rng
        )
        minus = sample_constrained_ergm(
            prev, present, diss, sc.spec.dissolution, sc.directed, sc.attributes, n_diss, rng
        )
        out[t] = np.where(prev == 1, minus, plus)
    return NetworkSeries(out, directed=sc.directed, attributes=sc.attributes)


def scenario2(p_sim: int = 4, **kwargs) -> StergmScenario:
    """STERGM scenario with the published segment parameters.

    Term order per model is edges, mutual[, triangles][, homophily]. For
    ``p_sim == 8`` node genders are drawn as a balanced random labelling
    from ``seed``.
    """
    base = ["edges", "mutual"]
    if p_sim == 4:
        terms = base
        regimes = (((-1, -2), (-1, -2)), ((-1, 1), (-1, -1)))
    elif p_sim == 6:
        terms = base + ["triangles"]
        regimes = (((-2, 2, -2), (-1, 2, 1)), ((-1.5, 1, -1), (2, 1, 1.5)))
    elif p_sim == 8:
        terms = base + ["triangles", "homophily"]
        regimes = (((-2, 2, -2, -1), (-1, 2, 1, 1)), ((-1.5, 1, -1, 1), (2, 1, 1.5, 2)))
    else:
        raise ValueError(f"p_sim must be 4, 6 or 8, got {p_sim}")
    spec = StatisticSpec(tuple(terms), tuple(terms))
    if p_sim == 8 and kwargs.get("attributes") is None:
        n = kwargs.get("n", 50)
        rng = np.random.default_rng([kwargs.get("seed", 0), 8])
        labels = np.array(["F"] * (n // 2) + ["M"] * (n - n // 2))
        kwargs["attributes"] = NodalAttributes(tuple(rng.permutation(labels)))
    return StergmScenario(spec=spec, regimes=regimes, **kwargs)
