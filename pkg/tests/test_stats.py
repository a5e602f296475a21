import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stergmcpd.network import DyadIndex, NetworkError, NetworkSeries, NetworkSnapshot, NodalAttributes
from stergmcpd.stats import (
    StatisticSpec,
    Term,
    build_change_stat_blocks,
    change_stat_matrix,
    change_statistic,
    network_statistic,
)

from conftest import random_adjacency, random_series_array
from oracles import count_statistic, dyads, toggle_change, transition_rows

KINDS = ["edges", "mutual", "triangles", "homophily", "isolates"]


def test_term_parsing():
    assert Term.parse("edge") is Term.EDGES
    assert Term.parse("nodematch") is Term.HOMOPHILY
    assert Term.parse("Triangle") is Term.TRIANGLES
    with pytest.raises(ValueError):
        Term.parse("kstar")


def test_spec_parse_and_str():
    spec = StatisticSpec.parse("form=edges,mutual;diss=edges")
    assert spec.formation == (Term.EDGES, Term.MUTUAL)
    assert spec.dissolution == (Term.EDGES,)
    assert (spec.p1, spec.p2, spec.p) == (2, 1, 3)
    assert StatisticSpec.parse(str(spec)) == spec
    both = StatisticSpec.parse("edges,triangles")
    assert both.formation == both.dissolution


def test_spec_validation():
    spec = StatisticSpec(("edges", "mutual"), ("edges",))
    with pytest.raises(NetworkError):
        spec.validate(directed=False, attrs=None)
    with pytest.raises(NetworkError):
        StatisticSpec(("homophily",), ("edges",)).validate(True, None)
    with pytest.raises(ValueError):
        StatisticSpec((), ("edges",))


def test_empty_graph_counts():
    y = NetworkSnapshot(np.zeros((5, 5), dtype=np.uint8))
    assert network_statistic(y, "edges") == 0
    assert network_statistic(y, "mutual") == 0
    assert network_statistic(y, "triangles") == 0
    assert network_statistic(y, "isolates") == 5


def test_directed_three_cycle():
    y = NetworkSnapshot.from_edges(3, [(0, 1), (1, 2), (2, 0)])
    assert network_statistic(y, "triangles") == 1
    assert network_statistic(y, "mutual") == 0


@pytest.mark.parametrize("directed", [True, False])
def test_statistics_match_naive_recount(rng, directed):
    labels = tuple(rng.choice(["a", "b"], size=6))
    attrs = NodalAttributes(labels)
    for _ in range(10):
        a = random_adjacency(rng, 6, directed, density=0.4)
        y = NetworkSnapshot(a, directed)
        for kind in KINDS:
            if kind == "mutual" and not directed:
                continue
            expected = count_statistic(a, kind, directed, labels)
            assert network_statistic(y, kind, attrs) == expected, kind


def test_edges_change_is_one(rng):
    y = NetworkSnapshot(random_adjacency(rng, 6))
    for i, j in dyads(6, True):
        assert change_statistic(y, (i, j), "edges") == 1.0


def test_mutual_change_is_reverse_arc(rng):
    a = random_adjacency(rng, 6, density=0.5)
    y = NetworkSnapshot(a)
    for i, j in dyads(6, True):
        assert change_statistic(y, (i, j), "mutual") == a[j, i]


@settings(max_examples=60, deadline=None)
@given(
    st.integers(3, 7),
    st.booleans(),
    st.sampled_from(KINDS),
    st.floats(0.0, 1.0),
    st.integers(0, 2**31),
)
def test_change_statistic_matches_toggle(n, directed, kind, density, seed):
    if kind == "mutual" and not directed:
        return
    rng = np.random.default_rng(seed)
    a = random_adjacency(rng, n, directed, density)
    labels = tuple(rng.integers(0, 2, size=n))
    y = NetworkSnapshot(a, directed)
    attrs = NodalAttributes(labels)
    i, j = dyads(n, directed)[rng.integers(0, len(dyads(n, directed)))]
    assert change_statistic(y, (i, j), kind, attrs) == toggle_change(a, i, j, kind, directed, labels)


def test_change_statistic_accepts_dyad_index():
    y = NetworkSnapshot.from_edges(3, [(1, 0)])
    assert change_statistic(y, DyadIndex(0, 0, 1), "mutual") == 1.0
    with pytest.raises(NetworkError):
        change_statistic(y, (1, 1), "edges")


@pytest.mark.parametrize("directed", [True, False])
def test_change_stat_matrix_matches_scalar(rng, directed):
    labels = tuple(rng.integers(0, 3, size=7))
    attrs = NodalAttributes(labels)
    terms = tuple(Term.parse(k) for k in KINDS if directed or k != "mutual")
    for _ in range(5):
        a = random_adjacency(rng, 7, directed, density=rng.random())
        M = change_stat_matrix(a, terms, directed, attrs)
        y = NetworkSnapshot(a, directed)
        for r, (i, j) in enumerate(dyads(7, directed)):
            for c, term in enumerate(terms):
                assert M[r, c] == change_statistic(y, (i, j), term, attrs)


def test_blocks_edges_only():
    arr = np.zeros((3, 3, 3), dtype=np.uint8)
    arr[1, 0, 1] = arr[1, 1, 0] = 1
    series = NetworkSeries(arr, directed=False)
    b = build_change_stat_blocks(series, StatisticSpec(("edges",), ("edges",)))
    assert b.tau == 2
    for t in (2, 3):
        assert b.formation_block(t).shape == (3, 1)
        assert np.all(b.formation_block(t) == 1)
        assert np.all(b.dissolution_block(t) == 1)


def test_blocks_against_toggle_oracle(rng):
    arr = random_series_array(rng, 3, 4, density=0.5)
    series = NetworkSeries(arr)
    spec = StatisticSpec(("edges", "mutual"), ("edges",))
    b = build_change_stat_blocks(series, spec)
    for t in (2, 3):
        Xf, yf = transition_rows(arr, t, ["edges", "mutual"], True, model="formation")
        Xd, yd = transition_rows(arr, t, ["edges"], True, model="dissolution")
        resp_f, resp_d = b.responses(t)
        np.testing.assert_array_equal(b.formation_block(t), Xf)
        np.testing.assert_array_equal(b.dissolution_block(t), Xd)
        np.testing.assert_array_equal(resp_f, yf)
        np.testing.assert_array_equal(resp_d, yd)


def test_compressed_rows_preserve_counts(rng):
    arr = random_series_array(rng, 5, 8, density=0.4)
    series = NetworkSeries(arr)
    spec = StatisticSpec(("edges", "mutual", "triangles"), ("edges", "isolates"))
    b = build_change_stat_blocks(series, spec)
    assert b.n_dyads == 56
    np.testing.assert_array_equal(b.formation.w.sum(axis=1), 56)
    np.testing.assert_array_equal(b.dissolution.w.sum(axis=1), 56)
    # weighted sums of the compressed rows reproduce the full block sums
    for t in range(2, 6):
        full = b.formation_block(t)
        r = t - 2
        np.testing.assert_allclose(
            (b.formation.w[r][:, None] * b.formation.X[r]).sum(axis=0), full.sum(axis=0)
        )


def test_blocks_depend_only_on_pairs(rng):
    arr = random_series_array(rng, 6, 6, density=0.4)
    spec = StatisticSpec(("edges", "triangles"), ("edges", "mutual"))
    full = build_change_stat_blocks(NetworkSeries(arr), spec)
    part = build_change_stat_blocks(NetworkSeries(arr[:4]), spec)
    for t in (2, 3, 4):
        np.testing.assert_array_equal(full.formation_block(t), part.formation_block(t))
        np.testing.assert_array_equal(full.dissolution_block(t), part.dissolution_block(t))


def test_relabeling_invariance(rng):
    arr = random_series_array(rng, 3, 6, density=0.4)
    labels = tuple(rng.integers(0, 2, size=6))
    spec = StatisticSpec(("edges", "mutual", "triangles", "homophily", "isolates"), ("edges",))
    perm = rng.permutation(6)
    permuted = arr[:, perm][:, :, perm]
    b1 = build_change_stat_blocks(NetworkSeries(arr, attributes=NodalAttributes(labels)), spec)
    b2 = build_change_stat_blocks(
        NetworkSeries(permuted, attributes=NodalAttributes(tuple(labels[k] for k in perm))), spec
    )
    for t in (2, 3):
        rows1 = {tuple(r) for r in b1.formation_block(t)}
        rows2 = {tuple(r) for r in b2.formation_block(t)}
        assert rows1 == rows2
        np.testing.assert_allclose(
            np.sort(b1.formation_block(t), axis=0), np.sort(b2.formation_block(t), axis=0)
        )


def test_sbm_shapes():
    from stergmcpd.simulate import SbmScenario, simulate_sbm_series

    series = simulate_sbm_series(SbmScenario(seed=1))
    b = build_change_stat_blocks(series, StatisticSpec(("edges", "mutual"), ("edges", "mutual")))
    assert b.tau == 99 and b.n_dyads == 2450
    assert b.formation_block(2).shape == (2450, 2)
    assert 2 * b.tau * b.n_dyads == 2 * 99 * 2450
