import numpy as np
import pytest
from conftest import complete, graph_dataset, make_graph, path, random_graph
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import diameter, fragment_oracle, is_connected

from graphtax.errors import InputError
from graphtax.graph import connected_components, degrees
from graphtax.perturb import (CANONICAL_SUITE, IDENTITY, Kind, Perturbation, SeedPolicy, apply,
                              fragment_assignment, fragmented, fully_connected, no_edges,
                              no_node_features, node_degree_features, parse_suite)


@st.composite
def graphs(draw, max_n=8):
    n = draw(st.integers(0, max_n))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    mask = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    return make_graph(n, [p for p, keep in zip(pairs, mask) if keep])


def edge_set(g):
    return {tuple(e) for e in g.edges.tolist()}


def test_names_roundtrip():
    for p in CANONICAL_SUITE:
        assert Perturbation.parse(p.name) == p
    p = Perturbation(Kind.FRAGMENTED, 2, SeedPolicy.HIGHEST_DEGREE)
    assert p.name == "fragmented-2:highest-degree"
    assert Perturbation.parse(p.name) == p
    for bad in ("fragmented", "fragmented-0", "no-edges-3", "bogus"):
        with pytest.raises(InputError):
            Perturbation.parse(bad)


def test_parse_suite_rules():
    assert parse_suite(["identity", "no-edges"])[1].kind is Kind.NO_EDGES
    for bad in ([], ["no-edges"], ["identity", "identity"]):
        with pytest.raises(InputError):
            parse_suite(bad)


def test_identity_and_no_edges_on_dataset(rng):
    d = graph_dataset([random_graph(rng, 6, label=i % 2) for i in range(4)])
    assert apply(IDENTITY, d) is d
    assert all(g.num_edges == 0 for g in apply(Perturbation(Kind.NO_EDGES), d).graphs)


def test_fragmented_with_k_n_keeps_connected_graph():
    g = path(6)
    assert fragmented(g, 6) == g


def test_no_node_features_examples(rng):
    g = make_graph(5, [(0, 1)], features=rng.normal(size=(5, 18)))
    h = no_node_features(g)
    assert h.features.shape == (5, 1) and np.all(h.features == 1.0)
    assert no_node_features(h) == h
    empty = no_node_features(make_graph(0, features=np.zeros((0, 3))))
    assert empty.n == 0 and empty.features.shape == (0, 1)


def test_node_degree_examples():
    (p3,) = node_degree_features(graph_dataset([path(3, label=0)], num_classes=1)).graphs
    assert p3.features.tolist() == [[1, 0], [0, 1], [1, 0]]
    (k3,) = node_degree_features(graph_dataset([complete(3, label=0)], num_classes=1)).graphs
    assert k3.features.tolist() == [[1], [1], [1]]
    once = node_degree_features(graph_dataset([path(3, label=0), complete(4, label=1)]))
    assert node_degree_features(once).graphs == once.graphs


def test_node_degree_vocabulary_is_dataset_wide():
    d = node_degree_features(graph_dataset([path(3, label=0), complete(4, label=1)]))
    # degrees seen: 1, 2, 3
    assert d.graphs[0].features.shape == (3, 3)
    assert d.graphs[1].features.tolist() == [[0, 0, 1]] * 4


def test_fully_connected_examples():
    assert fully_connected(make_graph(5)).num_edges == 10
    assert fully_connected(make_graph(1)).num_edges == 0
    g = path(4)
    assert no_edges(fully_connected(g)) == no_edges(g)
    assert fully_connected(fully_connected(g)) == fully_connected(g)


def test_fragmented_p5_example():
    g = path(5)
    comp = fragment_assignment(g, 2)
    assert connected_components(fragmented(g, 2)) == [[0, 1], [2, 3], [4]]
    assert len(set(comp.tolist())) == 3
    assert edge_set(fragmented(g, 2)) == {(0, 1), (2, 3)}


def test_fragmented_highest_degree_policy():
    star = make_graph(5, [(0, 4), (1, 4), (2, 4), (3, 4)])
    assert fragmented(star, 2, SeedPolicy.HIGHEST_DEGREE) == star
    assert fragmented(star, 2, SeedPolicy.LOWEST_ID).num_edges == 1


def test_fragmented_rejects_k0():
    with pytest.raises(InputError):
        fragmented(path(3), 0)


@settings(max_examples=200, deadline=None)
@given(graphs(), st.integers(1, 5))
def test_fragmentation_matches_floyd_warshall_oracle(g, k):
    comp, kept = fragment_oracle(g.n, g.edges.tolist(), k)
    assert edge_set(fragmented(g, k)) == kept
    ours = fragment_assignment(g, k).tolist()
    assert ours == comp


@settings(max_examples=200, deadline=None)
@given(graphs(), st.integers(1, 5))
def test_fragments_are_connected_and_small(g, k):
    h = fragmented(g, k)
    comp = fragment_assignment(g, k)
    for c in set(comp.tolist()):
        members = np.flatnonzero(comp == c).tolist()
        assert diameter(h.n, h.edges.tolist(), members) <= 2 * (k - 1)
    assert fragmented(g, 1) == no_edges(g)
    if is_connected(g.n, g.edges.tolist()):
        assert fragmented(g, g.n + 1) == g


@settings(max_examples=100, deadline=None)
@given(graphs(), st.sampled_from(CANONICAL_SUITE))
def test_perturbations_are_idempotent(g, p):
    d = graph_dataset([g.replace(graph_label=0)], num_classes=1)
    once = apply(p, d)
    assert apply(p, once).graphs == once.graphs


@settings(max_examples=100, deadline=None)
@given(graphs())
def test_structure_perturbations_keep_features_and_degree_keeps_edges(g):
    d = graph_dataset([g.replace(graph_label=0)], num_classes=1)
    for p in CANONICAL_SUITE:
        (h,) = apply(p, d).graphs
        assert h.n == g.n
        if p.kind in (Kind.NO_EDGES, Kind.FULLY_CONNECTED, Kind.FRAGMENTED):
            assert np.array_equal(h.features, g.features)
            assert edge_set(h) <= edge_set(fully_connected(g))
        else:
            assert edge_set(h) == edge_set(g)
    (deg,) = apply(Perturbation(Kind.NODE_DEGREE), d).graphs
    if g.n:
        assert np.all(deg.features.sum(axis=1) == 1)
        assert len(set(map(tuple, deg.features.tolist()))) == len(set(degrees(g).tolist()))
