import json

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, strategies as st

from fullspec.errors import DomainError
from fullspec.graph import (
    Graph, complete_graph, cycle_graph, disjoint_union, frucht_graph, path_graph, random_graph,
)
from fullspec.refinement import (
    LOCAL2, WL1, atp, canonical_ids, distinguishable, local2_refine, partition_refines,
    quantize_labels, same_partition, wl1_refine,
)

from conftest import graphs


# ---- dictionary-based reference refinements ------------------------------


def _relabel(sigs):
    table = {}
    return [table.setdefault(s, len(table)) for s in sigs]


def ref_wl1(g, init=None, rounds=None):
    nbrs = g.neighbors()
    init = init if init is not None else (g.labels or [0] * g.n)
    colors = _relabel([(x,) for x in init])
    hist = [colors]
    for _ in range(rounds if rounds is not None else g.n):
        new = _relabel([(colors[v], tuple(sorted(colors[u] for u in nbrs[v]))) for v in range(g.n)])
        if len(set(new)) == len(set(colors)):
            break
        colors = new
        hist.append(colors)
    return colors, hist


def ref_local2(g, init=None, rounds=None):
    nbrs = g.neighbors()
    n = g.n
    lab = init if init is not None else (g.labels or [0] * n)
    pairs = [(u, v) for u in range(n) for v in range(n)]
    colors = dict(zip(pairs, _relabel([(lab[u], lab[v], atp(g, u, v)) for u, v in pairs])))
    hist = [[colors[p] for p in pairs]]
    for _ in range(rounds if rounds is not None else n * n):
        sigs = [(colors[(u, v)],
                 tuple(sorted(colors[(w, v)] for w in nbrs[u])),
                 tuple(sorted(colors[(u, w)] for w in nbrs[v]))) for u, v in pairs]
        new = dict(zip(pairs, _relabel(sigs)))
        if len(set(new.values())) == len(set(colors.values())):
            break
        colors = new
        hist.append([colors[p] for p in pairs])
    return [colors[p] for p in pairs], hist


# ---- examples ------------------------------------------------------------


def test_atp_cases():
    g = path_graph(3)
    assert atp(g, 1, 1) == (1, 0)
    assert atp(g, 0, 1) == (0, 1)
    assert atp(g, 0, 2) == (0, 0)
    with pytest.raises(DomainError):
        atp(g, 0, 3)


@pytest.mark.parametrize("g", [cycle_graph(7), complete_graph(5), frucht_graph()],
                         ids=["cycle", "complete", "frucht"])
def test_regular_graphs_single_colour(g):
    col, _ = wl1_refine(g)
    assert set(col.colors) == {0} and col.round == 0 and col.stable


def test_discrete_initial_labels_stable_at_round_zero():
    col, hist = wl1_refine(complete_graph(3).with_labels((1, 2, 3)))
    assert col.colors == (0, 1, 2) and col.round == 0 and len(hist) == 1


def test_k1_pair_colouring():
    col, _ = local2_refine(Graph(1))
    assert col.colors == (0,) and col.n == 1


def test_p2_pair_partition():
    col, _ = local2_refine(path_graph(2))
    m = col.matrix()
    assert m[0, 0] == m[1, 1] and m[0, 1] == m[1, 0] and m[0, 0] != m[0, 1]


def test_c6_vs_two_triangles():
    c6 = cycle_graph(6)
    two_c3 = disjoint_union(cycle_graph(3), cycle_graph(3))
    assert wl1_refine(c6)[0].histogram() == wl1_refine(two_c3)[0].histogram()
    assert local2_refine(c6)[0].histogram() != local2_refine(two_c3)[0].histogram()
    assert not distinguishable(c6, two_c3, WL1)
    assert distinguishable(c6, two_c3, LOCAL2)


def test_different_sizes_distinguishable():
    assert distinguishable(path_graph(3), path_graph(4), WL1)
    assert distinguishable(path_graph(3), path_graph(4), LOCAL2)


def test_isomorphic_copies_not_distinguishable():
    g = random_graph(8, 0.4, seed=5)
    h = g.relabel([3, 7, 0, 1, 6, 2, 5, 4])
    assert not distinguishable(g, h, WL1)
    assert not distinguishable(g, h, LOCAL2)


def test_path_wl1_rounds():
    col, hist = wl1_refine(path_graph(5))
    # ends, next-to-ends, middle
    assert col.colors == (0, 1, 2, 1, 0)
    assert col.round == 2 and len(hist) == 3


def test_max_rounds_truncates():
    col, hist = wl1_refine(path_graph(5), max_rounds=1)
    assert col.round == 1 and not col.stable and len(hist) == 2
    with pytest.raises(DomainError):
        wl1_refine(path_graph(3), max_rounds=-1)


def test_float_labels_quantized():
    q = quantize_labels([0.1 + 0.2, 0.3, -0.0, 0.0], 4)
    assert q[0, 0] == q[1, 0] and q[2, 0] == q[3, 0]
    col, _ = wl1_refine(path_graph(2), init=[0.1 + 0.2, 0.3])
    assert col.colors == (0, 0)
    with pytest.raises(DomainError):
        quantize_labels(["a", "b"], 2)


def test_canonical_ids_first_appearance():
    np.testing.assert_array_equal(canonical_ids([5, 3, 5, 9, 3]), [0, 1, 0, 2, 1])


def test_coloring_json():
    col, _ = wl1_refine(path_graph(3))
    data = json.loads(json.dumps(col.to_json()))
    assert data == {"round": 1, "colors": [0, 1, 0], "histogram": {"0": 2, "1": 1}}


# ---- cross-checks and properties -----------------------------------------


@given(graphs(n_min=1, n_max=9, labelled=True, k=2))
def test_wl1_matches_reference(g):
    col, hist = wl1_refine(g)
    ref, ref_hist = ref_wl1(g)
    assert same_partition(col.colors, ref)
    assert len(hist) == len(ref_hist)
    for a, b in zip(hist, ref_hist):
        assert same_partition(a, b)


@given(graphs(n_min=1, n_max=6, labelled=True, k=2))
def test_local2_matches_reference(g):
    col, hist = local2_refine(g)
    ref, ref_hist = ref_local2(g)
    assert same_partition(col.colors, ref)
    assert len(hist) == len(ref_hist)


@given(graphs(n_min=1, n_max=7))
def test_rounds_refine_monotonically(g):
    for hist in (wl1_refine(g)[1], local2_refine(g)[1]):
        for prev, nxt in zip(hist, hist[1:]):
            assert partition_refines(nxt, prev)
            assert len(set(nxt)) > len(set(prev))


@given(graphs(n_min=1, n_max=8))
def test_stabilisation_bounds(g):
    assert wl1_refine(g)[0].round <= g.n
    assert local2_refine(g)[0].round <= g.n * g.n


@given(graphs(n_min=1, n_max=7, labelled=True), st.randoms(use_true_random=False))
def test_permutation_invariance(g, rnd):
    perm = list(range(g.n))
    rnd.shuffle(perm)
    h = g.relabel(perm)
    cg, ch = wl1_refine(g)[0], wl1_refine(h)[0]
    assert same_partition(cg.colors, [ch.colors[perm[v]] for v in range(g.n)])
    pg, ph = local2_refine(g)[0].matrix(), local2_refine(h)[0].matrix()
    assert same_partition(pg, ph[np.ix_(perm, perm)])
    assert not distinguishable(g, h, WL1) and not distinguishable(g, h, LOCAL2)


@given(graphs(n_min=1, n_max=12))
def test_local2_diagonal_refines_wl1(g):
    node = wl1_refine(g)[0].colors
    diag = np.diag(local2_refine(g)[0].matrix())
    assert partition_refines(diag, node)


@given(graphs(n_min=2, n_max=8), graphs(n_min=2, n_max=8))
def test_wl1_distinguishability_matches_networkx(g1, g2):
    if g1.n != g2.n:
        return
    def nxg(g):
        G = nx.Graph()
        G.add_nodes_from(range(g.n))
        G.add_edges_from(g.edges)
        return G
    h1 = nx.weisfeiler_lehman_graph_hash(nxg(g1), iterations=g1.n)
    h2 = nx.weisfeiler_lehman_graph_hash(nxg(g2), iterations=g2.n)
    assert distinguishable(g1, g2, WL1) == (h1 != h2)
