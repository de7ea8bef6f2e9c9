import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from url2graph.errors import DataFormatError, DomainError
from url2graph.urlgraph import (GlobalGraph, batch_subgraphs, build_global_graph, count_cooccurrences,
                                induce_subgraph, npmi)

from oracles import cooc_oracle, npmi_oracle, restriction_oracle

a, b, c, d = 2, 3, 4, 5
FOUR = [[a, b], [a, b], [a, c], [d]]


def test_count_examples():
    s = count_cooccurrences([[a, b], [a, b], [a, c]])
    assert (s.count(a), s.count(b), s.pair(a, b), s.pair(b, c), s.n_docs) == (3, 2, 2, 0, 3)
    s = count_cooccurrences([[a, a, b]])
    assert s.count(a) == 1 and s.pair(b, a) == 1


def test_specials_never_counted():
    s = count_cooccurrences([[0, 1, a], [1, 1]])
    assert s.count(0) == s.count(1) == 0 and s.pair(1, a) == 0 and s.n_docs == 2


def test_counts_match_oracle():
    rng = np.random.default_rng(0)
    docs = [rng.integers(0, 30, size=rng.integers(0, 12)).tolist() for _ in range(1000)]
    s = count_cooccurrences(docs, vocab_size=30)
    tok, pair = cooc_oracle(docs)
    assert {k: s.count(k) for k in tok} == tok
    assert s.pair_counts == pair
    for (x, y), n in s.pair_counts.items():
        assert n <= min(s.count(x), s.count(y)) <= s.n_docs


def test_merge_equals_whole():
    docs = [[2, 3, 4], [3, 5], [2, 5, 6], [4]]
    whole = count_cooccurrences(docs, 7)
    left = count_cooccurrences(docs[:2], 7).merge(count_cooccurrences(docs[2:], 7))
    assert left.pair_counts == whole.pair_counts and np.array_equal(left.token_counts, whole.token_counts)


def test_npmi_hand_value():
    s = count_cooccurrences(FOUR)
    assert math.isclose(npmi(s, a, b), math.log(4 / 3) / math.log(2), rel_tol=1e-12)
    assert round(npmi(s, a, b), 3) == 0.415


def test_npmi_limits():
    s = count_cooccurrences([[a, b], [a, b], [c], [d]])
    assert math.isclose(npmi(s, a, b), 1.0)
    # p(a,b) = p(a) p(b) = 1/4
    s = count_cooccurrences([[a, b], [a], [b], [c]])
    assert abs(npmi(s, a, b)) < 1e-15
    s = count_cooccurrences([[a, b], [a, b]])
    assert npmi(s, a, b) == 0.0
    assert npmi(s, a, c) is None
    with pytest.raises(DomainError):
        npmi(s, a, a)


def test_npmi_min_pair_count():
    s = count_cooccurrences(FOUR)
    assert npmi(s, a, b, min_pair_count=3) is None
    assert npmi(s, a, b, min_pair_count=2) is not None


@settings(max_examples=80, deadline=None)
@given(st.lists(st.lists(st.integers(2, 9), max_size=6), min_size=1, max_size=25), st.integers(1, 3))
def test_npmi_matches_oracle_and_range(docs, m):
    s = count_cooccurrences(docs, 10)
    for x in range(2, 10):
        for y in range(x + 1, 10):
            got, want = npmi(s, x, y, m), npmi_oracle(docs, x, y, m)
            assert (got is None) == (want is None)
            if got is not None:
                assert abs(got - want) <= 1e-12
                assert -1 - 1e-12 <= got <= 1 + 1e-12


def test_build_graph_threshold():
    s = count_cooccurrences(FOUR)
    g = build_global_graph(s, 0.2, "word", min_pair_count=1)
    # npmi(a,c) = log(4/3)/log 4 ~ 0.2075 also clears 0.2
    assert g.edge_set() == {(a, b), (a, c)}
    assert g.nodes.tolist() == [a, b, c, d]
    assert build_global_graph(s, 0.21, "word", min_pair_count=1).edge_set() == {(a, b)}
    assert build_global_graph(s, 0.5, "word", min_pair_count=1).edges == []
    perfect = count_cooccurrences([[a, b], [a, b], [c, d], [c]])
    g = build_global_graph(perfect, 1 - 1e-9, "word", min_pair_count=1)
    assert g.edge_set() == {(a, b)}


def test_build_graph_matches_all_pairs_oracle():
    rng = np.random.default_rng(5)
    docs = [rng.integers(2, 15, size=rng.integers(1, 6)).tolist() for _ in range(50)]
    s = count_cooccurrences(docs, 15)
    g = build_global_graph(s, 0.1, "char", min_pair_count=2)
    want = set()
    for x in range(2, 15):
        for y in range(x + 1, 15):
            w = npmi_oracle(docs, x, y, 2)
            if w is not None and w > 0.1:
                want.add((x, y))
    assert g.edge_set() == want
    assert [(x, y) for x, y, _ in g.edges] == sorted(want)
    assert all(0.1 < w <= 1.0 for _, _, w in g.edges)


def _graph(edges, nodes=None, surfaces=None):
    nodes = np.array(sorted(nodes or {x for e in edges for x in e[:2]}), dtype=np.int64)
    return GlobalGraph("word", 0.2, nodes, [(x, y, 0.5) for x, y in edges], surfaces or {})


def test_induce_examples():
    g = _graph([(a, b)], nodes={a, b, c})
    sub = induce_subgraph(g, [c, a, 1, b, a])  # 1 is UNK
    assert sub.nodes.tolist() == [c, a, b]
    assert sub.edges.tolist() == [[1, 2]]
    assert induce_subgraph(g, [1, 1, 1]).num_nodes == 0
    assert induce_subgraph(g, [99, a]).nodes.tolist() == [a]


def test_induce_matches_restriction_oracle():
    rng = np.random.default_rng(11)
    V = 40
    pairs = {tuple(sorted(rng.choice(np.arange(2, V), 2, replace=False).tolist())) for _ in range(120)}
    g = _graph(sorted(pairs), nodes=set(range(2, V)))
    for _ in range(200):
        seq = rng.integers(0, V + 5, size=rng.integers(1, 20)).tolist()
        sub = induce_subgraph(g, seq)
        got = {tuple(sorted((int(sub.nodes[i]), int(sub.nodes[j])))) for i, j in sub.edges}
        assert got == restriction_oracle(g.edges, seq, set(g.nodes.tolist()))
        assert len(set(sub.nodes.tolist())) == sub.num_nodes


def test_batch_offsets():
    g = _graph([(a, b), (b, c), (c, d)])
    s1 = induce_subgraph(g, [a, b, c])
    s2 = induce_subgraph(g, [c, d])
    bt = batch_subgraphs([s1, s2])
    assert bt.num_nodes == 5 and bt.segments.tolist() == [0, 0, 0, 1, 1]
    assert bt.edges.tolist() == s1.edges.tolist() + (s2.edges + 3).tolist()
    assert bt.counts.sum() == bt.num_nodes
    seg = bt.segments
    assert all(seg[i] == seg[j] for i, j in bt.edges)
    one = batch_subgraphs([s1])
    assert one.nodes.tolist() == s1.nodes.tolist() and one.edges.tolist() == s1.edges.tolist()


def test_normalized_adjacency_two_nodes():
    g = _graph([(a, b)])
    A = batch_subgraphs([induce_subgraph(g, [a, b])]).normalized_adjacency().toarray()
    assert np.allclose(A, 0.5)
    empty = batch_subgraphs([induce_subgraph(g, [1])])
    assert empty.normalized_adjacency().shape == (0, 0)


def test_graph_file_roundtrip(tmp_path):
    s = count_cooccurrences([[2, 3, 4], [2, 3], [4, 5], [2, 3, 5]], 6)
    g = build_global_graph(s, -0.5, "char", 1, surface_of=lambda i: "abcdef"[i])
    g.save(tmp_path / "g.graph")
    back = GlobalGraph.load(tmp_path / "g.graph")
    assert back.granularity == "char" and back.theta == -0.5
    assert back.nodes.tolist() == g.nodes.tolist() and back.surfaces == g.surfaces
    assert back.edge_set() == g.edge_set()
    assert np.allclose([w for *_, w in back.edges], [w for *_, w in g.edges], rtol=1e-8)


def test_graph_file_errors(tmp_path):
    p = tmp_path / "g.graph"
    p.write_text("nonsense\n")
    with pytest.raises(DataFormatError):
        GlobalGraph.load(p)
    good = _graph([(a, b)]).dumps()
    p.write_text(good.replace("edges=1", "edges=2"))
    with pytest.raises(DataFormatError):
        GlobalGraph.load(p)
