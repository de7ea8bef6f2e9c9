import numpy as np
import pytest

from url2graph import autodiff as ad
from url2graph.autodiff import Tensor, no_grad
from url2graph.encoders import (EncoderConfig, charcnn_batch, charcnn_forward, gcn_forward, gcn_node_forward,
                                init_charcnn, init_gcn, init_node_features, init_semantic, semantic_batch,
                                semantic_encode)
from url2graph.tokenizer import PAD, encode_chars
from url2graph.urlgraph import GlobalGraph, Subgraph, batch_subgraphs, induce_subgraph

from conftest import SMALL


def test_config_validation():
    assert EncoderConfig().d_cnn == 96
    with pytest.raises(ValueError):
        EncoderConfig(widths=(2, 2))
    with pytest.raises(ValueError):
        EncoderConfig(d_t=10, heads=4)


def test_charcnn_single_char_default_dims(rng):
    p = init_charcnn(rng, EncoderConfig())
    out = charcnn_forward(encode_chars("a"), p)
    assert out.shape == (96,)


def test_charcnn_zero_params_gives_zero(rng):
    p = init_charcnn(rng, SMALL)
    for t in p.values():
        if t.name != "charcnn.embed":
            t.data[:] = 0
    assert not np.any(charcnn_forward(encode_chars("http://x.com"), p).data)


def test_charcnn_sees_homoglyph(rng):
    p = init_charcnn(rng, SMALL)
    a = charcnn_forward(encode_chars("g00gle"), p).data
    b = charcnn_forward(encode_chars("google"), p).data
    assert not np.allclose(a, b)


def test_charcnn_batch_equals_single(rng):
    p = init_charcnn(rng, SMALL)
    seqs = [encode_chars(u).ids for u in ("a", "login", "paypa1.xyz", "q")]
    batch = charcnn_batch(seqs, p).data
    for row, s in zip(batch, seqs):
        assert np.allclose(row, charcnn_forward(s, p).data, atol=1e-12)


def test_charcnn_matches_conv1d_reference(rng):
    p = init_charcnn(rng, SMALL)
    ids = (PAD,) + encode_chars("abc").ids  # already at least max width
    x = Tensor(p["charcnn.embed"].data[list(ids)])
    cols = []
    for k in sorted(SMALL.widths):
        w, b = p[f"charcnn.w{k}"].data, p[f"charcnn.b{k}"].data
        for j in range(SMALL.n_k):
            conv = ad.conv1d_valid(x, Tensor(w[:, :, j]), b[j])
            cols.append(ad.max_over_time(ad.relu(conv)).data)
    assert np.allclose(charcnn_forward(ids, p).data, np.array(cols), atol=1e-12)


def test_charcnn_extra_pad_cannot_lower_channels(rng):
    p = init_charcnn(rng, SMALL)
    p["charcnn.embed"].data[PAD] = 0
    for k in SMALL.widths:
        p[f"charcnn.b{k}"].data[:] = 0
    ids = encode_chars("login").ids
    base = charcnn_forward(ids, p).data
    more = charcnn_forward((PAD,) * 5 + ids, p).data
    assert np.all(more >= base)


def test_charcnn_gradients(rng):
    from oracles import finite_difference, rel_err
    p = init_charcnn(rng, SMALL)
    seqs = [encode_chars(u).ids for u in ("ab", "paypal", "x")]
    r = rng.normal(size=(3, SMALL.d_cnn))
    f = lambda: float((charcnn_batch(seqs, p).data * r).sum())  # noqa: E731
    backward_loss = ad.sum_all(charcnn_batch(seqs, p) * Tensor(r))
    ad.backward(backward_loss)
    for t in p.values():
        for idx in list(np.ndindex(t.shape))[:: max(1, t.data.size // 25)]:
            assert rel_err(t.grad[idx], finite_difference(f, t, idx)) < 1e-5


def test_semantic_single_token_and_attention_rows(rng):
    p = init_semantic(rng, SMALL, 50)
    rows = []
    out = semantic_encode([7], p, SMALL, attn_hook=lambda layer, a, seg: rows.append(a))
    assert out.shape == (SMALL.d_t,)
    assert np.allclose(rows[0], 1.0)
    semantic_encode([3, 4, 5, 9], p, SMALL, attn_hook=lambda layer, a, seg: rows.append(a))
    assert np.all(np.abs(rows[-1].sum(axis=-1) - 1) < 1e-12)


def test_semantic_permutation(rng):
    p = init_semantic(rng, SMALL, 50)
    seq, perm = [3, 8, 5, 9, 2], [9, 5, 3, 2, 8]
    a, b = semantic_encode(seq, p, SMALL).data, semantic_encode(perm, p, SMALL).data
    assert not np.allclose(a, b)
    nopos = EncoderConfig(**{**SMALL.__dict__, "positional": False})
    a, b = semantic_encode(seq, p, nopos).data, semantic_encode(perm, p, nopos).data
    assert np.max(np.abs(a - b)) < 1e-9


def test_semantic_batching_invariance(rng):
    p = init_semantic(rng, SMALL, 50)
    seqs = [[2, 3], [4], [5, 6, 7, 8, 9, 10], [3, 3, 3]]
    batch = semantic_batch(seqs, p, SMALL).data
    for row, s in zip(batch, seqs):
        assert np.max(np.abs(row - semantic_encode(s, p, SMALL).data)) < 1e-9


def _identity_gcn(d, layers=1):
    cfg = EncoderConfig(d_c=2, widths=(1,), n_k=d, d_t=4, heads=1, d_g=d, gcn_layers=layers)
    p = init_gcn(np.random.default_rng(0), cfg, "g")
    for t in p.values():
        t.data[:] = np.eye(d)
    return p


def test_gcn_isolated_node_identity():
    p = _identity_gcn(3)
    sub = Subgraph(np.array([5]), np.zeros((0, 2), dtype=np.int64))
    x = Tensor(np.array([[1.0, 0.0, 2.5]]))
    assert np.array_equal(gcn_forward(batch_subgraphs([sub]), x, p).data, x.data)


def test_gcn_two_node_hand_case():
    p = _identity_gcn(2)
    sub = Subgraph(np.array([5, 6]), np.array([[0, 1]]))
    x = Tensor(np.array([[1.0, 3.0], [2.0, 0.5]]))
    h = gcn_node_forward(batch_subgraphs([sub]), x, p).data
    assert np.array_equal(h[0], x.data[0] / 2 + x.data[1] / 2)


def _random_subs(rng, k):
    V = 30
    pairs = {tuple(sorted(rng.choice(np.arange(2, V), 2, replace=False).tolist())) for _ in range(60)}
    g = GlobalGraph("word", 0.2, np.arange(2, V), [(a, b, 0.5) for a, b in sorted(pairs)])
    return [induce_subgraph(g, rng.integers(0, V, size=rng.integers(1, 9))) for _ in range(k)]


def test_gcn_batching_invariance(rng):
    cfg = SMALL
    p = init_gcn(rng, cfg, "gcn_word")
    subs = _random_subs(rng, 6)
    feats = [Tensor(rng.normal(size=(s.num_nodes, cfg.d_cnn))) for s in subs]
    whole = gcn_forward(batch_subgraphs(subs), Tensor(np.concatenate([f.data for f in feats])), p).data
    for i, (s, f) in enumerate(zip(subs, feats)):
        alone = gcn_forward(batch_subgraphs([s]), f, p).data[0]
        assert np.max(np.abs(whole[i] - alone)) < 1e-9
        if s.num_nodes == 0:
            assert not np.any(whole[i])


def test_gcn_node_order_equivariance(rng):
    p = init_gcn(rng, SMALL, "gcn_word")
    sub = next(s for s in _random_subs(rng, 50) if s.num_nodes >= 4 and len(s.edges))
    x = rng.normal(size=(sub.num_nodes, SMALL.d_cnn))
    perm = rng.permutation(sub.num_nodes)
    inv = np.argsort(perm)
    sub2 = Subgraph(sub.nodes[perm], np.sort(inv[sub.edges], axis=1))
    h1 = gcn_node_forward(batch_subgraphs([sub]), Tensor(x), p).data
    h2 = gcn_node_forward(batch_subgraphs([sub2]), Tensor(x[perm]), p).data
    assert np.max(np.abs(h1[perm] - h2)) < 1e-9
    pooled1 = gcn_forward(batch_subgraphs([sub]), Tensor(x), p).data
    pooled2 = gcn_forward(batch_subgraphs([sub2]), Tensor(x[perm]), p).data
    assert np.max(np.abs(pooled1 - pooled2)) < 1e-9


def test_node_features(rng):
    p = init_charcnn(rng, SMALL)
    sub = Subgraph(np.array([10, 11, 12]), np.zeros((0, 2), dtype=np.int64), ("login", "##in", "a"))
    x = init_node_features(sub, p, "word").data
    with no_grad():
        assert np.allclose(x[0], charcnn_forward(encode_chars("login"), p).data)
        assert np.allclose(x[1], charcnn_forward(encode_chars("in"), p).data)
    chars = Subgraph(np.array([3, 4]), np.zeros((0, 2), dtype=np.int64), ("a", "a"))
    y = init_node_features(chars, p, "char").data
    assert np.array_equal(y[0], y[1]) and np.allclose(y[0], charcnn_forward(encode_chars("a"), p).data)
    empty = Subgraph(np.zeros(0, dtype=np.int64), np.zeros((0, 2), dtype=np.int64))
    assert init_node_features(empty, p, "word").shape == (0, SMALL.d_cnn)
