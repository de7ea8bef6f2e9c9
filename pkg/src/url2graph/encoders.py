"""CharCNN, the small self-attention semantic encoder, and the two GCNs.

Everything operates on row vectors: a layer computes ``h @ W (+ b)`` with W
stored as [d_in, d_out].
"""

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import ParamGroup, Tensor, xavier
from .tokenizer import ALPHABET_SIZE, CONT, PAD, encode_chars


@dataclass(frozen=True)
class EncoderConfig:
    d_c: int = 16
    widths: tuple = (2, 3, 4)
    n_k: int = 32
    d_t: int = 64
    layers: int = 2
    heads: int = 4
    positional: bool = True
    d_g: int = 64
    gcn_layers: int = 2

    def __post_init__(self):
        if len(set(self.widths)) != len(self.widths) or min(self.widths) < 1:
            raise ValueError(f"kernel widths must be distinct and >= 1: {self.widths}")
        if self.d_t % self.heads:
            raise ValueError(f"d_t={self.d_t} not divisible by heads={self.heads}")

    @property
    def d_cnn(self):
        return self.n_k * len(self.widths)


# ---------------------------------------------------------------- CharCNN


def init_charcnn(rng, cfg):
    p = ParamGroup()
    p.add("charcnn.embed", rng.normal(0.0, 0.02, size=(ALPHABET_SIZE, cfg.d_c)))
    for k in sorted(cfg.widths):
        p.add(f"charcnn.w{k}", xavier(rng, k * cfg.d_c, cfg.n_k, (k, cfg.d_c, cfg.n_k)))
        p.add(f"charcnn.b{k}", np.zeros(cfg.n_k))
    return p


def _widths(p):
    return sorted(int(name[len("charcnn.w"):]) for name in p if name.startswith("charcnn.w"))


def charcnn_batch(seqs, p):
    """CharCNN over several id sequences at once -> [len(seqs), d_c'].

    Each sequence is left-padded with PAD up to the widest kernel; windows of
    all sequences are stacked so each width costs a single matmul, and
    max-over-time becomes a max over each sequence's block of windows.
    """
    widths = _widths(p)
    kmax = max(widths)
    padded = [(PAD,) * max(0, kmax - len(s)) + tuple(s) for s in seqs]
    lens = np.array([len(s) for s in padded], dtype=np.int64)
    flat = np.fromiter((i for s in padded for i in s), dtype=np.int64, count=int(lens.sum()))
    offsets = np.r_[0, np.cumsum(lens)[:-1]]
    table = p["charcnn.embed"]
    d_c = table.shape[1]
    pooled = []
    for k in widths:
        nwin = lens - k + 1
        win_starts = np.r_[0, np.cumsum(nwin)[:-1]]
        first = np.repeat(offsets - win_starts, nwin) + np.arange(nwin.sum())
        idx = first[:, None] + np.arange(k)[None, :]
        x = ad.reshape(ad.gather_rows(table, flat[idx.ravel()]), (len(first), k * d_c))
        w = ad.reshape(p[f"charcnn.w{k}"], (k * d_c, -1))
        f = ad.relu(x @ w + p[f"charcnn.b{k}"])
        pooled.append(ad.segment_max(f, win_starts))
    return ad.concat(pooled, axis=-1)


def charcnn_forward(chars, p):
    ids = chars.ids if hasattr(chars, "ids") else tuple(chars)
    out = charcnn_batch([ids], p)
    return ad.reshape(out, (out.shape[1],))


def node_char_ids(surface, kind):
    """Character ids a node is encoded from (``##`` stripped for word pieces)."""
    if kind == "char":
        return encode_chars(surface).ids
    if surface.startswith(CONT) and len(surface) > len(CONT):
        surface = surface[len(CONT):]
    return encode_chars(surface).ids


def init_node_features(sub, p, kind, d_out=None):
    """Initial node rows: CharCNN of each node's character sequence."""
    if sub.num_nodes == 0:
        return Tensor(np.zeros((0, d_out or _d_cnn(p))))
    return charcnn_batch([node_char_ids(s, kind) for s in sub.surfaces], p)


def _d_cnn(p):
    return sum(p[f"charcnn.w{k}"].shape[2] for k in _widths(p))


# ---------------------------------------------------------------- semantic encoder


def init_semantic(rng, cfg, vocab_size):
    p = ParamGroup()
    d = cfg.d_t
    p.add("semantic.embed", rng.normal(0.0, 0.02, size=(vocab_size, d)))
    for layer in range(cfg.layers):
        pre = f"semantic.l{layer}."
        for m in ("q", "k", "v", "o"):
            p.add(pre + "w" + m, xavier(rng, d, d))
            p.add(pre + "b" + m, np.zeros(d))
        p.add(pre + "w1", xavier(rng, d, 4 * d))
        p.add(pre + "b1", np.zeros(4 * d))
        p.add(pre + "w2", xavier(rng, 4 * d, d))
        p.add(pre + "b2", np.zeros(d))
    return p


def positional_table(length, d):
    pos = np.arange(length)[:, None]
    rate = np.power(10000.0, -(np.arange(0, d, 2) / d))
    pe = np.zeros((length, d))
    pe[:, 0::2] = np.sin(pos * rate)
    pe[:, 1::2] = np.cos(pos * rate[: d // 2])
    return pe


def semantic_batch(token_seqs, p, cfg, attn_hook=None):
    """Encode each token sequence and mean-pool over its positions -> [B, d_t].

    Sequences are packed back to back and attention is restricted to each
    sequence's own block, so results do not depend on batch composition.
    """
    lens = np.array([len(s) for s in token_seqs], dtype=np.int64)
    flat = np.fromiter((i for s in token_seqs for i in s), dtype=np.int64, count=int(lens.sum()))
    seg = np.repeat(np.arange(len(lens)), lens)
    N, d, h = len(flat), cfg.d_t, cfg.heads
    dh = d // h
    x = ad.gather_rows(p["semantic.embed"], flat)
    if cfg.positional:
        pos = np.arange(N) - np.repeat(np.r_[0, np.cumsum(lens)[:-1]], lens)
        x = x + positional_table(int(lens.max()), d)[pos]
    mask = (seg[:, None] == seg[None, :])[None]
    scale = 1.0 / math.sqrt(dh)
    layers = sorted({int(n.split(".")[1][1:]) for n in p if n.startswith("semantic.l")})
    for layer in layers:
        w = lambda m: p[f"semantic.l{layer}.{m}"]  # noqa: E731

        def heads(t):
            return ad.transpose(ad.reshape(t, (N, h, dh)), (1, 0, 2))

        q = heads(x @ w("wq") + w("bq"))
        k = heads(x @ w("wk") + w("bk"))
        v = heads(x @ w("wv") + w("bv"))
        scores = ad.matmul(q, ad.transpose(k, (0, 2, 1))) * scale
        attn = ad.softmax_rows(scores, mask)
        if attn_hook is not None:
            attn_hook(layer, attn.data, seg)
        o = ad.reshape(ad.transpose(ad.matmul(attn, v), (1, 0, 2)), (N, d))
        x = x + (o @ w("wo") + w("bo"))
        x = x + (ad.relu(x @ w("w1") + w("b1")) @ w("w2") + w("b2"))
    return ad.segment_mean(x, seg, len(lens))


def semantic_encode(tokens, p, cfg, attn_hook=None):
    ids = tokens.ids if hasattr(tokens, "ids") else tuple(tokens)
    out = semantic_batch([ids], p, cfg, attn_hook)
    return ad.reshape(out, (cfg.d_t,))


# ---------------------------------------------------------------- GCN


def init_gcn(rng, cfg, prefix):
    p = ParamGroup()
    dims = [cfg.d_cnn] + [cfg.d_g] * cfg.gcn_layers
    for layer, (a, b) in enumerate(zip(dims, dims[1:])):
        p.add(f"{prefix}.w{layer}", xavier(rng, a, b))
    return p


def gcn_weights(p):
    return [p[n] for n in sorted(p, key=lambda n: int(n.rsplit(".w", 1)[1]))]


def gcn_node_forward(batch, x0, p):
    """Node outputs after all layers: h <- relu(A_hat h W), A_hat with self-loops."""
    ws = gcn_weights(p)
    if x0.shape[0] != batch.num_nodes or x0.shape[1] != ws[0].shape[0]:
        raise ValueError(f"node features {x0.shape} do not fit batch of {batch.num_nodes} nodes / W {ws[0].shape}")
    if batch.num_nodes == 0:
        return Tensor(np.zeros((0, ws[-1].shape[1])))
    adj = batch.normalized_adjacency()
    hid = x0
    for w in ws:
        hid = ad.relu(ad.spmm(adj, hid @ w))
    return hid


def gcn_forward(batch, x0, p):
    """GCN then per-subgraph mean pooling -> [num_segments, d_g]; empty subgraphs give zeros."""
    hid = gcn_node_forward(batch, x0, p)
    if batch.num_nodes == 0:
        return Tensor(np.zeros((batch.num_segments, hid.shape[1])))
    return ad.segment_mean(hid, batch.segments, batch.num_segments)
