"""Gated fusion of the semantic and two graph views, and the full model forward."""

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import ParamGroup, Tensor, xavier
from .encoders import (EncoderConfig, charcnn_batch, gcn_forward, init_charcnn, init_gcn, init_semantic,
                       node_char_ids, semantic_batch)
from .errors import ArtifactError
from .tokenizer import ALPHABET_SIZE, MAX_CHAR_LEN, MAX_SUBWORD_LEN, encode_chars, encode_subwords
from .urlgraph import batch_subgraphs, induce_subgraph

GROUPS = ("charcnn", "semantic", "gcn_word", "gcn_char", "fusion")


def init_fusion(rng, d_t, d_g, num_classes):
    p = ParamGroup()
    p.add("fusion.w_word", xavier(rng, d_g, d_t, (d_t, d_g)))
    p.add("fusion.b_word", np.zeros(d_t))
    p.add("fusion.w_char", xavier(rng, d_g, d_t, (d_t, d_g)))
    p.add("fusion.b_char", np.zeros(d_t))
    p.add("fusion.w_g", xavier(rng, 3 * d_t, 3, (3, 3 * d_t)))
    p.add("fusion.b_g", np.zeros(3))
    p.add("fusion.w_c", xavier(rng, d_t, num_classes, (num_classes, d_t)))
    p.add("fusion.b_c", np.zeros(num_classes))
    return p


@dataclass
class ModelParams:
    config: EncoderConfig
    num_classes: int
    vocab_size: int
    groups: dict  # group name -> ParamGroup
    frozen: dict = field(default_factory=dict)  # group name -> bool

    @classmethod
    def init(cls, cfg, vocab_size, num_classes=2, seed=0):
        rng = np.random.default_rng(seed)
        groups = {
            "charcnn": init_charcnn(rng, cfg),
            "semantic": init_semantic(rng, cfg, vocab_size),
            "gcn_word": init_gcn(rng, cfg, "gcn_word"),
            "gcn_char": init_gcn(rng, cfg, "gcn_char"),
            "fusion": init_fusion(rng, cfg.d_t, cfg.d_g, num_classes),
        }
        return cls(cfg, num_classes, vocab_size, groups, {g: False for g in GROUPS})

    def __getitem__(self, group):
        return self.groups[group]

    def freeze(self, group, flag=True):
        self.frozen[group] = flag
        self.groups[group].set_trainable(not flag)

    def named_tensors(self):
        out = ParamGroup()
        for g in GROUPS:
            out.update(self.groups[g])
        return out

    def trainable(self):
        out = ParamGroup()
        for g in GROUPS:
            if not self.frozen.get(g):
                out.update(self.groups[g])
        return out


# ---------------------------------------------------------------- fusion ops


def project(g, w, b):
    """Affine map of row vector(s) ``g`` with W stored as [d_out, d_in]."""
    if g.shape[-1] != w.shape[1]:
        raise ValueError(f"projection input {g.shape} does not match W {w.shape}")
    if len(g.shape) == 1:
        out = ad.matmul(ad.reshape(g, (1, -1)), ad.transpose(w)) + b
        return ad.reshape(out, (w.shape[0],))
    return ad.matmul(g, ad.transpose(w)) + b


def gate_fuse(h_t, h_word, h_char, w_g, b_g):
    """Per-row gate over the three views -> (alpha [B, 3], fused [B, d_t]).

    1-D inputs are treated as a batch of one and returned 1-D.
    """
    single = len(h_t.shape) == 1
    if single:
        h_t, h_word, h_char = (ad.reshape(v, (1, -1)) for v in (h_t, h_word, h_char))
    if not (h_t.shape == h_word.shape == h_char.shape):
        raise ValueError(f"gate inputs differ in shape: {h_t.shape}, {h_word.shape}, {h_char.shape}")
    B, d = h_t.shape
    concat = ad.concat([h_t, h_word, h_char], axis=1)
    alpha = ad.softmax_rows(concat @ ad.transpose(w_g) + b_g)
    stacked = ad.concat([ad.reshape(v, (B, 1, d)) for v in (h_t, h_word, h_char)], axis=1)
    fused = ad.reshape(ad.matmul(ad.reshape(alpha, (B, 1, 3)), stacked), (B, d))
    if single:
        return ad.reshape(alpha, (3,)), ad.reshape(fused, (d,))
    return alpha, fused


def classify(h_fused, w_c, b_c):
    single = len(h_fused.shape) == 1
    x = ad.reshape(h_fused, (1, -1)) if single else h_fused
    if x.shape[1] != w_c.shape[1]:
        raise ValueError(f"classifier input {x.shape} does not match W {w_c.shape}")
    probs = ad.softmax_rows(x @ ad.transpose(w_c) + b_c)
    return ad.reshape(probs, (w_c.shape[0],)) if single else probs


def batch_loss(probs, labels, class_weights=None):
    return ad.cross_entropy(probs, labels, class_weights)


# ---------------------------------------------------------------- full forward


@dataclass
class Encoded:
    tokens: object
    chars: object
    word_sub: object
    char_sub: object


class Artifacts:
    """Vocabulary + two global graphs, with a per-URL encoding cache."""

    def __init__(self, vocab, g_word, g_char, max_subword_len=MAX_SUBWORD_LEN, max_char_len=MAX_CHAR_LEN):
        if g_word.granularity != "word" or g_char.granularity != "char":
            raise ArtifactError("graph granularity tags must be word and char")
        if len(g_word.nodes) and int(g_word.nodes.max()) >= len(vocab):
            raise ArtifactError("word graph references ids outside the vocabulary")
        if len(g_char.nodes) and int(g_char.nodes.max()) >= ALPHABET_SIZE:
            raise ArtifactError("char graph references ids outside the alphabet")
        for v, s in g_word.surfaces.items():
            if s and vocab.surface(v) != s:
                raise ArtifactError(f"word graph node {v} is {s!r} but vocab says {vocab.surface(v)!r}")
        self.vocab, self.g_word, self.g_char = vocab, g_word, g_char
        self.max_subword_len, self.max_char_len = max_subword_len, max_char_len
        self._cache = {}

    def encode(self, url):
        hit = self._cache.get(url)
        if hit is None:
            toks = encode_subwords(url, self.vocab, self.max_subword_len)
            chars = encode_chars(url, self.max_char_len)
            hit = Encoded(toks, chars, induce_subgraph(self.g_word, toks.ids), induce_subgraph(self.g_char, chars.ids))
            self._cache[url] = hit
        return hit


@dataclass
class ForwardTrace:
    h_t: np.ndarray
    h_word: np.ndarray
    h_char: np.ndarray
    h_word_proj: np.ndarray
    h_char_proj: np.ndarray
    alpha: np.ndarray
    h_fused: np.ndarray
    probs: np.ndarray


def _graph_view(subs, kind, p, d_cnn):
    batch = batch_subgraphs(subs)
    if batch.num_nodes == 0:
        x0 = Tensor(np.zeros((0, d_cnn)))
    else:
        # One CharCNN evaluation per distinct node, gathered back to batch rows.
        uniq, inverse = np.unique(batch.nodes, return_inverse=True)
        surf = {}
        for node, s in zip(batch.nodes, batch.surfaces):
            surf.setdefault(int(node), s)
        feats = charcnn_batch([node_char_ids(surf[int(u)], kind) for u in uniq], p["charcnn"])
        x0 = ad.gather_rows(feats, inverse)
    return gcn_forward(batch, x0, p[f"gcn_{kind}"])


def model_forward(urls, artifacts, params, traces=False, attn_hook=None):
    """Class probabilities [B, C] for a batch of URLs (and per-URL traces)."""
    if params.vocab_size != len(artifacts.vocab):
        raise ArtifactError(f"model built for vocab of {params.vocab_size}, artifacts have {len(artifacts.vocab)}")
    enc = [artifacts.encode(u) for u in urls]
    cfg = params.config
    fp = params["fusion"]
    h_t = semantic_batch([e.tokens.ids for e in enc], params["semantic"], cfg, attn_hook)
    h_word = _graph_view([e.word_sub for e in enc], "word", params, cfg.d_cnn)
    h_char = _graph_view([e.char_sub for e in enc], "char", params, cfg.d_cnn)
    pw = project(h_word, fp["fusion.w_word"], fp["fusion.b_word"])
    pc = project(h_char, fp["fusion.w_char"], fp["fusion.b_char"])
    alpha, fused = gate_fuse(h_t, pw, pc, fp["fusion.w_g"], fp["fusion.b_g"])
    probs = classify(fused, fp["fusion.w_c"], fp["fusion.b_c"])
    if not traces:
        return probs, None
    out = [ForwardTrace(*(t.data[i].copy() for t in (h_t, h_word, h_char, pw, pc, alpha, fused, probs)))
           for i in range(len(urls))]
    return probs, out
