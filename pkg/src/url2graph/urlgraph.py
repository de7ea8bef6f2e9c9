"""Corpus-level NPMI co-occurrence graphs and per-URL subgraphs.

Probabilities are document-level: a token's marginal and a pair's joint are
both "number of URLs containing it / number of URLs".  Repeated tokens in
one URL count once.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ArtifactError, DataFormatError, DomainError
from .tokenizer import PAD, UNK

GRAPH_MAGIC = "#url2graph-graph"
DEFAULT_THETA = 0.2
DEFAULT_MIN_PAIR_COUNT = 5


@dataclass
class CooccurrenceStats:
    token_counts: np.ndarray  # [V] documents containing each id
    pair_counts: dict  # (a, b) with a < b -> documents containing both
    n_docs: int
    vocab_size: int

    def count(self, a):
        return int(self.token_counts[a]) if a < len(self.token_counts) else 0

    def pair(self, a, b):
        if a > b:
            a, b = b, a
        return self.pair_counts.get((a, b), 0)

    def merge(self, other):
        """Sum two shards' counts (order-independent)."""
        V = max(self.vocab_size, other.vocab_size)
        tc = np.zeros(V, dtype=np.int64)
        tc[:len(self.token_counts)] += self.token_counts
        tc[:len(other.token_counts)] += other.token_counts
        pc = dict(self.pair_counts)
        for k, v in other.pair_counts.items():
            pc[k] = pc.get(k, 0) + v
        return CooccurrenceStats(tc, pc, self.n_docs + other.n_docs, V)


def count_cooccurrences(token_seqs, vocab_size=None):
    """Presence-based document counts of tokens and unordered distinct pairs.

    PAD and UNK never count.
    """
    docs = []
    for seq in token_seqs:
        ids = np.unique(np.asarray(seq, dtype=np.int64))
        docs.append(ids[(ids != PAD) & (ids != UNK)])
    top = max((int(d.max()) for d in docs if len(d)), default=1)
    V = vocab_size if vocab_size is not None else top + 1
    if top >= V:
        raise ArtifactError(f"token id {top} outside vocab of size {V}")
    token_counts = np.zeros(V, dtype=np.int64)
    keys = []
    for d in docs:
        token_counts[d] += 1
        if len(d) > 1:
            i, j = np.triu_indices(len(d), k=1)
            keys.append(d[i] * V + d[j])
    pair_counts = {}
    if keys:
        uniq, cnt = np.unique(np.concatenate(keys), return_counts=True)
        pair_counts = {(int(k // V), int(k % V)): int(c) for k, c in zip(uniq, cnt)}
    return CooccurrenceStats(token_counts, pair_counts, len(docs), V)


def npmi(stats, a, b, min_pair_count=1):
    """Normalised PMI of ids ``a`` and ``b``; None when the pair is unsupported."""
    if a == b:
        raise DomainError("npmi of a token with itself")
    n_ab = stats.pair(a, b)
    if n_ab == 0 or n_ab < min_pair_count:
        return None
    N = stats.n_docs
    if n_ab == N:
        return 0.0
    p_ab = n_ab / N
    p_a = stats.count(a) / N
    p_b = stats.count(b) / N
    # Rounding can push perfectly associated pairs a hair past 1.
    return min(1.0, max(-1.0, math.log(p_ab / (p_a * p_b)) / -math.log(p_ab)))


@dataclass
class GlobalGraph:
    granularity: str  # "word" | "char"
    theta: float
    nodes: np.ndarray  # sorted vocab ids
    edges: list  # (a, b, weight) with a < b, ascending
    surfaces: dict = field(default_factory=dict)  # vocab id -> surface
    _adj: object = field(default=None, repr=False, compare=False)
    _pos: object = field(default=None, repr=False, compare=False)

    @property
    def num_nodes(self):
        return len(self.nodes)

    def _index(self):
        if self._adj is None:
            V = int(self.nodes.max()) + 1 if len(self.nodes) else 1
            self._pos = np.full(V, -1, dtype=np.int64)
            self._pos[self.nodes] = np.arange(len(self.nodes))
            n = len(self.nodes)
            if self.edges:
                e = np.array([(a, b) for a, b, _ in self.edges], dtype=np.int64)
                r, c = self._pos[e[:, 0]], self._pos[e[:, 1]]
                data = np.ones(2 * len(e), dtype=np.int8)
                self._adj = sp.csr_matrix((data, (np.r_[r, c], np.r_[c, r])), shape=(n, n))
            else:
                self._adj = sp.csr_matrix((n, n), dtype=np.int8)
        return self._adj, self._pos

    def contains(self, ids):
        _, pos = self._index()
        ids = np.asarray(ids, dtype=np.int64)
        ok = ids < len(pos)
        out = np.zeros(len(ids), dtype=bool)
        out[ok] = pos[ids[ok]] >= 0
        return out

    def edge_set(self):
        return {(a, b) for a, b, _ in self.edges}

    def save(self, path):
        Path(path).write_text(self.dumps(), encoding="utf-8")

    def dumps(self):
        local = {int(v): i for i, v in enumerate(self.nodes)}
        lines = [f"{GRAPH_MAGIC} v1 granularity={self.granularity} theta={self.theta!r} "
                 f"nodes={len(self.nodes)} edges={len(self.edges)}"]
        for i, v in enumerate(self.nodes):
            lines.append(f"N\t{i}\t{int(v)}\t{self.surfaces.get(int(v), '')}")
        for a, b, w in self.edges:
            lines.append(f"E\t{local[a]}\t{local[b]}\t{w:.9g}")
        return "\n".join(lines) + "\n"

    @classmethod
    def load(cls, path):
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if not lines or not lines[0].startswith(GRAPH_MAGIC + " v1"):
            raise DataFormatError(f"{path}: missing graph header")
        meta = dict(tok.split("=", 1) for tok in lines[0].split()[2:])
        try:
            gran, theta = meta["granularity"], float(meta["theta"])
            n_nodes, n_edges = int(meta["nodes"]), int(meta["edges"])
        except (KeyError, ValueError) as err:
            raise DataFormatError(f"{path}: bad header: {err}") from None
        nodes, surfaces, edges = [], {}, []
        for n, line in enumerate(lines[1:], start=2):
            if not line:
                continue
            parts = line.split("\t")
            if parts[0] == "N" and len(parts) == 4:
                if int(parts[1]) != len(nodes):
                    raise DataFormatError(f"{path}:{n}: node ids must be dense")
                nodes.append(int(parts[2]))
                surfaces[int(parts[2])] = parts[3]
            elif parts[0] == "E" and len(parts) == 4:
                a, b = nodes[int(parts[1])], nodes[int(parts[2])]
                edges.append((min(a, b), max(a, b), float(parts[3])))
            else:
                raise DataFormatError(f"{path}:{n}: unrecognised line")
        if len(nodes) != n_nodes or len(edges) != n_edges:
            raise DataFormatError(f"{path}: header counts do not match body")
        return cls(gran, theta, np.asarray(nodes, dtype=np.int64), edges, surfaces)


def build_global_graph(stats, theta=DEFAULT_THETA, granularity="word", min_pair_count=DEFAULT_MIN_PAIR_COUNT,
                       surface_of=None):
    """Keep every pair whose NPMI is defined and strictly above ``theta``."""
    nodes = np.flatnonzero(stats.token_counts > 0)
    edges = []
    for (a, b) in sorted(stats.pair_counts):
        w = npmi(stats, a, b, min_pair_count)
        if w is not None and w > theta:
            edges.append((a, b, w))
    surfaces = {int(v): surface_of(int(v)) for v in nodes} if surface_of else {}
    return GlobalGraph(granularity, float(theta), nodes, edges, surfaces)


@dataclass
class Subgraph:
    nodes: np.ndarray  # local index -> global vocab id
    edges: np.ndarray  # [m, 2] local indices, a < b
    surfaces: tuple = ()
    source: object = None

    @property
    def num_nodes(self):
        return len(self.nodes)


def induce_subgraph(graph, seq, source=None):
    """Restrict ``graph`` to the ids of ``seq``, nodes in first-occurrence order."""
    seq = np.asarray(seq, dtype=np.int64)
    _, first = np.unique(seq, return_index=True)
    ordered = seq[np.sort(first)]
    ordered = ordered[(ordered != PAD) & (ordered != UNK)]
    ordered = ordered[graph.contains(ordered)]
    surfaces = tuple(graph.surfaces.get(int(v), "") for v in ordered)
    if len(ordered) < 2:
        return Subgraph(ordered, np.zeros((0, 2), dtype=np.int64), surfaces, source)
    adj, pos = graph._index()
    sub = adj[pos[ordered]][:, pos[ordered]]
    r, c = sp.triu(sub, k=1).nonzero()
    order = np.lexsort((c, r))
    edges = np.stack([r[order], c[order]], axis=1).astype(np.int64)
    return Subgraph(ordered, edges, surfaces, source)


@dataclass
class BatchedGraph:
    nodes: np.ndarray  # concatenated global ids
    surfaces: tuple
    segments: np.ndarray  # subgraph index per node
    edges: np.ndarray  # [m, 2] offset-shifted
    counts: np.ndarray  # nodes per subgraph

    @property
    def num_nodes(self):
        return len(self.nodes)

    @property
    def num_segments(self):
        return len(self.counts)

    def normalized_adjacency(self):
        """D^-1/2 (A + I) D^-1/2 as a CSR matrix (degrees include the self-loop)."""
        n = self.num_nodes
        e = self.edges
        r = np.r_[e[:, 0], e[:, 1], np.arange(n)]
        c = np.r_[e[:, 1], e[:, 0], np.arange(n)]
        deg = np.bincount(r, minlength=n).astype(np.float64)
        a = sp.csr_matrix((1.0 / np.sqrt(deg[r] * deg[c]), (r, c)), shape=(n, n))
        a.sort_indices()
        return a


def batch_subgraphs(subs):
    if not subs:
        raise ValueError("need at least one subgraph")
    counts = np.array([s.num_nodes for s in subs], dtype=np.int64)
    offsets = np.r_[0, np.cumsum(counts)[:-1]]
    nodes = np.concatenate([s.nodes for s in subs]).astype(np.int64)
    segments = np.repeat(np.arange(len(subs)), counts)
    edges = np.concatenate([s.edges + off for s, off in zip(subs, offsets)]).astype(np.int64).reshape(-1, 2)
    surfaces = tuple(x for s in subs for x in s.surfaces)
    return BatchedGraph(nodes, surfaces, segments, edges, counts)
