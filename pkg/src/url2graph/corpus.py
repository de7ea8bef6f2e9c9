"""Labeled URL datasets: CSV ingestion, stratified splits, filtering, statistics."""

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import networkx as nx
import numpy as np

from .errors import DataFormatError, EmptyDatasetError, LabelError, SpecError

DEFAULT_LABEL_MAP = {"benign": 0, "malicious": 1}
LENGTH_BUCKET = 10


@dataclass(frozen=True)
class UrlRecord:
    url: str
    label: int


@dataclass(frozen=True)
class Dataset:
    records: tuple
    class_names: tuple
    source_id: str = ""
    skipped: tuple = field(default=(), compare=False)  # (row, reason) for rows dropped by skip_invalid

    def __post_init__(self):
        C = len(self.class_names)
        for r in self.records:
            if not r.url.strip():
                raise DataFormatError("record with empty url")
            if not 0 <= r.label < C:
                raise LabelError("?", r.label)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def urls(self):
        return [r.url for r in self.records]

    @property
    def labels(self):
        return np.array([r.label for r in self.records], dtype=np.int64)

    def subset(self, indices, source_id=None):
        return Dataset(tuple(self.records[i] for i in indices), self.class_names,
                       source_id if source_id is not None else self.source_id)

    def replace_urls(self, urls, source_id=None):
        recs = tuple(UrlRecord(u, r.label) for u, r in zip(urls, self.records))
        return Dataset(recs, self.class_names, source_id or self.source_id)


@dataclass(frozen=True)
class SplitSpec:
    train_frac: float
    val_frac: float
    test_frac: float
    seed: int = 0

    def __post_init__(self):
        fr = (self.train_frac, self.val_frac, self.test_frac)
        if any(f < 0 or f > 1 for f in fr):
            raise SpecError(f"fractions must lie in [0, 1]: {fr}")
        if sum(fr) > 1 + 1e-9:
            raise SpecError(f"fractions sum to {sum(fr)} > 1")


@dataclass
class ClassStats:
    counts: dict
    imbalance_ratio: float
    length_histogram: dict  # class name -> {bucket lower bound: count}

    def to_json(self):
        ratio = self.imbalance_ratio
        return {
            "classes": dict(self.counts),
            "imbalance_ratio": "inf" if math.isinf(ratio) else ratio,
            "length_histogram": {k: {str(b): c for b, c in v.items()}
                                 for k, v in self.length_histogram.items()},
        }


def class_names_from_map(label_map):
    C = max(label_map.values()) + 1
    names = [None] * C
    for name, i in label_map.items():
        if names[i] is None:
            names[i] = name
    if any(n is None for n in names):
        raise SpecError(f"label map does not cover ids 0..{C - 1}")
    return tuple(names)


def parse_label_map(text):
    """``"benign=0,malicious=1"`` -> dict."""
    out = {}
    for part in text.split(","):
        name, _, idx = part.partition("=")
        if not name or not idx.strip().isdigit():
            raise SpecError(f"bad label map entry {part!r}")
        out[name.strip()] = int(idx)
    return out


def load_csv(path, label_map=None, skip_invalid=False):
    """Read a ``url,label`` CSV (header required, extra columns ignored)."""
    label_map = DEFAULT_LABEL_MAP if label_map is None else label_map
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        text = fh.read()
    return parse_csv(text, label_map, skip_invalid=skip_invalid, source_id=str(path))


def parse_csv(text, label_map, skip_invalid=False, source_id=""):
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None:
        raise EmptyDatasetError(f"{source_id}: empty file")
    cols = [h.strip().lower() for h in header]
    if "url" not in cols or "label" not in cols:
        raise DataFormatError(f"{source_id}: header must contain url and label columns, got {header}")
    ui, li = cols.index("url"), cols.index("label")
    lookup = {k.lower(): v for k, v in label_map.items()}
    records, skipped = [], []
    for rowno, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            if len(row) <= max(ui, li):
                raise DataFormatError(f"{source_id}: row {rowno} has {len(row)} fields")
            url = row[ui].strip()
            if not url:
                raise DataFormatError(f"{source_id}: row {rowno} has an empty url")
            key = row[li].strip().lower()
            if key not in lookup:
                raise LabelError(rowno, row[li])
        except (DataFormatError, LabelError) as err:
            if not skip_invalid:
                raise
            skipped.append((rowno, str(err)))
            continue
        records.append(UrlRecord(url, lookup[key]))
    if not records:
        raise EmptyDatasetError(f"{source_id}: no data rows")
    return Dataset(tuple(records), class_names_from_map(label_map), source_id, tuple(skipped))


def write_csv(dataset, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["url", "label"])
        for r in dataset.records:
            w.writerow([r.url, dataset.class_names[r.label]])


def _controlled_round(class_sizes, split_sizes):
    """Integer table with the given margins whose cells are floor or ceil of
    the proportional allocation ``class_size * split_size / n``."""
    n = sum(class_sizes)
    prop = np.outer(class_sizes, split_sizes) / n
    base = np.floor(prop + 1e-9).astype(np.int64)
    frac = prop - base > 1e-9
    row_def = np.asarray(class_sizes) - base.sum(axis=1)
    col_def = np.asarray(split_sizes) - base.sum(axis=0)
    g = nx.DiGraph()
    for c, r in enumerate(row_def):
        g.add_edge("s", ("c", c), capacity=int(r))
    for k, d in enumerate(col_def):
        g.add_edge(("k", k), "t", capacity=int(d))
    for c, k in zip(*np.nonzero(frac)):
        g.add_edge(("c", int(c)), ("k", int(k)), capacity=1)
    _, flow = nx.maximum_flow(g, "s", "t")
    for c, k in zip(*np.nonzero(frac)):
        base[c, k] += flow[("c", int(c))][("k", int(k))]
    return base


def split(dataset, spec):
    """Stratified, seeded train/val/test partition.

    Sizes are floor(frac * n) for val and test; training takes
    floor(total_frac * n) minus those, so flooring remainders land in train.
    Per-class counts are a controlled rounding of the proportional table, so
    every split is within one record per class of the global class ratio.
    """
    if not len(dataset):
        raise EmptyDatasetError("cannot split an empty dataset")
    rng = np.random.default_rng(spec.seed)
    labels = dataset.labels
    n = len(labels)
    covered = math.floor((spec.train_frac + spec.val_frac + spec.test_frac) * n + 1e-9)
    n_val = math.floor(spec.val_frac * n + 1e-9)
    n_test = math.floor(spec.test_frac * n + 1e-9)
    sizes = [covered - n_val - n_test, n_val, n_test, n - covered]
    class_sizes = np.bincount(labels, minlength=len(dataset.class_names))
    table = _controlled_round(class_sizes, sizes)
    parts = [[], [], []]
    for c in range(len(class_sizes)):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(len(idx))]
        bounds = np.cumsum(table[c])
        start = 0
        for k in range(3):
            parts[k].extend(idx[start:bounds[k]].tolist())
            start = bounds[k]
    out = []
    for name, p in zip(("train", "val", "test"), parts):
        p = np.asarray(p, dtype=np.int64)
        p = p[rng.permutation(len(p))]
        out.append(dataset.subset(p.tolist(), f"{dataset.source_id}#{name}"))
    return tuple(out)


def filter_short(dataset, max_len):
    """Keep records whose url has fewer than ``max_len`` characters."""
    if max_len < 1:
        raise SpecError("max_len must be >= 1")
    return dataset.subset([i for i, r in enumerate(dataset.records) if len(r.url) < max_len])


def class_stats(dataset):
    if not len(dataset):
        raise EmptyDatasetError("no records")
    C = len(dataset.class_names)
    counts = np.bincount(dataset.labels, minlength=C)
    ratio = float(counts.max()) / float(counts.min()) if counts.min() > 0 else math.inf
    hist = {name: {} for name in dataset.class_names}
    for r in dataset.records:
        b = (len(r.url) // LENGTH_BUCKET) * LENGTH_BUCKET
        h = hist[dataset.class_names[r.label]]
        h[b] = h.get(b, 0) + 1
    hist = {k: dict(sorted(v.items())) for k, v in hist.items()}
    return ClassStats({n: int(c) for n, c in zip(dataset.class_names, counts)}, ratio, hist)
