"""Evasive-character perturbation of the registrable domain label.

``goo|gle.com`` -> ``goo-gle.com`` (hyphen) or ``gooogle.com`` (duplicate).
Boundaries come from the subword vocabulary; a label that is a single
subword falls back to its character boundaries.
"""

import math
import re
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..errors import SpecError
from ..tokenizer import CONT, DELIMITERS, UNK_SURFACE, encode_subwords

MODES = ("hyphen", "duplicate", "both")
_delim = re.compile("[" + re.escape(DELIMITERS) + "]")


@dataclass(frozen=True)
class AdversarialSpec:
    mode: str = "hyphen"
    ratio: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise SpecError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0 < self.ratio <= 1:
            raise SpecError(f"ratio must lie in (0, 1], got {self.ratio}")


class Perturbed(NamedTuple):
    url: str
    inserted: int  # 0 means the URL came back unchanged

    @property
    def noop(self):
        return self.inserted == 0


def host_span(url):
    """(start, end) of the host inside ``url``, or None."""
    i = url.find("://")
    start = i + 3 if i >= 0 else 0
    end = len(url)
    for sep in "/?#":
        j = url.find(sep, start)
        if j >= 0:
            end = min(end, j)
    host = url[start:end]
    at = host.rfind("@")
    if at >= 0:
        start += at + 1
    colon = url.find(":", start, end)
    if colon >= 0:
        end = colon
    return (start, end) if end > start else None


def label_span(url):
    """Span of the registrable-domain label (second-to-last host label)."""
    span = host_span(url)
    if span is None:
        return None
    start, end = span
    host = url[start:end]
    dots = [i for i, ch in enumerate(host) if ch == "."]
    if not dots:
        return None
    right = dots[-1]
    left = dots[-2] + 1 if len(dots) > 1 else 0
    return start + left, start + right


def _piece_len(surface):
    if surface == UNK_SURFACE:
        return 1
    return len(surface) - len(CONT) if surface.startswith(CONT) else len(surface)


def boundaries(label, vocab):
    """Interior split points of ``label`` between adjacent subword pieces."""
    out, pos = [], 0
    for frag in _delim.split(label):
        if frag:
            off = pos
            for s in encode_subwords(frag, vocab).surfaces[:-1]:
                off += _piece_len(s)
                out.append(off)
        pos += len(frag) + 1
    if not out:
        pos = 0
        for frag in _delim.split(label):
            out.extend(pos + k for k in range(1, len(frag)))
            pos += len(frag) + 1
    return out


def perturb_adversarial(url, vocab, spec, index=0):
    """Insert evasive characters at seeded subword boundaries of the domain label.

    Scheme, subdomains, TLD, path and query are left untouched.  ``index``
    decorrelates the draws of different URLs perturbed under one seed.
    """
    span = label_span(url)
    if span is None:
        return Perturbed(url, 0)
    a, b = span
    label = url[a:b]
    if len(label) < 2:
        return Perturbed(url, 0)
    cuts = boundaries(label, vocab)
    k = math.ceil(spec.ratio * len(cuts) - 1e-9)
    if k <= 0:
        return Perturbed(url, 0)
    rng = np.random.default_rng([spec.seed, index])
    chosen = sorted(rng.choice(len(cuts), size=k, replace=False).tolist())
    out = label
    for c in reversed([cuts[i] for i in chosen]):
        prev = out[c - 1]
        ins = {"hyphen": "-", "duplicate": prev, "both": prev + "-"}[spec.mode]
        out = out[:c] + ins + out[c:]
    return Perturbed(url[:a] + out + url[b:], k)


def perturb_dataset(dataset, vocab, spec, only_label=None):
    """Perturb every record (or only those with ``only_label``); labels are kept."""
    urls = []
    for i, r in enumerate(dataset.records):
        if only_label is None or r.label == only_label:
            urls.append(perturb_adversarial(r.url, vocab, spec, i).url)
        else:
            urls.append(r.url)
    return dataset.replace_urls(urls, f"{dataset.source_id}#adv-{spec.mode}-{spec.ratio}")
