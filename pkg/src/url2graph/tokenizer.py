"""Subword and character views of a URL.

The subword vocabulary is trained with a byte-pair-style merge procedure
inside delimiter-bounded fragments.  Vocabulary entries are plain strings;
pieces that do not start a fragment are emitted with a ``##`` surface prefix
but share the id of the plain entry.
"""

import heapq
import re
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path

from .errors import DataFormatError, SpecError

PAD, UNK = 0, 1
PAD_SURFACE, UNK_SURFACE = "[PAD]", "[UNK]"
CONT = "##"
DELIMITERS = "/.?=&-_:@~%+#"
ALPHABET = "".join(chr(c) for c in range(33, 127))
ALPHABET_SIZE = len(ALPHABET) + 2  # 96
MAX_SUBWORD_LEN = 128
MAX_CHAR_LEN = 256
VOCAB_HEADER = "#url2graph-vocab v1"

_split_re = re.compile("[" + re.escape(DELIMITERS) + r"]+")
_char_id = {ch: i + 2 for i, ch in enumerate(ALPHABET)}


def char_id(ch):
    return _char_id.get(ch, UNK)


def char_surface(i):
    if i == PAD:
        return PAD_SURFACE
    if i == UNK:
        return UNK_SURFACE
    return ALPHABET[i - 2]


def fragments(url):
    return [f for f in _split_re.split(url) if f]


@dataclass(frozen=True)
class TokenSeq:
    ids: tuple
    surfaces: tuple

    def __len__(self):
        return len(self.ids)


@dataclass(frozen=True)
class CharSeq:
    ids: tuple

    def __len__(self):
        return len(self.ids)


class SubwordVocab:
    def __init__(self, surfaces, freqs):
        if list(surfaces[:2]) != [PAD_SURFACE, UNK_SURFACE]:
            raise DataFormatError("vocab must start with PAD and UNK")
        self.surfaces = tuple(surfaces)
        self.freqs = tuple(int(f) for f in freqs)
        self.token_to_id = {s: i for i, s in enumerate(self.surfaces)}
        if len(self.token_to_id) != len(self.surfaces):
            raise DataFormatError("duplicate vocab surface")
        # Literal "[PAD]" / "[UNK]" text in a URL must not encode as a special id.
        self.piece_to_id = {s: i for s, i in self.token_to_id.items() if i > UNK}
        self.max_piece = max(len(s) for s in self.surfaces[2:]) if len(self.surfaces) > 2 else 1

    def __len__(self):
        return len(self.surfaces)

    def __contains__(self, token):
        return token in self.token_to_id

    def __eq__(self, other):
        return isinstance(other, SubwordVocab) and self.surfaces == other.surfaces and self.freqs == other.freqs

    def surface(self, i):
        return self.surfaces[i]

    def save(self, path):
        Path(path).write_text(self.dumps(), encoding="utf-8")

    def dumps(self):
        lines = [VOCAB_HEADER]
        lines += [f"{s}\t{i}\t{f}" for i, (s, f) in enumerate(zip(self.surfaces, self.freqs))]
        return "\n".join(lines) + "\n"

    @classmethod
    def load(cls, path):
        text = Path(path).read_text(encoding="utf-8")
        lines = text.splitlines()
        if not lines or lines[0].strip() != VOCAB_HEADER:
            raise DataFormatError(f"{path}: missing vocab header")
        surfaces, freqs = [], []
        for n, line in enumerate(lines[1:], start=2):
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataFormatError(f"{path}:{n}: expected 3 tab-separated fields")
            s, i, f = parts
            if int(i) != len(surfaces):
                raise DataFormatError(f"{path}:{n}: ids must be dense and ordered")
            # WordPiece-style exports mark continuations; we key on the plain piece.
            if s.startswith(CONT) and len(s) > len(CONT):
                s = s[len(CONT):]
            surfaces.append(s)
            freqs.append(int(f))
        return cls(surfaces, freqs)


def train_subword_vocab(corpus, target_size, min_freq=2):
    """Frequency-ranked pair merging within delimiter-bounded fragments.

    Seeds are PAD, UNK and the 94 printable ASCII characters.  Each round
    merges the most frequent adjacent pair (ties: lexicographically smallest
    merged surface) until ``target_size`` entries exist or the best pair
    falls below ``min_freq``.
    """
    corpus = list(corpus)
    if not corpus:
        raise SpecError("empty corpus")
    seed_size = 2 + len(ALPHABET)
    if target_size < seed_size:
        raise SpecError(f"target_size {target_size} smaller than seed set {seed_size}")

    frag_counts = Counter()
    for url in corpus:
        frag_counts.update(fragments(url))
    words = [list(w) for w in frag_counts]
    wcounts = list(frag_counts.values())

    char_freq = Counter()
    for w, c in zip(words, wcounts):
        for ch in w:
            char_freq[ch] += c
    surfaces = [PAD_SURFACE, UNK_SURFACE] + list(ALPHABET)
    freqs = [0, 0] + [char_freq.get(ch, 0) for ch in ALPHABET]
    known = set(surfaces)

    pair_freq = defaultdict(int)
    where = defaultdict(set)
    for wi, (w, c) in enumerate(zip(words, wcounts)):
        for p in zip(w, w[1:]):
            _bump(pair_freq, where, {}, p, c, wi)

    heap = [(-f, a + b, (a, b)) for (a, b), f in pair_freq.items()]
    heapq.heapify(heap)

    while len(surfaces) < target_size and heap:
        negf, merged, pair = heapq.heappop(heap)
        f = pair_freq.get(pair, 0)
        if f <= 0:
            continue
        if -negf != f:
            heapq.heappush(heap, (-f, merged, pair))
            continue
        if f < min_freq:
            break
        if merged not in known:
            known.add(merged)
            surfaces.append(merged)
            freqs.append(f)
        a, b = pair
        touched = {}
        for wi in sorted(where.pop(pair, ())):
            w, c = words[wi], wcounts[wi]
            for x, y in zip(w, w[1:]):
                _bump(pair_freq, where, touched, (x, y), -c, wi)
            out, i = [], 0
            while i < len(w):
                if i + 1 < len(w) and w[i] == a and w[i + 1] == b:
                    out.append(merged)
                    i += 2
                else:
                    out.append(w[i])
                    i += 1
            words[wi] = out
            for x, y in zip(out, out[1:]):
                _bump(pair_freq, where, touched, (x, y), c, wi)
        pair_freq.pop(pair, None)
        for p in touched:
            fp = pair_freq.get(p, 0)
            if fp > 0 and p != pair:
                heapq.heappush(heap, (-fp, p[0] + p[1], p))
    return SubwordVocab(surfaces, freqs)


def _bump(pair_freq, where, touched, p, delta, wi):
    x, y = p
    # Characters outside the alphabet never merge.
    if (len(x) == 1 and x not in _char_id) or (len(y) == 1 and y not in _char_id):
        return
    pair_freq[p] += delta
    if delta > 0:
        where[p].add(wi)
    elif pair_freq[p] <= 0:
        pair_freq.pop(p, None)
        where.pop(p, None)
    touched[p] = True


def encode_subwords(url, vocab, max_len=MAX_SUBWORD_LEN):
    """Greedy longest-match inside each delimiter-free fragment.

    Delimiters are dropped; a character with no vocab entry becomes UNK.
    """
    ids, surfaces = [], []
    t2i = vocab.piece_to_id
    for frag in fragments(url):
        i = 0
        while i < len(frag) and len(ids) < max_len:
            piece = None
            for j in range(min(len(frag), i + vocab.max_piece), i, -1):
                if frag[i:j] in t2i:
                    piece = frag[i:j]
                    break
            if piece is None:
                ids.append(UNK)
                surfaces.append(UNK_SURFACE)
                i += 1
                continue
            ids.append(t2i[piece])
            surfaces.append(piece if i == 0 else CONT + piece)
            i += len(piece)
    if not ids:
        return TokenSeq((UNK,), (UNK_SURFACE,))
    return TokenSeq(tuple(ids), tuple(surfaces))


def encode_chars(url, max_len=MAX_CHAR_LEN):
    ids = tuple(char_id(ch) for ch in url[:max_len])
    return CharSeq(ids if ids else (UNK,))
