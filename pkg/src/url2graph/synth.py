"""Seeded synthetic URL corpus with labels known by construction.

Malicious URLs carry a planted path-token pair (e.g. ``account/verify``)
and/or digit-for-letter homoglyphs in the domain (``g00gle``); every
malicious URL carries at least one, most carry both.  Benign URLs use the
clean brand names and include digits elsewhere (ids, pages) so a digit alone
is not decisive.  A fixed fraction of URLs is built short (< ``SHORT_LEN``
characters); all others are padded to at least ``SHORT_LEN``.
"""

from dataclasses import dataclass

import numpy as np

from .corpus import Dataset, UrlRecord

SHORT_LEN = 40

BRANDS = ["google", "paypal", "amazon", "apple", "microsoft", "netflix", "github", "linkedin", "facebook",
          "dropbox", "outlook", "wellsfargo", "chase", "adobe", "yahoo", "instagram", "spotify", "ebay",
          "coinbase", "steam"]
NEUTRAL = ["news", "shop", "travel", "recipes", "weather", "sports", "music", "photo", "garden", "books",
           "cloud", "market", "health", "study", "games", "media", "forum", "daily", "local", "tech"]
BENIGN_TLDS = ["com", "org", "net", "io", "edu"]
MAL_TLDS = ["com", "net", "xyz", "top", "info", "online"]
BENIGN_PATH = ["search", "docs", "about", "help", "blog", "articles", "images", "products", "careers", "support",
               "account", "settings", "profile", "home", "video", "store", "events", "contact", "team", "faq"]
# Planted pairs; each token may also occur alone in benign paths.
MOTIFS = [("account", "verify"), ("secure", "login"), ("update", "confirm"), ("signin", "validate"),
          ("billing", "unlock")]
BENIGN_SINGLES = ["account", "login", "update", "billing", "secure"]
HOMOGLYPHS = {"o": "0", "l": "1", "i": "1", "e": "3", "a": "4", "s": "5", "g": "9"}


@dataclass(frozen=True)
class SynthRecord:
    url: str
    label: int
    short: bool
    motif: bool
    homoglyph: bool


def _homoglyph(word, rng):
    spots = [i for i, ch in enumerate(word) if ch in HOMOGLYPHS]
    if not spots:
        return word + "1"
    k = int(rng.integers(1, min(2, len(spots)) + 1))
    chosen = set(rng.choice(spots, size=k, replace=False).tolist())
    return "".join(HOMOGLYPHS[ch] if i in chosen else ch for i, ch in enumerate(word))


def _pick(rng, seq):
    return seq[int(rng.integers(len(seq)))]


def _benign(rng, short):
    scheme = _pick(rng, ["http://", "https://"])
    host = _pick(rng, BRANDS + NEUTRAL)
    sub = "www." if rng.random() < 0.5 else ""
    tld = _pick(rng, BENIGN_TLDS)
    parts = [_pick(rng, BENIGN_PATH)]
    if rng.random() < 0.3:
        parts.append(_pick(rng, BENIGN_SINGLES))
    if short:
        return f"{scheme}{sub}{host}.{tld}/" + "/".join(parts[:1])
    parts += [_pick(rng, BENIGN_PATH) for _ in range(int(rng.integers(1, 3)))]
    url = f"{scheme}{sub}{host}.{tld}/" + "/".join(parts)
    if rng.random() < 0.6:
        url += f"?id={int(rng.integers(100, 99999))}&page={int(rng.integers(1, 40))}"
    return url


def _malicious(rng, short, motif, homoglyph):
    scheme = _pick(rng, ["http://", "https://"])
    brand = _pick(rng, BRANDS)
    host = _homoglyph(brand, rng) if homoglyph else _pick(rng, NEUTRAL) + _pick(rng, ["-online", "-portal", "hub"])
    tld = _pick(rng, MAL_TLDS)
    a, b = _pick(rng, MOTIFS) if motif else (_pick(rng, BENIGN_PATH), None)
    path = f"{a}/{b}" if b else a
    if short:
        return f"{scheme}{host}.{tld}/{path}"
    extra = [_pick(rng, BENIGN_PATH) for _ in range(int(rng.integers(0, 2)))]
    url = f"{scheme}{host}.{tld}/" + "/".join(extra + [path])
    if rng.random() < 0.5:
        url += ".php"
    if rng.random() < 0.5:
        url += f"?session={int(rng.integers(1000, 999999))}"
    return url


def _fit(make, short, rng):
    for _ in range(1000):
        url = make()
        if short and len(url) < SHORT_LEN:
            return url
        if not short:
            while len(url) < SHORT_LEN:
                url += ("&" if "?" in url else "?") + f"ref={_pick(rng, NEUTRAL)}"
            return url
    raise RuntimeError("could not build a short URL")


def generate(n, seed=0, malicious_frac=0.5, short_frac=0.25, motif_prob=0.7, homoglyph_prob=0.7):
    """``n`` labeled records; flags say which signals each malicious URL carries."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        mal = rng.random() < malicious_frac
        short = rng.random() < short_frac
        if mal:
            motif = rng.random() < motif_prob
            homo = rng.random() < homoglyph_prob
            if not (motif or homo):
                motif, homo = (True, False) if rng.random() < 0.5 else (False, True)
            url = _fit(lambda: _malicious(rng, short, motif, homo), short, rng)
            out.append(SynthRecord(url, 1, short, motif, homo))
        else:
            url = _fit(lambda: _benign(rng, short), short, rng)
            out.append(SynthRecord(url, 0, short, False, False))
    return out


def to_dataset(records, source_id="synthetic"):
    return Dataset(tuple(UrlRecord(r.url, r.label) for r in records), ("benign", "malicious"), source_id)


def generate_splits(n_train=4000, n_val=500, n_test=1000, seed=0, **kw):
    recs = generate(n_train + n_val + n_test, seed, **kw)
    tr, va, te = recs[:n_train], recs[n_train:n_train + n_val], recs[n_train + n_val:]
    return tr, va, te
