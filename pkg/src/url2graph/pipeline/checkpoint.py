"""Binary checkpoint: magic, version, JSON config block, tensor table.

Layout (little-endian)::

    b"U2GPP" | u16 version | u32 len + UTF-8 JSON config
    u32 tensor count
    per tensor: u32 len + UTF-8 name | u32 rank | rank x u64 dims | prod(dims) x f64
"""

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ArtifactError, DataFormatError
from ..fusion import GROUPS, Artifacts, ModelParams
from ..tokenizer import SubwordVocab
from ..urlgraph import GlobalGraph
from .config import TrainConfig

MAGIC = b"U2GPP"
VERSION = 1


def digest_bytes(data):
    return hashlib.sha256(data).hexdigest()


def digest_file(path):
    return digest_bytes(Path(path).read_bytes())


def artifact_digests(artifacts):
    return {
        "vocab": digest_bytes(artifacts.vocab.dumps().encode("utf-8")),
        "word_graph": digest_bytes(artifacts.g_word.dumps().encode("utf-8")),
        "char_graph": digest_bytes(artifacts.g_char.dumps().encode("utf-8")),
    }


@dataclass
class Checkpoint:
    config: TrainConfig
    params: ModelParams
    artifacts: Artifacts
    class_names: tuple = ("benign", "malicious")
    positive_class: int = 1
    artifact_paths: dict = field(default_factory=dict)
    digests: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.digests:
            self.digests = artifact_digests(self.artifacts)


def _meta(ckpt):
    p = ckpt.params
    return {
        "config": ckpt.config.to_json(),
        "class_names": list(ckpt.class_names),
        "positive_class": ckpt.positive_class,
        "vocab_size": p.vocab_size,
        "num_classes": p.num_classes,
        "frozen": dict(p.frozen),
        "digests": dict(ckpt.digests),
        "artifacts": {k: str(v) for k, v in ckpt.artifact_paths.items()},
    }


def save_checkpoint(ckpt, path):
    meta = json.dumps(_meta(ckpt), sort_keys=True).encode("utf-8")
    tensors = ckpt.params.named_tensors()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HI", VERSION, len(meta)))
        fh.write(meta)
        fh.write(struct.pack("<I", len(tensors)))
        for name, t in tensors.items():
            nb = name.encode("utf-8")
            fh.write(struct.pack("<I", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<I", t.data.ndim))
            fh.write(struct.pack(f"<{t.data.ndim}Q", *t.data.shape))
            fh.write(np.ascontiguousarray(t.data, dtype="<f8").tobytes())


def read_checkpoint(path):
    """Parse the file into (meta dict, {name: ndarray})."""
    data = Path(path).read_bytes()
    if data[:5] != MAGIC:
        raise DataFormatError(f"{path}: not a checkpoint (bad magic)")
    try:
        version, mlen = struct.unpack_from("<HI", data, 5)
        if version != VERSION:
            raise DataFormatError(f"{path}: unsupported checkpoint version {version}")
        off = 11
        meta = json.loads(data[off:off + mlen].decode("utf-8"))
        off += mlen
        (count,) = struct.unpack_from("<I", data, off)
        off += 4
        tensors = {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<I", data, off)
            off += 4
            name = data[off:off + nlen].decode("utf-8")
            off += nlen
            (rank,) = struct.unpack_from("<I", data, off)
            off += 4
            dims = struct.unpack_from(f"<{rank}Q", data, off)
            off += 8 * rank
            n = int(np.prod(dims)) if rank else 1
            arr = np.frombuffer(data, dtype="<f8", count=n, offset=off).reshape(dims).astype(np.float64)
            off += 8 * n
            tensors[name] = arr
    except (struct.error, ValueError, UnicodeDecodeError) as err:
        raise DataFormatError(f"{path}: truncated or corrupt checkpoint ({err})") from None
    if off != len(data):
        raise DataFormatError(f"{path}: {len(data) - off} trailing bytes")
    return meta, tensors


def load_artifacts(vocab_path, word_path, char_path, cfg=None):
    kw = {}
    if cfg is not None:
        kw = {"max_subword_len": cfg.max_subword_len, "max_char_len": cfg.max_char_len}
    return Artifacts(SubwordVocab.load(vocab_path), GlobalGraph.load(word_path), GlobalGraph.load(char_path), **kw)


def load_checkpoint(path, vocab=None, word_graph=None, char_graph=None, allow_mismatch=False, artifacts=None):
    """Rebuild a Checkpoint; artifact files default to the paths recorded at save time.

    File digests must match the ones recorded at training unless
    ``allow_mismatch`` is set.
    """
    meta, tensors = read_checkpoint(path)
    cfg = TrainConfig.from_json(meta["config"])
    recorded = meta.get("artifacts", {})
    base = Path(path).parent
    paths = {
        "vocab": vocab or recorded.get("vocab"),
        "word_graph": word_graph or recorded.get("word_graph"),
        "char_graph": char_graph or recorded.get("char_graph"),
    }
    if artifacts is None:
        resolved = {}
        for k, v in paths.items():
            if not v:
                raise ArtifactError(f"no {k} file recorded in checkpoint; pass it explicitly")
            pth = Path(v)
            if not pth.is_absolute() and not pth.exists() and (base / pth).exists():
                pth = base / pth
            if not pth.exists():
                raise ArtifactError(f"{k} file not found: {pth}")
            resolved[k] = pth
        digests = {k: digest_file(v) for k, v in resolved.items()}
        artifacts = load_artifacts(resolved["vocab"], resolved["word_graph"], resolved["char_graph"], cfg)
        paths = resolved
    else:
        digests = artifact_digests(artifacts)
    bad = [k for k in digests if digests[k] != meta["digests"].get(k)]
    if bad and not allow_mismatch:
        raise ArtifactError(f"artifact digest mismatch for {', '.join(bad)} (override to load anyway)")
    params = ModelParams.init(cfg.encoder(), meta["vocab_size"], meta["num_classes"], seed=0)
    named = params.named_tensors()
    if set(named) != set(tensors):
        raise ArtifactError(f"tensor names differ from model layout: {sorted(set(named) ^ set(tensors))[:5]}")
    for name, t in named.items():
        if t.data.shape != tensors[name].shape:
            raise ArtifactError(f"{name}: shape {tensors[name].shape} != expected {t.data.shape}")
        t.data = tensors[name]
    for g in GROUPS:
        if meta.get("frozen", {}).get(g):
            params.freeze(g)
    return Checkpoint(cfg, params, artifacts, tuple(meta["class_names"]), meta.get("positive_class", 1),
                      {k: str(v) for k, v in paths.items()}, dict(meta["digests"]))
