from dataclasses import asdict, dataclass, fields

from ..encoders import EncoderConfig
from ..errors import SpecError


@dataclass
class TrainConfig:
    batch_size: int = 32
    epochs: int = 20
    lr: float = 1e-3
    seed: int = 0
    patience: int = 3
    freeze_semantic: bool = False
    class_weighting: bool = False
    theta_word: float = 0.2
    theta_char: float = 0.2
    min_pair_count: int = 5
    vocab_size: int = 8000
    min_freq: int = 2
    max_subword_len: int = 128
    max_char_len: int = 256
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
        self.widths = tuple(int(w) for w in self.widths)
        if self.batch_size < 1:
            raise SpecError("batch_size must be >= 1")
        if self.epochs < 1 or self.patience < 0 or self.lr <= 0:
            raise SpecError("epochs >= 1, patience >= 0 and lr > 0 required")
        for name in ("theta_word", "theta_char"):
            if not -1 <= getattr(self, name) < 1:
                raise SpecError(f"{name} must lie in [-1, 1)")
        if self.min_pair_count < 1 or self.min_freq < 1:
            raise SpecError("min_pair_count and min_freq must be >= 1")

    def encoder(self):
        return EncoderConfig(d_c=self.d_c, widths=self.widths, n_k=self.n_k, d_t=self.d_t, layers=self.layers,
                             heads=self.heads, positional=self.positional, d_g=self.d_g, gcn_layers=self.gcn_layers)

    def to_json(self):
        d = asdict(self)
        d["widths"] = list(self.widths)
        return d

    @classmethod
    def from_json(cls, d):
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})
