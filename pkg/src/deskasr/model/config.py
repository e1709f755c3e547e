"""Model configuration and named presets."""

from __future__ import annotations

from dataclasses import dataclass, asdict

from deskasr.errors import ConfigError


@dataclass
class ModelConfig:
    """Sizes for the encoder / attention / decoder stack.

    Defaults are the desk-scale test configuration; the full-scale presets
    below document the production-sized layout.
    """

    feature_dim: int = 320
    enc_layers: int = 3
    enc_units: int = 64
    bidirectional: bool = False
    dec_layers: int = 1
    dec_units: int = 64
    attention_heads: int = 2
    attention_dim: int = 32
    vocab_size: int = 60
    embedding_dim: int = 16

    def __post_init__(self):
        if self.attention_heads < 1:
            raise ConfigError("attention_heads must be >= 1")
        for field_name in ("feature_dim", "enc_layers", "enc_units", "dec_layers",
                           "dec_units", "attention_dim", "vocab_size", "embedding_dim"):
            if getattr(self, field_name) < 1:
                raise ConfigError(f"{field_name} must be positive")

    @property
    def enc_output_dim(self) -> int:
        return self.enc_units * (2 if self.bidirectional else 1)

    @property
    def context_dim(self) -> int:
        # concatenated head contexts are projected back to decoder width
        return self.dec_units

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


def micro_config(vocab_size: int = 6, feature_dim: int = 10) -> ModelConfig:
    """Tiny layout used by finite-difference checks."""
    return ModelConfig(feature_dim=feature_dim, enc_layers=2, enc_units=8,
                       bidirectional=False, dec_layers=1, dec_units=8,
                       attention_heads=2, attention_dim=8,
                       vocab_size=vocab_size, embedding_dim=4)


def full_scale_unidirectional(vocab_size: int) -> ModelConfig:
    """Production-sized streaming layout (documentation preset; heavy)."""
    return ModelConfig(feature_dim=320, enc_layers=5, enc_units=1400,
                       bidirectional=False, dec_layers=2, dec_units=1024,
                       attention_heads=4, attention_dim=512,
                       vocab_size=vocab_size, embedding_dim=96)


def full_scale_bidirectional(vocab_size: int) -> ModelConfig:
    """Production-sized offline layout (documentation preset; heavy)."""
    return ModelConfig(feature_dim=320, enc_layers=5, enc_units=1024,
                       bidirectional=True, dec_layers=2, dec_units=1024,
                       attention_heads=4, attention_dim=512,
                       vocab_size=vocab_size, embedding_dim=96)
