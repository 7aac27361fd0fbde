"""Attribute generated images to their generator from low-bit-plane fingerprints."""

from ._lida import (
    DEFAULT_THRESHOLD,
    REAL_LABEL,
    Checkpoint,
    ConfigError,
    CorruptFile,
    DegenerateFeature,
    Encoder,
    InvalidArgument,
    IoError,
    LidaError,
    NotPretrained,
    NumericalFailure,
    Registry,
    adapt,
    attribute,
    cosine_similarity,
    degrade,
    detect,
    evaluate,
    fingerprint,
    generator_names,
    pretrain,
    read_image,
    synthesize,
    write_image,
)

__all__ = [name for name in dir() if not name.startswith("_")]
