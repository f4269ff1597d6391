"""Rotation-invariant descriptors and set networks for sparse point clouds."""

from ._sparse3d import (
    Error,
    FormatError,
    ParseError,
    decode_voxels,
    descriptors,
    evaluate,
    feature_width,
    latents,
    normalize_config,
    parse_off,
    random_rotation,
    retrieval,
    sample_off,
    selftest,
    synth_shape,
    train,
)

__all__ = [
    "Error",
    "FormatError",
    "ParseError",
    "decode_voxels",
    "descriptors",
    "evaluate",
    "feature_width",
    "latents",
    "normalize_config",
    "parse_off",
    "random_rotation",
    "retrieval",
    "sample_off",
    "selftest",
    "synth_shape",
    "train",
]
