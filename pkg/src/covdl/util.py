"""Small shared helpers."""

from __future__ import annotations

import numpy as np


def rng_stream(seed: int, stream: int) -> np.random.Generator:
    """Independent, reproducible generator for one named stream of a seed.

    Different modules drawing from the same experiment seed use distinct
    stream ids so their draws never overlap even if the draw patterns match.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(stream,)))


def as_matrix(x, name: str = "array") -> np.ndarray:
    """Coerce to a 2-D float64 array, rejecting anything else."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr
