"""Covariance-domain primitives.

A multichannel recording is cut into (possibly overlapping) fixed-length
segments, each segment is summarized by its sample covariance, and the
covariances are half-vectorized into columns of a training matrix.  All
downstream identification runs on that lifted matrix, whose rows live in
R^{M(M+1)/2} for an M-channel recording.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DimensionError, SegmentationError
from .util import as_matrix

__all__ = [
    "ChannelRecording",
    "SegmentationPlan",
    "CovarianceDataset",
    "vech",
    "vech_inv",
    "segment",
    "lift",
]


@lru_cache(maxsize=None)
def _vech_indices(m: int) -> tuple[np.ndarray, np.ndarray]:
    # Lower-triangle (i, j) pairs, i >= j, in column-major order:
    # (0,0),(1,0),...,(M-1,0),(1,1),...,(M-1,M-1).
    cols, rows = np.triu_indices(m)
    return rows, cols


@lru_cache(maxsize=None)
def _offdiag_weights(m: int) -> np.ndarray:
    rows, cols = _vech_indices(m)
    w = np.ones(rows.size)
    w[rows != cols] = np.sqrt(2.0)
    return w


def vech_len(m: int) -> int:
    """Length of the half-vectorization of an m x m symmetric matrix."""
    return m * (m + 1) // 2


def side_from_vech_len(length: int) -> int:
    """Matrix side m such that m(m+1)/2 == length, or raise."""
    m = int((np.sqrt(8.0 * length + 1.0) - 1.0) / 2.0 + 0.5)
    if m < 1 or m * (m + 1) // 2 != length:
        raise DimensionError(
            f"vector length {length} is not a triangular number m(m+1)/2"
        )
    return m


def vech(mat, weighted: bool = False) -> np.ndarray:
    """Half-vectorize a symmetric matrix.

    Stacks the lower-triangular entries column by column.  With
    ``weighted=True`` the off-diagonal entries are scaled by sqrt(2) so that
    the Euclidean inner product of two weighted vectors equals the Frobenius
    inner product of the corresponding symmetric matrices.

    Parameters
    ----------
    mat : array_like, shape (m, m)
        Symmetric matrix (asymmetry up to 1e-8 relative is symmetrized away).
    weighted : bool
        Scale off-diagonal entries by sqrt(2).

    Returns
    -------
    ndarray, shape (m*(m+1)/2,)
    """
    arr = as_matrix(mat, "vech input")
    m = arr.shape[0]
    if arr.shape[1] != m:
        raise DimensionError(f"vech needs a square matrix, got {arr.shape}")
    scale = max(1.0, float(np.abs(arr).max())) if arr.size else 1.0
    if float(np.abs(arr - arr.T).max(initial=0.0)) > 1e-8 * scale:
        raise ValueError("vech input is not symmetric within 1e-8")
    arr = 0.5 * (arr + arr.T)
    rows, cols = _vech_indices(m)
    v = arr[rows, cols]
    if weighted:
        v = v * _offdiag_weights(m)
    return v


def vech_inv(v, weighted: bool = False) -> np.ndarray:
    """Rebuild the symmetric matrix whose half-vectorization is ``v``.

    Exact inverse of :func:`vech`: ``vech(vech_inv(v)) == v`` bit-for-bit in
    the unweighted mode.
    """
    vec = np.asarray(v, dtype=float)
    if vec.ndim != 1:
        raise DimensionError(f"vech_inv needs a 1-D vector, got shape {vec.shape}")
    m = side_from_vech_len(vec.size)
    if weighted:
        vec = vec / _offdiag_weights(m)
    rows, cols = _vech_indices(m)
    out = np.zeros((m, m))
    out[rows, cols] = vec
    out[cols, rows] = vec
    return out


@dataclass(frozen=True)
class ChannelRecording:
    """Multichannel time series: ``data`` is channels x frames."""

    data: np.ndarray
    sample_rate: float

    def __post_init__(self):
        arr = as_matrix(self.data, "recording data")
        if arr.shape[0] < 2 or arr.shape[1] < 2:
            raise DimensionError(
                f"recording needs >= 2 channels and >= 2 frames, got {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("recording data contains non-finite entries")
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "sample_rate", float(self.sample_rate))

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_frames(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class SegmentationPlan:
    """Fixed-length segmentation with a fractional overlap between neighbours."""

    segment_seconds: float
    overlap_ratio: float = 0.0

    def __post_init__(self):
        if not self.segment_seconds > 0:
            raise ValueError("segment_seconds must be positive")
        if not 0.0 <= self.overlap_ratio < 1.0:
            raise ValueError("overlap_ratio must lie in [0, 1)")

    def frames(self, sample_rate: float) -> int:
        """Segment length in frames at the given rate (floor)."""
        return int(self.segment_seconds * sample_rate)

    def stride(self, sample_rate: float) -> int:
        length = self.frames(sample_rate)
        return max(1, int(length * (1.0 - self.overlap_ratio)))


@dataclass(frozen=True)
class CovarianceDataset:
    """Half-vectorized per-segment sample covariances, one column per segment."""

    lifted: np.ndarray
    n_channels: int
    segment_frames: int
    weighted: bool = False

    def __post_init__(self):
        arr = as_matrix(self.lifted, "lifted data")
        if arr.shape[0] != vech_len(self.n_channels):
            raise DimensionError(
                f"lifted rows {arr.shape[0]} do not match "
                f"M(M+1)/2 = {vech_len(self.n_channels)} for M = {self.n_channels}"
            )
        if arr.shape[1] < 1:
            raise DimensionError("lifted dataset needs at least one segment")
        if not np.all(np.isfinite(arr)):
            raise ValueError("lifted data contains non-finite entries")
        object.__setattr__(self, "lifted", arr)

    @property
    def n_segments(self) -> int:
        return self.lifted.shape[1]

    def covariance(self, s: int) -> np.ndarray:
        """Un-vectorized sample covariance of segment ``s``."""
        return vech_inv(self.lifted[:, s], weighted=self.weighted)

    def min_relative_eigenvalue(self) -> float:
        """Smallest (min eig / max eig) over all segment covariances.

        Sample covariances are PSD up to round-off, so this should never sit
        meaningfully below zero.
        """
        worst = np.inf
        for s in range(self.n_segments):
            eigs = np.linalg.eigvalsh(self.covariance(s))
            top = max(eigs[-1], np.finfo(float).tiny)
            worst = min(worst, eigs[0] / top)
        return float(worst)


def segment(rec: ChannelRecording, plan: SegmentationPlan) -> list[tuple[int, int]]:
    """Frame ranges ``(start, stop)`` of every full segment under the plan.

    Segments have exactly ``floor(segment_seconds * sample_rate)`` frames;
    a trailing partial segment is discarded.
    """
    length = plan.frames(rec.sample_rate)
    if length < 2:
        raise SegmentationError(
            f"segments of {plan.segment_seconds} s at {rec.sample_rate} Hz "
            f"hold {length} frame(s); need at least 2"
        )
    if length > rec.n_frames:
        raise SegmentationError(
            f"recording has {rec.n_frames} frames, shorter than one "
            f"{length}-frame segment"
        )
    stride = plan.stride(rec.sample_rate)
    starts = range(0, rec.n_frames - length + 1, stride)
    return [(s, s + length) for s in starts]


def lift(
    rec: ChannelRecording,
    plan: SegmentationPlan,
    center: bool = False,
    weighted: bool = False,
) -> CovarianceDataset:
    """Lift a recording into the covariance domain.

    Column ``s`` of the result is ``vech(Y_s Y_s^T / L_s)`` for segment
    ``Y_s``.  Segments are not mean-centered by default: the mixing model has
    no offset term, so centering would discard signal; pass ``center=True``
    for real data with DC offsets.
    """
    bounds = segment(rec, plan)
    length = bounds[0][1] - bounds[0][0]
    out = np.empty((vech_len(rec.n_channels), len(bounds)))
    for s, (a, b) in enumerate(bounds):
        seg = rec.data[:, a:b]
        if center:
            seg = seg - seg.mean(axis=1, keepdims=True)
        cov = (seg @ seg.T) / length
        out[:, s] = vech(cov, weighted=weighted)
    return CovarianceDataset(out, rec.n_channels, length, weighted)
