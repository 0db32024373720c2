"""Scoring recovered mixing matrices against ground truth.

Columns are compared by absolute cosine similarity (the lift maps a and -a
to the same point, so sign carries no information), matched one-to-one by a
maximum-weight assignment, and summarized as the fraction of true columns
recovered above a correlation threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DimensionError
from .simgen import MixingMatrix

__all__ = ["RecoveryReport", "correlation_matrix", "match_columns", "report"]


@dataclass(frozen=True)
class RecoveryReport:
    """Outcome of matching an estimated mixing matrix to the truth."""

    matched_pairs: list  # (true index, estimated index, |correlation|)
    recovery_ratio: float
    sorted_correlations: np.ndarray  # descending
    threshold: float
    n_true: int
    n_est: int

    def key_values(self) -> list[tuple[str, str]]:
        """Flat key/value view, ordered, ready for a text report."""
        items = [
            ("recovery_ratio", repr(float(self.recovery_ratio))),
            ("threshold", repr(float(self.threshold))),
            ("n_true", str(self.n_true)),
            ("n_est", str(self.n_est)),
            ("n_matched", str(len(self.matched_pairs))),
            (
                "n_above_threshold",
                str(int(np.sum(self.sorted_correlations >= self.threshold))),
            ),
        ]
        for rank, (i, j, c) in enumerate(self.matched_pairs):
            items.append((f"pair_{rank:03d}", f"{i} {j} {repr(float(c))}"))
        return items

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.key_values())

    def correlations_csv(self) -> str:
        lines = ["rank,correlation"]
        for rank, c in enumerate(self.sorted_correlations):
            lines.append(f"{rank},{repr(float(c))}")
        return "\n".join(lines) + "\n"


def _columns(A) -> np.ndarray:
    return A.columns if isinstance(A, MixingMatrix) else np.asarray(A, dtype=float)


def correlation_matrix(A_true, A_est) -> np.ndarray:
    """Absolute cosine similarity between every true/estimated column pair.

    Zero columns (degenerate estimates) get zero rows/columns rather than
    NaN, so they simply never clear any threshold.
    """
    T = _columns(A_true)
    E = _columns(A_est)
    if T.shape[0] != E.shape[0]:
        raise DimensionError(
            f"channel counts differ: {T.shape[0]} true vs {E.shape[0]} estimated"
        )
    tn = np.linalg.norm(T, axis=0)
    en = np.linalg.norm(E, axis=0)
    tu = np.divide(T, tn, out=np.zeros_like(T), where=tn > 0)
    eu = np.divide(E, en, out=np.zeros_like(E), where=en > 0)
    return np.clip(np.abs(tu.T @ eu), 0.0, 1.0)


def match_columns(corr: np.ndarray) -> list:
    """One-to-one column assignment maximizing total matched correlation.

    Solves the rectangular assignment problem exactly; every returned pair
    uses a distinct true index and a distinct estimated index, and there are
    min(n_true, n_est) pairs.
    """
    corr = np.asarray(corr, dtype=float)
    if corr.ndim != 2:
        raise ValueError("correlation matrix must be 2-D")
    rows, cols = linear_sum_assignment(corr, maximize=True)
    return [(int(i), int(j), float(corr[i, j])) for i, j in zip(rows, cols)]


def report(A_true, A_est, threshold: float = 0.99) -> RecoveryReport:
    """Match columns and compute the recovery ratio at ``threshold``.

    The ratio counts matched pairs with absolute correlation at or above the
    threshold, divided by the number of true columns.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must lie in (0, 1]")
    corr = correlation_matrix(A_true, A_est)
    pairs = match_columns(corr)
    values = np.array([c for _, _, c in pairs], dtype=float)
    order = np.argsort(-values, kind="stable")
    sorted_corr = values[order]
    n_true = corr.shape[0]
    ratio = float(np.sum(values >= threshold)) / n_true
    return RecoveryReport(
        matched_pairs=pairs,
        recovery_ratio=ratio,
        sorted_correlations=sorted_corr,
        threshold=float(threshold),
        n_true=n_true,
        n_est=corr.shape[1],
    )
