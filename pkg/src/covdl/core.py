"""Mixing-matrix identification in the covariance domain.

Per-segment sample covariances of a linear mixture Y = AX with uncorrelated
sources satisfy Sigma_s ~= sum_i delta_si * a_i a_i^T, so their
half-vectorizations live in the span of the lifted columns
d_i = vech(a_i a_i^T).  Two strategies recover A from that structure:

* ``covdl1`` (enough sources): learn the lifted columns directly by sparse
  dictionary learning, then peel each mixing column out of its lifted atom
  via a best rank-1 fit.
* ``covdl2`` (fewer sources than vech dimension): fit the subspace spanned
  by the lifted data, then descend on the mismatch between its orthogonal
  projector and the projector of the lifted model columns.

``select_mode`` picks between them from the matrix size alone.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import nnls

from .covdomain import (
    CovarianceDataset,
    _offdiag_weights,
    _vech_indices,
    vech_inv,
    vech_len,
)
from .dictlearn import DictLearnConfig, learn_dictionary
from .errors import DimensionError
from .optim import minimize
from .simgen import MixingMatrix
from .util import as_matrix, rng_stream

__all__ = [
    "CovDlMode",
    "LiftedDictionary",
    "SubspaceBasis",
    "CovDlResult",
    "CovDl2Config",
    "select_mode",
    "rank1_extract",
    "covdl1",
    "fit_subspace",
    "projector_objective",
    "covdl2",
    "estimate_powers",
]

_STREAM_RESTART_BASE = 2000  # disjoint from simgen (0-2) and dictlearn (1000+)


class CovDlMode(str, Enum):
    """Which identification strategy applies."""

    COVDL1 = "covdl1"
    COVDL2 = "covdl2"


@dataclass(frozen=True)
class LiftedDictionary:
    """Learned dictionary over half-vectorized covariances."""

    D: np.ndarray  # vech_len(M) x N, unit-norm columns
    n_channels: int

    def __post_init__(self):
        arr = as_matrix(self.D, "lifted dictionary")
        if arr.shape[0] != vech_len(self.n_channels):
            raise DimensionError(
                f"dictionary rows {arr.shape[0]} do not match M(M+1)/2 for "
                f"M = {self.n_channels}"
            )
        if arr.shape[1] < 1:
            raise DimensionError("dictionary needs at least one atom")
        norms = np.linalg.norm(arr, axis=0)
        if not np.allclose(norms, 1.0, atol=1e-8):
            raise ValueError("dictionary atoms must be unit-norm")
        object.__setattr__(self, "D", arr)

    @property
    def n_atoms(self) -> int:
        return self.D.shape[1]


@dataclass(frozen=True)
class SubspaceBasis:
    """Orthonormal basis of the subspace holding the lifted covariances.

    ``weighted`` records which half-vectorization convention the basis was
    fit in, so later lifts land in the same space.
    """

    U: np.ndarray
    weighted: bool = False
    explained_energy: float = 1.0

    def __post_init__(self):
        arr = as_matrix(self.U, "subspace basis")
        gram = arr.T @ arr
        if not np.allclose(gram, np.eye(arr.shape[1]), atol=1e-10):
            raise ValueError("subspace basis columns must be orthonormal")
        object.__setattr__(self, "U", arr)

    @property
    def dim(self) -> int:
        return self.U.shape[1]


@dataclass(frozen=True)
class CovDlResult:
    """Identified mixing matrix plus how the run went."""

    A_hat: MixingMatrix
    mode: CovDlMode
    objective_trace: np.ndarray
    diagnostics: dict

    def __post_init__(self):
        if not isinstance(self.A_hat, MixingMatrix):
            raise TypeError("A_hat must be a MixingMatrix")
        object.__setattr__(
            self, "objective_trace", np.asarray(self.objective_trace, dtype=np.float64)
        )


@dataclass(frozen=True)
class CovDl2Config:
    """Optimizer settings for the projector-matching strategy.

    ``init``, when given, replaces the random start of the first restart;
    the remaining restarts stay randomized.  Useful for warm starts and for
    checking that a known optimum is a fixed point.
    """

    restarts: int = 5
    max_iters: int = 500
    grad_tol: float = 1e-6
    seed: int = 0
    gradient_descent: bool = False
    init: np.ndarray | None = None

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.grad_tol <= 0:
            raise ValueError("grad_tol must be positive")


def select_mode(M: int, N: int) -> CovDlMode:
    """Dictionary learning when N >= M(M+1)/2, projector matching below."""
    if M < 2 or N < 1:
        raise ValueError("need M >= 2 channels and N >= 1 sources")
    return CovDlMode.COVDL1 if N >= vech_len(M) else CovDlMode.COVDL2


def _lift_columns(A: np.ndarray, weighted: bool) -> np.ndarray:
    """Columns vech(a_i a_i^T) of the lifted model dictionary."""
    rows, cols = _vech_indices(A.shape[0])
    D = A[rows, :] * A[cols, :]
    if weighted:
        D = D * _offdiag_weights(A.shape[0])[:, None]
    return D


def _rank1_fit(S: np.ndarray):
    """Best rank-1 PSD fit of a symmetric matrix via its top eigenpair."""
    eigvals, eigvecs = np.linalg.eigh(S)
    lam = float(eigvals[-1])
    gap = float(eigvals[-1] - eigvals[-2]) if eigvals.size > 1 else np.inf
    if lam <= 0.0:
        a = np.zeros(S.shape[0])
    else:
        a = np.sqrt(lam) * eigvecs[:, -1]
        nz = np.flatnonzero(a)
        if nz.size and a[nz[0]] < 0.0:
            a = -a
    residual = float(np.linalg.norm(S - np.outer(a, a)))
    return a, residual, lam, gap


def rank1_extract(d: np.ndarray, weighted: bool = False) -> tuple[np.ndarray, float]:
    """Mixing column hidden in one lifted vector.

    Unfolds ``d`` to a symmetric matrix and fits it with ``a a^T`` where
    ``a = sqrt(lam1) * b1`` for the largest eigenpair ``(lam1, b1)``.
    Returns ``(a, residual)`` with the residual in the Frobenius norm.  A
    non-positive top eigenvalue means no rank-1 PSD component exists; the
    zero vector is returned and the caller should treat the column as
    degenerate.  Sign convention: first nonzero entry of ``a`` positive
    (``a`` and ``-a`` lift identically, so the sign is arbitrary).
    """
    S = vech_inv(d, weighted=weighted)
    a, residual, _, _ = _rank1_fit(S)
    return a, residual


def _warn_if_constant(dataset: CovarianceDataset):
    lifted = dataset.lifted
    center = lifted.mean(axis=1, keepdims=True)
    spread = np.linalg.norm(lifted - center, axis=0).max()
    scale = max(float(np.linalg.norm(center)), np.finfo(float).tiny)
    if spread <= 1e-10 * scale:
        warnings.warn(
            "segment covariances are essentially constant; per-segment source "
            "powers must vary for the mixing columns to be identifiable",
            stacklevel=3,
        )


def covdl1(dataset: CovarianceDataset, N: int, dl_cfg: DictLearnConfig) -> CovDlResult:
    """Identify the mixing matrix by dictionary learning on lifted data.

    Learns ``N`` unit-norm atoms over the per-segment vech'd covariances and
    extracts one mixing column per atom by a rank-1 eigenfit.  Atom columns
    keep their sqrt(lam1) scale; the data cannot pin down absolute scale, so
    evaluation must normalize.  Degenerate atoms (no positive eigenvalue)
    produce zero columns flagged in diagnostics.
    """
    M = dataset.n_channels
    if N != dl_cfg.n_atoms:
        raise ValueError(f"N={N} disagrees with dl_cfg.n_atoms={dl_cfg.n_atoms}")
    if N < vech_len(M):
        warnings.warn(
            f"N={N} below the lifted dimension {vech_len(M)}; the subspace "
            "strategy (covdl2) usually suits this regime better",
            stacklevel=2,
        )
    _warn_if_constant(dataset)
    D, _, trace = learn_dictionary(dataset.lifted, dl_cfg)
    lifted_dict = LiftedDictionary(D, M)

    A = np.empty((M, N))
    residuals = np.empty(N)
    gaps = np.empty(N)
    degenerate = np.zeros(N, dtype=bool)
    for i in range(N):
        S = vech_inv(D[:, i], weighted=dataset.weighted)
        a, res, lam, gap = _rank1_fit(S)
        A[:, i] = a
        residuals[i] = res
        gaps[i] = gap
        degenerate[i] = lam <= 0.0
    diagnostics = {
        "rank1_residuals": residuals,
        "eigen_gaps": gaps,
        "degenerate": degenerate,
        "dictionary": lifted_dict,
    }
    return CovDlResult(MixingMatrix(A), CovDlMode.COVDL1, trace, diagnostics)


def fit_subspace(dataset: CovarianceDataset, N: int) -> SubspaceBasis:
    """Top-N left singular subspace of the lifted data, uncentered.

    No centering: the covariance model is a nonnegative combination of
    lifted columns with no offset term, so the mean carries signal.
    """
    lifted = dataset.lifted
    T = lifted.shape[0]
    if N < 1:
        raise ValueError("N must be >= 1")
    if N > T:
        raise DimensionError(f"N={N} exceeds the lifted dimension {T}")
    if lifted.shape[1] < N:
        raise DimensionError(
            f"only {lifted.shape[1]} segments for a rank-{N} subspace; "
            "reduce N or provide more data"
        )
    U, s, _ = np.linalg.svd(lifted, full_matrices=False)
    total = float(np.sum(s * s))
    explained = float(np.sum(s[:N] * s[:N]) / total) if total > 0.0 else 0.0
    return SubspaceBasis(U[:, :N], dataset.weighted, explained)


def _projector_value_grad(A: np.ndarray, basis: SubspaceBasis):
    """Projector mismatch ||P_D - P_U||_F^2 and its gradient in A.

    D stacks the lifted columns of A.  The Gram matrix of D is inverted via
    Cholesky; a ridge of 1e-10 x mean diagonal (escalated tenfold on
    failure) is added only when the factorization fails, so well-posed
    inputs see the exact objective.  The ridge is treated as a constant of
    differentiation.
    """
    M, N = A.shape
    U = basis.U
    D = _lift_columns(A, basis.weighted)
    G = D.T @ D
    tr = float(np.trace(G))
    eps = 0.0
    H = G
    for _ in range(40):
        try:
            fac = cho_factor(H, lower=True)
            break
        except np.linalg.LinAlgError:
            eps = 10.0 * eps if eps > 0.0 else 1e-10 * max(tr, 1e-300) / N
            H = G + eps * np.eye(N)
    else:
        raise np.linalg.LinAlgError("lifted Gram matrix cannot be factorized")

    B = cho_solve(fac, D.T).T  # D H^-1
    C = D.T @ B
    E = U.T @ D
    F = U.T @ B
    value = float(np.sum(C * C.T) - 2.0 * np.sum(E * F) + U.shape[1])

    X = B @ C - U @ F
    grad_D = 4.0 * (X - B @ (D.T @ X))
    if basis.weighted:
        grad_D = grad_D * _offdiag_weights(M)[:, None]

    rows, cols = _vech_indices(M)
    grad_A = np.empty_like(A)
    W = np.empty((M, M))
    for i in range(N):
        W[rows, cols] = grad_D[:, i]
        W[cols, rows] = grad_D[:, i]
        grad_A[:, i] = W @ A[:, i] + np.diag(W) * A[:, i]
    return value, grad_A


def projector_objective(A, basis: SubspaceBasis) -> tuple[float, np.ndarray]:
    """Mismatch between the lifted-model projector and the data projector.

    ``A`` may be a MixingMatrix or a plain M x N array.  Returns the
    objective value and its M x N gradient, obtained by the chain rule
    through the lift d_i = vech(a_i a_i^T).
    """
    arr = A.columns if isinstance(A, MixingMatrix) else as_matrix(A, "mixing matrix")
    if np.any(np.linalg.norm(arr, axis=0) == 0.0):
        raise ValueError("mixing matrix has an all-zero column")
    if vech_len(arr.shape[0]) != basis.U.shape[0]:
        raise DimensionError(
            "mixing-matrix channel count does not match the subspace basis"
        )
    return _projector_value_grad(arr, basis)


def covdl2(
    dataset: CovarianceDataset, N: int, opt_cfg: CovDl2Config | None = None
) -> CovDlResult:
    """Identify the mixing matrix by matching the lifted-data subspace.

    Fits an N-dimensional basis to the lifted covariances, then minimizes
    the projector mismatch over A with a limited-memory quasi-Newton descent
    from ``opt_cfg.restarts`` seeded Gaussian starts (the objective is
    nonconvex).  Returns the best restart; if no restart reached
    ``grad_tol`` the result carries ``converged=False`` in diagnostics.
    """
    if opt_cfg is None:
        opt_cfg = CovDl2Config()
    M = dataset.n_channels
    T = vech_len(M)
    if N >= T:
        raise DimensionError(
            f"covdl2 needs N < M(M+1)/2 = {T}; got N={N}. Use covdl1 when the "
            "lifted dictionary is square or overcomplete"
        )
    basis = fit_subspace(dataset, N)

    # scale-invariant objective; starts only need a sane magnitude
    col_scale = float(np.mean(np.linalg.norm(dataset.lifted, axis=0)))
    sigma = np.sqrt(max(col_scale, np.finfo(float).tiny) / M)

    def objective(x):
        value, grad = _projector_value_grad(x.reshape(M, N), basis)
        return value, grad.ravel()

    init = opt_cfg.init
    if init is not None:
        init = as_matrix(init, "initial mixing matrix")
        if init.shape != (M, N):
            raise DimensionError(
                f"init shape {init.shape} does not match (M, N) = {(M, N)}"
            )

    best = None
    restart_values = np.empty(opt_cfg.restarts)
    for r in range(opt_cfg.restarts):
        rng = rng_stream(opt_cfg.seed, _STREAM_RESTART_BASE + r)
        x0 = init.ravel() if r == 0 and init is not None else sigma * rng.standard_normal(M * N)
        res = minimize(
            objective,
            x0,
            grad_tol=opt_cfg.grad_tol,
            max_iters=opt_cfg.max_iters,
            gradient_descent=opt_cfg.gradient_descent,
        )
        restart_values[r] = res.value
        if best is None or res.value < best.value:
            best = res

    diagnostics = {
        "final_mismatch": best.value,
        "final_grad_norm": best.grad_norm,
        "converged": bool(best.grad_norm <= opt_cfg.grad_tol),
        "restart_values": restart_values,
        "explained_energy": basis.explained_energy,
        "basis": basis,
    }
    A_hat = MixingMatrix(best.x.reshape(M, N))
    return CovDlResult(A_hat, CovDlMode.COVDL2, best.trace, diagnostics)


def estimate_powers(
    A: MixingMatrix, dataset: CovarianceDataset
) -> tuple[np.ndarray, np.ndarray]:
    """Per-segment source powers by nonnegative least squares.

    Solves ``min_{delta >= 0} ||lifted_s - D delta||`` per segment against
    the lifted columns of ``A``.  Returns ``(powers, residuals)`` with
    powers of shape n_sources x n_segments; residuals flag model misfit
    rather than raising.
    """
    if A.n_channels != dataset.n_channels:
        raise DimensionError("mixing matrix channel count does not match dataset")
    D = _lift_columns(A.columns, dataset.weighted)
    S = dataset.n_segments
    powers = np.empty((A.n_sources, S))
    residuals = np.empty(S)
    for s in range(S):
        powers[:, s], residuals[s] = nnls(D, dataset.lifted[:, s])
    return powers, residuals
