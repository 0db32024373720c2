"""Dictionary learning: greedy sparse coding alternated with atom updates.

The engine is deliberately plain batch dictionary learning.  Sparse coding
is orthogonal matching pursuit, per data column, optionally constrained to
nonnegative coefficients (the coefficients of the covariance-domain model
are per-segment source powers, which cannot be negative).  Atom updates are
either MOD (one least-squares solve for the whole dictionary) or K-SVD
(per-atom rank-1 refits).  The outer loop keeps a best-of guard on codes
and dictionary so its objective trace never increases.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls

from .util import as_matrix, rng_stream

__all__ = ["DictLearnConfig", "sparse_code", "dict_update", "learn_dictionary"]

_UPDATE_RULES = ("mod", "ksvd")
# rng stream ids, offset per restart; other modules use disjoint ranges
_STREAM_INIT = 1000


@dataclass(frozen=True)
class DictLearnConfig:
    """Settings for one dictionary learning run.

    ``sparsity_k`` must stay below the row count of the training data; that
    bound is only checkable once data is seen, so ``learn_dictionary``
    enforces it.  ``nonneg`` keeps every coefficient nonnegative.
    """

    n_atoms: int
    sparsity_k: int
    max_iters: int = 60
    tol: float = 1e-6
    seed: int = 0
    update_rule: str = "mod"
    nonneg: bool = True
    restarts: int = 1  # independent seeded runs; best final objective wins

    def __post_init__(self):
        if self.n_atoms < 1:
            raise ValueError("n_atoms must be >= 1")
        if self.sparsity_k < 1:
            raise ValueError("sparsity_k must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        rule = str(self.update_rule).lower()
        if rule not in _UPDATE_RULES:
            raise ValueError(f"update_rule must be one of {_UPDATE_RULES}")
        object.__setattr__(self, "update_rule", rule)


def _ls_on_support(D, support, y):
    """Least-squares coefficients of y on the chosen atoms."""
    sub = D[:, support]
    gram = sub.T @ sub
    rhs = sub.T @ y
    try:
        return np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(sub, y, rcond=None)[0]


def sparse_code(
    D: np.ndarray, data: np.ndarray, sparsity_k: int, nonneg: bool = False
) -> np.ndarray:
    """Greedy orthogonal matching pursuit on every column of ``data``.

    Selects up to ``sparsity_k`` atoms per column; after each selection the
    coefficients are refit on the whole support, so the residual norm never
    increases with the step count.  In nonnegative mode atoms are chosen by
    largest positive correlation and the refit falls back to nonnegative
    least squares whenever the unconstrained solution leaves the feasible
    set.  Columns are coded in lockstep (the greedy path is per column, but
    each step batches the correlation scan and the support solves).
    """
    D = as_matrix(D, "dictionary")
    data = as_matrix(data, "data")
    if D.shape[0] != data.shape[0]:
        raise ValueError("dictionary and data row counts differ")
    if sparsity_k < 1:
        raise ValueError("sparsity_k must be >= 1")
    if np.any(np.linalg.norm(D, axis=0) == 0.0):
        raise ValueError("dictionary contains zero-norm atoms")

    n_atoms, n_cols = D.shape[1], data.shape[1]
    limit = min(sparsity_k, n_atoms)
    coeffs = np.zeros((n_atoms, n_cols))
    y_norms = np.linalg.norm(data, axis=0)
    active = y_norms > 0.0
    residual = data.copy()
    selected = np.zeros((n_atoms, n_cols), dtype=bool)
    support = np.zeros((limit, n_cols), dtype=np.intp)

    for step in range(limit):
        act = np.flatnonzero(active)
        if act.size == 0:
            break
        corr = D.T @ residual[:, act]
        if nonneg:
            corr[selected[:, act]] = -np.inf
            picks = np.argmax(corr, axis=0)
            ok = corr[picks, np.arange(act.size)] > 0.0
        else:
            corr = np.abs(corr)
            corr[selected[:, act]] = 0.0
            picks = np.argmax(corr, axis=0)
            ok = corr[picks, np.arange(act.size)] > 1e-13 * y_norms[act]
        active[act[~ok]] = False
        go = act[ok]
        if go.size == 0:
            break
        picks = picks[ok]
        selected[picks, go] = True
        support[step, go] = picks

        sup = support[: step + 1, go]
        sub = np.moveaxis(D[:, sup], 2, 0)  # (n_go, rows, step+1)
        sub_t = sub.transpose(0, 2, 1)
        rhs = sub_t @ data[:, go].T[:, :, None]
        try:
            coef = np.linalg.solve(sub_t @ sub, rhs)[:, :, 0]
        except np.linalg.LinAlgError:
            # duplicate atoms can make a support singular; fall back per column
            coef = np.stack(
                [_ls_on_support(D, sup[:, i].tolist(), data[:, c]) for i, c in enumerate(go)]
            )
        if nonneg:
            for i in np.flatnonzero((coef < 0.0).any(axis=1)):
                coef[i] = nnls(D[:, sup[:, i]], data[:, go[i]])[0]
        coeffs[:, go] = 0.0
        coeffs[sup, go[None, :]] = coef.T
        residual[:, go] = data[:, go] - (sub @ coef[:, :, None])[:, :, 0].T
        done = np.linalg.norm(residual[:, go], axis=0) <= 1e-12 * y_norms[go]
        active[go[done]] = False
    if nonneg:
        np.maximum(coeffs, 0.0, out=coeffs)  # clip -0.0 / rounding dust
    return coeffs


def _replace_dead(D, data, coeffs, dead):
    """Point dead atoms at the worst-represented data columns."""
    if not np.any(dead):
        return D
    residual = data - D @ coeffs
    badness = np.argsort(-np.linalg.norm(residual, axis=0))
    D = D.copy()
    pos = 0
    for j in np.flatnonzero(dead):
        while pos < len(badness):
            col = data[:, badness[pos]]
            pos += 1
            norm = np.linalg.norm(col)
            if norm > 0.0:
                D[:, j] = col / norm
                break
        else:
            D[:, j] = 0.0
            D[0, j] = 1.0  # no usable data column left; park at a basis vector
    return D


def _mod_update(D, data, coeffs):
    """MOD step: one regularized least-squares solve for every atom at once.

    Returns the column-normalized dictionary plus the normalization scales;
    multiplying coefficient row j by scales[j] keeps the product D @ coeffs
    unchanged, which is what makes the outer loop provably non-increasing.
    """
    gram = coeffs @ coeffs.T
    tr = float(np.trace(gram))
    n_atoms = D.shape[1]
    scales = np.zeros(n_atoms)
    if tr <= 0.0:
        dead = np.ones(n_atoms, dtype=bool)
        return _replace_dead(D.copy(), data, coeffs, dead), scales
    eps = 1e-8 * tr / n_atoms
    new = np.linalg.solve(gram + eps * np.eye(n_atoms), coeffs @ data.T).T
    norms = np.linalg.norm(new, axis=0)
    used = np.abs(coeffs).sum(axis=1) > 0.0
    alive = used & (norms > 1e-12 * max(norms.max(), 1.0))
    out = D.copy()
    out[:, alive] = new[:, alive] / norms[alive]
    scales[alive] = norms[alive]
    return _replace_dead(out, data, coeffs, ~alive), scales


def _rank1_refit_nonneg(block, atom):
    """Alternating exact refits of ``block ~ atom @ row`` with row >= 0.

    The plain SVD solution can demand negative coefficients, which the
    nonnegative model forbids.  Starting from the current atom, each half
    step (row given atom, atom given row) solves its subproblem exactly, so
    the restricted residual never increases.
    """
    d = atom
    row = np.maximum(block.T @ d, 0.0)
    for _ in range(3):
        if not row.any():
            return None, None
        d_raw = block @ row
        norm = np.linalg.norm(d_raw)
        if norm == 0.0:
            return None, None
        d = d_raw / norm
        row = np.maximum(block.T @ d, 0.0)
    return d, row


def _ksvd_update(D, data, coeffs, nonneg=False):
    """K-SVD pass: refit each atom to the residual restricted to its users.

    Returns the dictionary plus the companion coefficient updates; each
    rank-1 refit minimizes the restricted residual, so the pair (D, C) it
    returns never scores worse than the input pair.
    """
    D = D.copy()
    C = coeffs.copy()
    residual = data - D @ C
    dead = np.zeros(D.shape[1], dtype=bool)
    for j in range(D.shape[1]):
        users = np.flatnonzero(C[j] != 0.0)
        if users.size == 0:
            dead[j] = True
            continue
        # residual with atom j added back, restricted to its users
        block = residual[:, users] + np.outer(D[:, j], C[j, users])
        if nonneg:
            new_atom, new_row = _rank1_refit_nonneg(block, D[:, j])
            if new_atom is None:
                dead[j] = True
                C[j, users] = 0.0
                residual[:, users] = block
                continue
        else:
            u, s, vt = np.linalg.svd(block, full_matrices=False)
            new_atom = u[:, 0]
            new_row = s[0] * vt[0]
            if new_row @ C[j, users] < 0.0:  # SVD sign is arbitrary; stay aligned
                new_atom = -new_atom
                new_row = -new_row
        residual[:, users] = block - np.outer(new_atom, new_row)
        D[:, j] = new_atom
        C[j, users] = new_row
    return _replace_dead(D, data, coeffs, dead), C


def dict_update(
    D: np.ndarray,
    data: np.ndarray,
    coeffs: np.ndarray,
    rule: str = "mod",
    nonneg: bool = False,
    return_scales: bool = False,
):
    """One dictionary update with unit-norm output columns.

    ``rule`` is ``"mod"`` or ``"ksvd"``.  Atoms with an all-zero coefficient
    row are re-pointed at the worst-represented data column.  With
    ``return_scales=True`` also returns the per-atom factors that, applied
    to the coefficient rows, compensate the re-normalization (scale 0 marks
    atoms that were replaced).  ``nonneg`` only affects the ksvd rule, whose
    internal row refits must then stay nonnegative.
    """
    D = as_matrix(D, "dictionary")
    data = as_matrix(data, "data")
    coeffs = as_matrix(coeffs, "coeffs")
    if coeffs.shape != (D.shape[1], data.shape[1]):
        raise ValueError("coeffs shape does not match dictionary/data")
    rule = str(rule).lower()
    if rule == "mod":
        out, scales = _mod_update(D, data, coeffs)
    elif rule == "ksvd":
        out, C_new = _ksvd_update(D, data, coeffs, nonneg)
        # atoms come out unit-norm already; dead rows were zero to begin with
        scales = np.where(np.abs(C_new).sum(axis=1) > 0.0, 1.0, 0.0)
    else:
        raise ValueError(f"update_rule must be one of {_UPDATE_RULES}")
    if return_scales:
        return out, scales
    return out


def _init_dictionary(data, n_atoms, rng):
    """Distinct data columns, normalized; random unit fill if data runs out."""
    usable = np.flatnonzero(np.linalg.norm(data, axis=0) > 0.0)
    n_pick = min(n_atoms, usable.size)
    picked = rng.choice(usable, size=n_pick, replace=False) if n_pick else []
    D = np.empty((data.shape[0], n_atoms))
    for i, col in enumerate(picked):
        v = data[:, col]
        D[:, i] = v / np.linalg.norm(v)
    for i in range(n_pick, n_atoms):
        v = rng.standard_normal(data.shape[0])
        D[:, i] = v / np.linalg.norm(v)
    return D


def _objective(data, D, coeffs) -> float:
    r = data - D @ coeffs
    return float(np.sum(r * r))


def _learn_once(data, cfg: DictLearnConfig, rng):
    D = _init_dictionary(data, cfg.n_atoms, rng)
    C = sparse_code(D, data, cfg.sparsity_k, cfg.nonneg)
    value = _objective(data, D, C)
    trace = [value]

    for _ in range(cfg.max_iters):
        if cfg.update_rule == "mod":
            D_new, scales = _mod_update(D, data, C)
            C_carry = C * scales[:, None]
        else:
            D_new, C_carry = _ksvd_update(D, data, C, cfg.nonneg)
            if cfg.nonneg:
                np.maximum(C_carry, 0.0, out=C_carry)
        C_new = sparse_code(D_new, data, cfg.sparsity_k, cfg.nonneg)
        err_new = np.linalg.norm(data - D_new @ C_new, axis=0)
        err_carry = np.linalg.norm(data - D_new @ C_carry, axis=0)
        worse = err_new > err_carry
        if np.any(worse):
            C_new[:, worse] = C_carry[:, worse]
        value_new = _objective(data, D_new, C_new)
        if value_new > value:  # no progress even with carried codes: stop
            trace.append(value)
            break
        trace.append(value_new)
        drop = value - value_new
        D, C, value = D_new, C_new, value_new
        if drop < cfg.tol * max(value, 1e-30):
            break
    return D, C, np.asarray(trace)


def learn_dictionary(
    data: np.ndarray, cfg: DictLearnConfig
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Alternate sparse coding and dictionary updates until the objective
    settles.

    Initialization draws ``cfg.n_atoms`` distinct data columns (seeded).
    Each iteration keeps, per data column, the better of the fresh code and
    the previous one carried through the dictionary update, so the returned
    objective trace is non-increasing.  Stops when the relative objective
    drop falls below ``cfg.tol``.  With ``cfg.restarts > 1``, independent
    seeded runs race and the best final objective wins; the alternation is
    nonconvex, so restarts buy real robustness.

    Returns ``(dictionary, coeffs, trace)`` of the winning run.
    """
    data = as_matrix(data, "data")
    if cfg.n_atoms > data.shape[1]:
        warnings.warn(
            f"{cfg.n_atoms} atoms from only {data.shape[1]} data columns; "
            "the fit is unlikely to be identifiable",
            stacklevel=2,
        )
    if cfg.sparsity_k >= data.shape[0]:
        raise ValueError(
            f"sparsity_k={cfg.sparsity_k} must be below the data row count "
            f"{data.shape[0]}"
        )

    best = None
    for r in range(cfg.restarts):
        rng = rng_stream(cfg.seed, _STREAM_INIT + r)
        out = _learn_once(data, cfg, rng)
        if best is None or out[2][-1] < best[2][-1]:
            best = out
    return best
