"""Forecast reconciliation: bottom-up and shrinkage-weighted projection.

Given base forecasts yhat for every node of a hierarchy, the projection
reconciler maps them onto the coherent subspace with

    ytilde = M yhat,   M = I - W C' (C W C')^{-1} C,

where W is a shrinkage estimate of the base-error covariance built from
one-step in-sample errors. The structural form

    ytilde = S G yhat,   G = (S' W^{-1} S)^{-1} S' W^{-1},

is algebraically identical (M = S G) and implemented independently as a
cross-check. All solves go through Cholesky factorizations; no matrix
is inverted explicitly, and a logged diagonal jitter rescues
near-singular W.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import DataError, NumericalError
from .hierarchy import HierarchyStructure

logger = logging.getLogger(__name__)

#: relative diagonal jitter applied when W fails to factor
JITTER_SCALE = 1e-10


def insample_error_matrix(fits, node_order) -> np.ndarray:
    """Stack one-step in-sample errors (actual minus fitted) per node.

    ``fits`` maps node label to a fitted model whose ``residuals`` and
    ``origin_dates`` are aligned one-step objects; all nodes must share
    origin dates. Columns follow ``node_order``.
    """
    cols = []
    ref_dates = None
    ref_label = None
    for label in node_order:
        if label not in fits:
            raise DataError(f"no fit supplied for node {label!r}")
        fit = fits[label]
        if ref_dates is None:
            ref_dates, ref_label = fit.origin_dates, label
        elif tuple(fit.origin_dates) != tuple(ref_dates):
            raise DataError(
                f"origin dates of node {label!r} do not match {ref_label!r}"
            )
        cols.append(np.asarray(fit.residuals, dtype=float))
    E = np.column_stack(cols)
    if E.shape[0] < E.shape[1] + 5:
        raise DataError(
            f"error matrix has {E.shape[0]} rows for {E.shape[1]} nodes; "
            f"need at least n + 5 rows"
        )
    return E


@dataclass(frozen=True)
class CovEstimate:
    """Shrunk covariance W with its shrinkage intensity lambda."""

    W: np.ndarray
    lam: float


def shrink_covariance(E, lam: float | None = None, node_labels=None) -> CovEstimate:
    """Shrink the uncentered error covariance toward its diagonal.

    W1 = (1/T) E'E, W_D = diag(W1), and W = lam*W_D + (1-lam)*W1. When
    ``lam`` is not forced, the correlation-target intensity

        lam = sum_{i!=j} var(r_ij) / sum_{i!=j} r_ij^2

    is estimated from the scaled errors and clipped to [0, 1]; an
    exactly diagonal correlation target makes the denominator zero and
    maps to lam = 1.
    """
    E = np.asarray(E, dtype=float)
    if E.ndim != 2:
        raise DataError(f"error matrix must be 2-d, got shape {E.shape}")
    T, n = E.shape
    if T < 3:
        raise DataError(f"need at least 3 error rows, got {T}")
    if not np.all(np.isfinite(E)):
        raise DataError("error matrix contains non-finite values")
    W1 = E.T @ E / T
    d = np.diag(W1).copy()
    if np.any(d <= 0.0):
        j = int(np.argmax(d <= 0.0))
        name = node_labels[j] if node_labels is not None else f"column {j}"
        raise DataError(f"zero-variance errors for node {name}")
    if lam is None:
        scale = np.sqrt(d)
        Xs = E / scale
        R = W1 / np.outer(scale, scale)
        # variance of each sample correlation, uncentered moments
        cross_sq = (Xs * Xs).T @ (Xs * Xs)
        cross = Xs.T @ Xs
        var_r = (cross_sq - cross * cross / T) / (T * (T - 1.0))
        off = ~np.eye(n, dtype=bool)
        denom = float(np.sum(R[off] ** 2))
        numer = float(np.sum(var_r[off]))
        lam = 1.0 if denom == 0.0 else min(max(numer / denom, 0.0), 1.0)
    else:
        lam = float(lam)
        if not 0.0 <= lam <= 1.0:
            raise DataError(f"lambda must lie in [0, 1], got {lam}")
    W = lam * np.diag(d) + (1.0 - lam) * W1
    return CovEstimate(W=W, lam=lam)


def _check_w(W, n: int) -> np.ndarray:
    W = np.asarray(W, dtype=float)
    if W.shape != (n, n):
        raise DataError(f"W shape {W.shape} does not match n={n}")
    if np.max(np.abs(W - W.T)) > 1e-12 * max(1.0, float(np.max(np.abs(W)))):
        raise DataError("W must be symmetric")
    return 0.5 * (W + W.T)


def _cho_factor_with_jitter(mat, label: str):
    try:
        return linalg.cho_factor(mat, lower=True), 0.0
    except np.linalg.LinAlgError:
        pass
    jitter = JITTER_SCALE * np.trace(mat) / mat.shape[0]
    if jitter <= 0.0:
        jitter = JITTER_SCALE
    logger.warning("%s near-singular; adding diagonal jitter %.3e", label, jitter)
    try:
        fac = linalg.cho_factor(mat + jitter * np.eye(mat.shape[0]), lower=True)
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(mat)
        raise NumericalError(
            f"{label} is numerically singular (condition number {cond:.3e})"
        ) from exc
    return fac, jitter


def mint_projection(W, structure: HierarchyStructure) -> np.ndarray:
    """The projection matrix M = I - W C' (C W C')^{-1} C."""
    n = structure.n
    W = _check_w(W, n)
    C = structure.C.astype(float)
    CW = C @ W
    fac, _ = _cho_factor_with_jitter(CW @ C.T, "C W C'")
    # solve (C W C') X = C, then M = I - W C' X
    X = linalg.cho_solve(fac, C)
    return np.eye(n) - W @ C.T @ X


def mint_reconcile(yhat, W, structure: HierarchyStructure) -> np.ndarray:
    """Project base forecasts onto the coherent subspace.

    Accepts a single length-n vector or a rows x n matrix; returns the
    same shape. Solves against the factorized C W C', never an explicit
    inverse.
    """
    y = np.asarray(yhat, dtype=float)
    single = y.ndim == 1
    rows = np.atleast_2d(y)
    n = structure.n
    if rows.shape[1] != n:
        raise DataError(
            f"forecast vector has {rows.shape[1]} entries, expected {n}"
        )
    W = _check_w(W, n)
    C = structure.C.astype(float)
    CW = C @ W
    fac, _ = _cho_factor_with_jitter(CW @ C.T, "C W C'")
    resid = rows @ C.T
    adjust = linalg.cho_solve(fac, resid.T).T @ CW
    out = rows - adjust
    return out[0] if single else out


def structural_g(W, structure: HierarchyStructure) -> np.ndarray:
    """The mapping matrix G = (S' W^{-1} S)^{-1} S' W^{-1}."""
    n = structure.n
    W = _check_w(W, n)
    S = structure.S.astype(float)
    facW, _ = _cho_factor_with_jitter(W, "W")
    WinvS = linalg.cho_solve(facW, S)
    facG, _ = _cho_factor_with_jitter(S.T @ WinvS, "S' W^-1 S")
    return linalg.cho_solve(facG, WinvS.T)


def structural_reconcile(yhat, W, structure: HierarchyStructure) -> np.ndarray:
    """Reconcile via the structural form ytilde = S G yhat."""
    y = np.asarray(yhat, dtype=float)
    single = y.ndim == 1
    rows = np.atleast_2d(y)
    if rows.shape[1] != structure.n:
        raise DataError(
            f"forecast vector has {rows.shape[1]} entries, expected {structure.n}"
        )
    G = structural_g(W, structure)
    out = rows @ G.T @ structure.S.T.astype(float)
    return out[0] if single else out


def bottom_up(bottom_forecasts, structure: HierarchyStructure) -> np.ndarray:
    """Aggregate bottom forecasts upward: ytilde = S yhat_b."""
    b = np.asarray(bottom_forecasts, dtype=float)
    single = b.ndim == 1
    rows = np.atleast_2d(b)
    if rows.shape[1] != structure.n_b:
        raise DataError(
            f"bottom vector has {rows.shape[1]} entries, expected {structure.n_b}"
        )
    out = rows @ structure.S.T.astype(float)
    return out[0] if single else out
