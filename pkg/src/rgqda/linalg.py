"""Dense small-dimension linear algebra for SPD matrices.

Cholesky factorization with a scale-relative positive-definiteness check,
log-determinants kept in log space, and squared Mahalanobis distances via
triangular solves.  Everything here is a pure function of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionMismatch, NotPositiveDefinite

# Pivots at or below PD_RTOL times the largest diagonal entry mean "singular".
PD_RTOL = 1e-10
SYMMETRY_RTOL = 1e-12


@dataclass(frozen=True)
class SpdMatrix:
    """A symmetric positive-definite matrix with its Cholesky factor cached.

    Attributes
    ----------
    entries : (p, p) ndarray
        The symmetrized matrix.
    chol : (p, p) ndarray
        Lower-triangular factor L with L @ L.T == entries.
    log_det : float
        2 * sum(log(diag(L))); determinants are never materialized.
    """

    entries: np.ndarray
    chol: np.ndarray
    log_det: float = field(default=0.0)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


def cholesky(m: np.ndarray, ridge: float | None = None) -> SpdMatrix:
    """Factor a symmetric matrix, validating positive definiteness.

    Parameters
    ----------
    m : (p, p) array_like
        Symmetric matrix (checked to relative tolerance 1e-12, then
        symmetrized exactly).
    ridge : float, optional
        If given, add ``ridge * trace(m)/p`` to the diagonal before
        factoring.  Off by default: silent regularization would distort
        the determinant ratios the classifier depends on.

    Raises
    ------
    NotPositiveDefinite
        If factorization fails or any pivot is at or below
        ``1e-10 * max(diag)``.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    scale = np.max(np.abs(m))
    if scale > 0 and np.max(np.abs(m - m.T)) > SYMMETRY_RTOL * scale * m.shape[0]:
        raise NotPositiveDefinite("matrix is not symmetric to tolerance")
    sym = 0.5 * (m + m.T)
    if ridge is not None:
        sym = sym + (ridge * np.trace(sym) / sym.shape[0]) * np.eye(sym.shape[0])
    pd_tol = PD_RTOL * max(np.max(np.diag(sym)), 0.0)
    try:
        chol = np.linalg.cholesky(sym)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite("Cholesky factorization failed") from None
    pivots = np.diag(chol) ** 2
    if np.min(pivots) <= pd_tol:
        raise NotPositiveDefinite(
            f"pivot {np.min(pivots):.3e} at or below tolerance {pd_tol:.3e}"
        )
    log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
    return SpdMatrix(entries=sym, chol=chol, log_det=log_det)


def mahalanobis_sq(x: np.ndarray, center: np.ndarray, scatter: SpdMatrix) -> float:
    """Squared Mahalanobis distance (x-center)' scatter^{-1} (x-center)."""
    x = np.asarray(x, dtype=float)
    center = np.asarray(center, dtype=float)
    if x.shape != center.shape or x.shape != (scatter.dim,):
        raise DimensionMismatch(
            f"x {x.shape}, center {center.shape}, scatter dim {scatter.dim}"
        )
    z = solve_triangular(scatter.chol, x - center, lower=True)
    return float(z @ z)


def mahalanobis_sq_many(
    points: np.ndarray, center: np.ndarray, scatter: SpdMatrix
) -> np.ndarray:
    """Squared Mahalanobis distances for each row of ``points``."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != scatter.dim:
        raise DimensionMismatch(
            f"points {points.shape} incompatible with scatter dim {scatter.dim}"
        )
    z = solve_triangular(scatter.chol, (points - center).T, lower=True)
    return np.einsum("ij,ij->j", z, z)
