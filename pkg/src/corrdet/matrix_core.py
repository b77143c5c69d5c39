"""Dense symmetric-matrix kernels: log-determinant, square root, Hadamard functionals."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .errors import InvalidInputs, NotPositiveDefinite, NotPSD

PIVOT_RTOL = 1e-12
EIG_RTOL = 1e-10
CSV_SYMMETRY_ATOL = 1e-9


def as_symmetric(m, *, atol: float | None = None) -> np.ndarray:
    """Return `m` as a dense symmetric float64 array.

    The input is symmetrized by ``(M + M.T) / 2``. If `atol` is given, an
    asymmetry larger than `atol` is rejected instead of silently averaged.
    """
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise InvalidInputs(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputs("matrix has non-finite entries")
    if atol is not None:
        asym = float(np.max(np.abs(a - a.T)))
        if asym > atol:
            raise InvalidInputs(f"matrix is not symmetric (max asymmetry {asym:.3g})")
    if np.array_equal(a, a.T):
        return a
    return (a + a.T) / 2.0


def fsum_array(values) -> float:
    """Exactly rounded sum of all entries of an array."""
    return math.fsum(np.asarray(values, dtype=np.float64).ravel().tolist())


def cholesky_logdet(m) -> float:
    """Log-determinant of a symmetric positive definite matrix via Cholesky.

    Raises NotPositiveDefinite when factorization fails or any pivot falls
    below ``1e-12 * max(diag)``.
    """
    a = np.asarray(m, dtype=np.float64)
    try:
        chol = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("Cholesky factorization failed") from exc
    pivots = np.diagonal(chol) ** 2
    threshold = PIVOT_RTOL * float(np.max(np.diagonal(a)))
    if not np.all(pivots > threshold):
        k = int(np.argmin(pivots))
        raise NotPositiveDefinite(f"pivot {k} = {pivots[k]:.3g} below tolerance {threshold:.3g}")
    return 2.0 * fsum_array(np.log(np.diagonal(chol)))


def _is_diagonal(a: np.ndarray) -> bool:
    return np.count_nonzero(a - np.diag(np.diagonal(a))) == 0


def sym_sqrt(m) -> np.ndarray:
    """Symmetric positive semidefinite square root ``Q diag(sqrt(l)) Q^T``.

    Eigenvalues in ``[-tol, 0)`` with ``tol = 1e-10 * ||M||_2`` are clipped to
    zero; anything more negative raises NotPSD. Diagonal inputs bypass the
    eigendecomposition so that ``sym_sqrt(I)`` is exactly ``I``.
    """
    a = as_symmetric(m)
    if _is_diagonal(a):
        d = np.diagonal(a)
        tol = EIG_RTOL * float(np.max(np.abs(d)))
        if np.min(d) < -tol:
            raise NotPSD(f"minimum eigenvalue {np.min(d):.3g} < -{tol:.3g}")
        return np.diag(np.sqrt(np.clip(d, 0.0, None)))
    lam, q = np.linalg.eigh(a)
    tol = EIG_RTOL * float(np.max(np.abs(lam)))
    if lam[0] < -tol:
        raise NotPSD(f"minimum eigenvalue {lam[0]:.3g} < -{tol:.3g}")
    root = (q * np.sqrt(np.clip(lam, 0.0, None))) @ q.T
    return (root + root.T) / 2.0


def c_coefficient(r, *, r_half: np.ndarray | None = None) -> float:
    """Hadamard functional ``(1/p) tr[(R^{1/2} o R^{1/2})^2]`` of a correlation matrix.

    Equals 1 for the identity and is smaller otherwise (never below 1/p). A precomputed square
    root may be passed as `r_half`.
    """
    half = sym_sqrt(r) if r_half is None else np.asarray(r_half, dtype=np.float64)
    had = half * half
    # tr(H^2) = ||H||_F^2 for symmetric H
    return fsum_array(had * had) / half.shape[0]


def trace_sq_deviation(r) -> float:
    """``tr((R - I)^2)``, i.e. the sum of squared off-diagonal entries."""
    a = np.array(r, dtype=np.float64)
    np.fill_diagonal(a, 0.0)
    return fsum_array(a * a)


def spectral_norm(m) -> float:
    return float(np.max(np.abs(np.linalg.eigvalsh(as_symmetric(m)))))


def read_matrix_csv(path: str | Path) -> np.ndarray:
    """Read a headerless p x p CSV matrix, checking symmetry to 1e-9."""
    a = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    return as_symmetric(a, atol=CSV_SYMMETRY_ATOL)


def read_data_csv(path: str | Path) -> np.ndarray:
    """Read a headerless p x n data matrix (rows are variables)."""
    a = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    if not np.all(np.isfinite(a)):
        raise InvalidInputs(f"{path}: non-finite entries")
    return a


def write_csv(path: str | Path, m) -> None:
    np.savetxt(path, np.asarray(m, dtype=np.float64), delimiter=",", fmt="%.17g")
