"""Closed-form moments of quadratic forms ``z^T A z`` in i.i.d. standardized entries.

Entries have mean 0, variance 1, fourth moment `nu4` and (where needed)
sixth moment `nu6`; the third moment is taken to be zero, as for every
symmetric noise law in this package. ``tr(A o B)`` denotes the trace of the
Hadamard product, i.e. ``sum_i A_ii B_ii``.
"""

from __future__ import annotations

import numpy as np

from .errors import MissingNu6, ShapeMismatch


def _square(*mats) -> list[np.ndarray]:
    out = [np.asarray(m, dtype=np.float64) for m in mats]
    n = out[0].shape[0]
    for m in out:
        if m.ndim != 2 or m.shape != (n, n):
            raise ShapeMismatch(f"expected {n}x{n} matrices, got {m.shape}")
    return out


def _had_trace(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.dot(np.diagonal(a), np.diagonal(b)))


def expected_product(a, b, nu4: float) -> float:
    """``E[z^T A z * z^T B z] = trA trB + 2 tr(AB) + (nu4 - 3) tr(A o B)``."""
    a, b = _square(a, b)
    tr_ab = float(np.sum(a * b.T))
    return np.trace(a) * np.trace(b) + 2.0 * tr_ab + (nu4 - 3.0) * _had_trace(a, b)


def variance_qf(a, nu4: float) -> float:
    """``Var(z^T A z) = 2 tr(A^2) + (nu4 - 3) tr(A o A)``."""
    (a,) = _square(a)
    return 2.0 * float(np.sum(a * a.T)) + (nu4 - 3.0) * _had_trace(a, a)


def third_central_qf(a, nu4: float, nu6: float | None) -> float:
    """Third central moment of ``z^T A z``:
    ``8 tr(A^3) + 12 (nu4 - 3) tr(A o A^2) + (nu6 - 15 nu4 + 30) tr(A o A o A)``.
    """
    if nu6 is None or not np.isfinite(nu6):
        raise MissingNu6("third central moment needs a finite sixth moment")
    (a,) = _square(a)
    a2 = a @ a
    d = np.diagonal(a)
    return (8.0 * float(np.sum(a2 * a.T))
            + 12.0 * (nu4 - 3.0) * _had_trace(a, a2)
            + (nu6 - 15.0 * nu4 + 30.0) * float(np.sum(d**3)))


def _expected_triple_product(a, b, c, nu4: float, nu6: float) -> float:
    # Cross-check helper for tests. The fourth-cumulant pairing across two
    # different forms contributes tr(C o (AB)) = sum_i C_ii (AB)_ii.
    a, b, c = _square(a, b, c)
    ta, tb, tc = np.trace(a), np.trace(b), np.trace(c)
    k4 = nu4 - 3.0
    k6 = nu6 - 15.0 * nu4 + 30.0
    ab, ac, bc = a @ b, a @ c, b @ c
    return (ta * tb * tc
            + 2.0 * (ta * np.trace(bc) + tb * np.trace(ac) + tc * np.trace(ab))
            + k4 * (ta * _had_trace(b, c) + tb * _had_trace(a, c) + tc * _had_trace(a, b))
            + 4.0 * k4 * (_had_trace(a, bc) + _had_trace(b, ac) + _had_trace(c, ab))
            + k6 * float(np.sum(np.diagonal(a) * np.diagonal(b) * np.diagonal(c)))
            + 8.0 * np.trace(ab @ c))
