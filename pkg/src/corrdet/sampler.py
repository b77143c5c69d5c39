"""Noise generation, population mixing and sample correlation matrices.

Random numbers are counter-based: entry ``(i, j)`` of a noise matrix is a
fixed function of ``(seed, i, j)``. Row ``i`` is read from a Philox4x64
stream whose high counter word is ``i``; entry ``j`` consumes the fixed-size
block of 64-bit words ``[j*k, (j+1)*k)`` where ``k`` depends only on the
distribution. Results therefore do not depend on matrix shape, draw order or
the worker that produced them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence, Union

import numpy as np
from scipy import special

from .errors import DegenerateRow, InvalidParameter, ShapeMismatch

Seed = Union[int, Sequence[int], np.random.SeedSequence]

DEGENERATE_SS = 1e-300
# integer degrees of freedom up to this bound use the exact normal/exponential
# representation; larger or fractional values fall back to the inverse CDF
_MAX_EXACT_DF = 64


@dataclass(frozen=True)
class NoiseDistribution:
    """Zero-mean, unit-variance noise law.

    kind
        ``normal``, ``t`` (Student t with `param` degrees of freedom, rescaled
        to unit variance) or ``siginv`` (inverse gamma with shape `param` and
        scale ``sqrt((a-1)(a-2))``, multiplied by an independent random sign).
    """

    kind: Literal["normal", "t", "siginv"] = "normal"
    param: float | None = None

    def __post_init__(self):
        if self.kind == "normal":
            object.__setattr__(self, "param", None)
        elif self.kind == "t":
            if self.param is None or not self.param > 2:
                raise InvalidParameter(f"t degrees of freedom must exceed 2, got {self.param}")
        elif self.kind == "siginv":
            if self.param is None or not self.param > 2:
                raise InvalidParameter(f"inverse-gamma shape must exceed 2, got {self.param}")
        else:
            raise InvalidParameter(f"unknown distribution {self.kind!r}")

    @property
    def label(self) -> str:
        return "normal" if self.kind == "normal" else f"{self.kind}:{self.param:g}"

    @property
    def words_per_entry(self) -> int:
        if self.kind == "normal":
            return 1
        if self.kind == "t":
            df = self.param
            if _exact_integer(df):
                df = int(df)
                return 1 + df // 2 + df % 2
            return 1
        a = self.param
        return 1 + (int(a) if _exact_integer(a) else 1)


def _exact_integer(x: float) -> bool:
    return float(x).is_integer() and x <= _MAX_EXACT_DF


def parse_distribution(text: str) -> NoiseDistribution:
    """Parse ``normal``, ``t:<df>`` or ``siginv:<shape>``."""
    kind, _, arg = text.strip().partition(":")
    kind = kind.lower()
    if kind == "normal" and not arg:
        return NoiseDistribution("normal")
    if kind in ("t", "siginv") and arg:
        try:
            value = float(arg)
        except ValueError:
            raise InvalidParameter(f"bad parameter in distribution {text!r}") from None
        return NoiseDistribution(kind, value)
    raise InvalidParameter(f"unrecognized distribution {text!r}")


def kurtosis_of(dist: NoiseDistribution) -> float:
    """Fourth moment ``E|x|^4`` of the standardized noise (``math.inf`` if it diverges)."""
    if dist.kind == "normal":
        return 3.0
    if dist.kind == "t":
        nu = dist.param
        return 3.0 * (nu - 2.0) / (nu - 4.0) if nu > 4 else math.inf
    a = dist.param
    return (a - 1.0) * (a - 2.0) / ((a - 3.0) * (a - 4.0)) if a > 4 else math.inf


def philox_key(seed: Seed) -> np.ndarray:
    if isinstance(seed, np.random.SeedSequence):
        ss = seed
    elif isinstance(seed, (int, np.integer)):
        ss = np.random.SeedSequence(int(seed))
    else:
        seed = tuple(int(s) for s in seed)
        ss = np.random.SeedSequence(seed[0], spawn_key=seed[1:])
    return ss.generate_state(2, np.uint64)


def stream_seed(master_seed: int, *stream: int) -> np.random.SeedSequence:
    """Seed for an independent stream identified by ``(master_seed, *stream)``."""
    return np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(s) for s in stream))


def _uniforms(key: np.ndarray, row: int, count: int) -> np.ndarray:
    bg = np.random.Philox(key=key, counter=np.array([0, row, 0, 0], dtype=np.uint64))
    raw = bg.random_raw(count)
    # 53-bit midpoint grid: strictly inside (0, 1)
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def _transform(dist: NoiseDistribution, u: np.ndarray) -> np.ndarray:
    """Map an (n, k) block of uniforms to n noise values."""
    if dist.kind == "normal":
        return special.ndtri(u[:, 0])
    if dist.kind == "t":
        nu = dist.param
        if u.shape[1] == 1:
            t = special.stdtrit(nu, u[:, 0])
        else:
            df = int(nu)
            z = special.ndtri(u[:, 0])
            half = df // 2
            if half <= 16:
                # product of <= 16 words of 53 bits cannot underflow
                chi2 = -2.0 * np.log(np.prod(u[:, 1:1 + half], axis=1))
            else:
                chi2 = -2.0 * np.log(u[:, 1:1 + half]).sum(axis=1)
            if df % 2:
                chi2 += special.ndtri(u[:, 1 + half]) ** 2
            t = z / np.sqrt(chi2 / df)
        return t * math.sqrt((nu - 2.0) / nu)
    a = dist.param
    sign = np.where(u[:, 0] < 0.5, -1.0, 1.0)
    if u.shape[1] == 2 and not _exact_integer(a):
        g = special.gammainccinv(a, u[:, 1])
    else:
        g = -np.log(u[:, 1:]).sum(axis=1)
    return sign * (math.sqrt((a - 1.0) * (a - 2.0)) / g)


def draw_noise(dist: NoiseDistribution, p: int, n: int, seed: Seed) -> np.ndarray:
    """p x n matrix of i.i.d. standardized noise; entry (i, j) depends only on (seed, i, j)."""
    if p < 1 or n < 1:
        raise InvalidParameter(f"need p, n >= 1, got p={p}, n={n}")
    key = philox_key(seed)
    k = dist.words_per_entry
    out = np.empty((p, n), dtype=np.float64)
    for i in range(p):
        out[i] = _transform(dist, _uniforms(key, i, n * k).reshape(n, k))
    return out


def apply_population(x: np.ndarray, r_half: np.ndarray | None) -> np.ndarray:
    """``Y = R^{1/2} X``; ``None`` or an exact identity returns `x` untouched."""
    if r_half is None:
        return x
    r_half = np.asarray(r_half, dtype=np.float64)
    p = x.shape[0]
    if r_half.shape != (p, p):
        raise ShapeMismatch(f"R^(1/2) is {r_half.shape}, data has {p} rows")
    if np.array_equal(r_half, np.eye(p)):
        return x
    return r_half @ x


def sample_covariance(y: np.ndarray, centered: bool) -> np.ndarray:
    """``S = Y Y^T / n`` or, centered, ``(Y - mean)(Y - mean)^T / (n - 1)``."""
    y = np.asarray(y, dtype=np.float64)
    n = y.shape[1]
    if centered:
        yc = y - y.mean(axis=1, keepdims=True)
        s = yc @ yc.T / (n - 1)
    else:
        s = y @ y.T / n
    return (s + s.T) / 2.0


def sample_correlation(y: np.ndarray, centered: bool) -> np.ndarray:
    """Sample correlation matrix ``diag(S)^{-1/2} S diag(S)^{-1/2}`` of the rows of `y`.

    The diagonal is exactly 1. Raises DegenerateRow for a row with
    (centered) sum of squares at most 1e-300, or, when centering, for a
    constant row (whose centered values are pure rounding residue).
    """
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 2 or y.shape[1] < 2:
        raise ShapeMismatch(f"need a p x n matrix with n >= 2, got shape {y.shape}")
    yc = y - y.mean(axis=1, keepdims=True) if centered else y
    ss = np.einsum("ij,ij->i", yc, yc)
    ok = ss > DEGENERATE_SS
    if centered:
        ok &= np.ptp(y, axis=1) > 0.0
    bad = np.flatnonzero(~ok)
    if bad.size:
        raise DegenerateRow(int(bad[0]))
    # normalizing rows first makes the result exactly scale-free up to rounding
    z = yc / np.sqrt(ss)[:, None]
    r = z @ z.T
    r = (r + r.T) / 2.0
    np.fill_diagonal(r, 1.0)
    return r
