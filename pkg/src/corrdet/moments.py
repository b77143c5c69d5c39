"""Asymptotic mean and variance of the log-determinant of a sample correlation matrix.

For ``p / n -> gamma in (0, 1]`` the standardized statistic
``(log det R_hat - mu) / sigma`` is asymptotically standard normal, with

    mu     = log det R + (p - n + 1/2) log(1 - (p-1)/n) - (p - 1) + p/n
             + (p / 2n) (nu4 - 3) (C - 1)
    sigma2 = -2 log(1 - (p-1)/n) - 2 p/n + (2/n) tr(R - I)^2

where ``C = (1/p) tr[(R^{1/2} o R^{1/2})^2]`` and ``nu4 = E|x|^4``. Since the
rows of ``R^{1/2} o R^{1/2}`` are non-negative and sum to one, ``C <= 1``
with equality exactly for ``R = I``, where the kurtosis term vanishes. For the
centered (mean-subtracted) sample correlation matrix the mean is the same
expression with ``n`` replaced by ``n - 1``; the variance is unchanged.

At ``p = n`` these reduce to ``mu ~ log det R - log(n)/2 - n`` and
``sigma2 ~ 2 log n`` up to additive constants that are negligible relative
to sigma; the unified formulas are used everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import InfiniteKurtosisWithoutPivotality, InvalidInputs, NonPositiveVariance
from .matrix_core import c_coefficient, cholesky_logdet, sym_sqrt, trace_sq_deviation

Centering = Literal["noncentered", "centered"]

INFINITE_KURTOSIS = math.inf


@dataclass(frozen=True)
class MomentInputs:
    p: int
    n: float
    logdet_r: float = 0.0
    kurtosis: float = 3.0
    c_coeff: float = 1.0
    trace_sq: float = 0.0
    centering: Centering = "noncentered"

    def __post_init__(self):
        limit = self.n if self.centering == "noncentered" else self.n - 1
        if self.centering not in ("noncentered", "centered"):
            raise InvalidInputs(f"unknown centering {self.centering!r}")
        if not 2 <= self.p <= limit:
            raise InvalidInputs(
                f"need 2 <= p <= {'n' if self.centering == 'noncentered' else 'n-1'}, "
                f"got p={self.p}, n={self.n}"
            )
        if math.isnan(self.kurtosis) or self.kurtosis < 1.0:
            raise InvalidInputs(f"fourth moment must be >= 1, got {self.kurtosis}")
        # R^{1/2} o R^{1/2} is doubly stochastic, so 1/p <= C <= 1 (C = 1 iff R = I)
        if not 1.0 / self.p - 1e-12 <= self.c_coeff <= 1.0 + 1e-12:
            raise InvalidInputs(f"C coefficient must lie in [1/p, 1], got {self.c_coeff}")
        if not self.trace_sq >= 0.0:
            raise InvalidInputs(f"tr(R-I)^2 must be >= 0, got {self.trace_sq}")
        if not self.logdet_r <= 0.0:
            raise InvalidInputs(f"log det R must be <= 0, got {self.logdet_r}")

    @classmethod
    def from_correlation(cls, r, p_n: tuple[int, float], kurtosis: float = 3.0,
                         centering: Centering = "noncentered") -> MomentInputs:
        """Derive log det R, C and tr(R-I)^2 from a dense population matrix."""
        r = np.asarray(r, dtype=np.float64)
        p, n = p_n
        if r.shape != (p, p):
            raise InvalidInputs(f"population is {r.shape}, expected ({p}, {p})")
        return cls(
            p=p, n=n,
            logdet_r=min(cholesky_logdet(r), 0.0),
            kurtosis=kurtosis,
            c_coeff=c_coefficient(r, r_half=sym_sqrt(r)),
            trace_sq=trace_sq_deviation(r),
            centering=centering,
        )


@dataclass(frozen=True)
class CltMoments:
    mu: float
    sigma2: float

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)


def log_one_minus_ratio(p: int, n: float) -> float:
    """``log(1 - (p-1)/n)`` accurate both for p << n and for p close to n."""
    ratio = (p - 1) / n
    if ratio < 0.5:
        return math.log1p(-ratio)
    return math.log(n - p + 1) - math.log(n)


def _mu(p: int, n: float, logdet_r: float, kurtosis: float, c_coeff: float) -> float:
    if c_coeff == 1.0:
        kurt_term = 0.0
    elif math.isinf(kurtosis):
        raise InfiniteKurtosisWithoutPivotality(
            f"an infinite fourth moment is only admissible for R = I (C = 1), got C = {c_coeff!r}"
        )
    else:
        kurt_term = p / (2.0 * n) * (kurtosis - 3.0) * (c_coeff - 1.0)
    terms = [
        logdet_r,
        (p - n + 0.5) * log_one_minus_ratio(p, n),
        -(p - 1.0),
        p / n,
        kurt_term,
    ]
    return math.fsum(terms)


def mu_noncentered(inputs: MomentInputs) -> float:
    if inputs.p > inputs.n:
        raise InvalidInputs(f"need p <= n, got p={inputs.p}, n={inputs.n}")
    return _mu(inputs.p, inputs.n, inputs.logdet_r, inputs.kurtosis, inputs.c_coeff)


def mu_centered(inputs: MomentInputs) -> float:
    """Mean for the centered statistic: the non-centered mean at ``n - 1``."""
    if inputs.p > inputs.n - 1:
        raise InvalidInputs(f"centered case needs p <= n-1, got p={inputs.p}, n={inputs.n}")
    return _mu(inputs.p, inputs.n - 1, inputs.logdet_r, inputs.kurtosis, inputs.c_coeff)


def sigma2(p: int, n: float, trace_sq: float = 0.0) -> float:
    if not 1 <= p <= n:
        raise InvalidInputs(f"need p <= n, got p={p}, n={n}")
    value = math.fsum([
        -2.0 * log_one_minus_ratio(p, n),
        -2.0 * p / n,
        2.0 * trace_sq / n,
    ])
    if not value > 0.0:
        raise NonPositiveVariance(f"sigma^2 = {value!r} for p={p}, n={n}")
    return value


def clt_moments(inputs: MomentInputs) -> CltMoments:
    if inputs.centering == "centered":
        mu = mu_centered(inputs)
    else:
        mu = mu_noncentered(inputs)
    return CltMoments(mu=mu, sigma2=sigma2(inputs.p, inputs.n, inputs.trace_sq))


def standardize(logdet_hat: float, moments: CltMoments) -> float:
    if not moments.sigma2 > 0.0:
        raise NonPositiveVariance(f"sigma^2 = {moments.sigma2!r}")
    if not math.isfinite(logdet_hat):
        raise InvalidInputs(f"log-determinant must be finite, got {logdet_hat}")
    return (logdet_hat - moments.mu) / math.sqrt(moments.sigma2)
