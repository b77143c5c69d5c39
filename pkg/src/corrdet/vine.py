"""Random correlation matrices with density proportional to ``det(R)^(eta-1)``.

A C-vine assigns to tree level ``k`` (k = 1..p-1) the partial correlations
``rho[k-1, j] = rho_{k,j; 1..k-1}`` for ``j > k-1`` (0-based storage in the
strict upper triangle). Drawing them independently as ``2B - 1`` with
``B ~ Beta(b_k, b_k)``, ``b_k = eta + (p - 1 - k) / 2`` gives the target
density, and every off-diagonal entry is then marginally
``Beta(eta - 1 + p/2, eta - 1 + p/2)`` on (-1, 1).

The determinant factors over vine edges, ``det R = prod (1 - rho_e^2)``, so
the log-determinant of very large draws is available without forming R.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter, NumericalBreakdown
from .matrix_core import fsum_array
from .sampler import Seed, philox_key

PARTIAL_CLAMP = 1.0 - 1e-12
BREAKDOWN_GAP = 1e-15


@dataclass(frozen=True)
class VineSample:
    p: int
    eta: float
    partials: np.ndarray  # (p, p), strict upper triangle used
    seed: object = None


def level_shapes(p: int, eta: float) -> np.ndarray:
    """Beta parameter ``b_k`` for tree levels k = 1..p-1."""
    k = np.arange(1, p)
    return eta + (p - 1 - k) / 2.0


def _check(p: int, eta: float) -> None:
    if p < 2:
        raise InvalidParameter(f"need p >= 2, got {p}")
    if not eta > 0:
        raise InvalidParameter(f"eta must be positive, got {eta}")


def _generator(seed: Seed) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=philox_key(seed)))


def _level_draws(rng: np.random.Generator, p: int, eta: float):
    for k, b in enumerate(level_shapes(p, eta), start=1):
        beta = rng.beta(b, b, size=p - k)
        yield k, beta


def _log_one_minus_sq_from_beta(beta: np.ndarray) -> np.ndarray:
    # rho = 2B - 1  =>  1 - rho^2 = 4 B (1 - B)
    rho = np.clip(2.0 * beta - 1.0, -PARTIAL_CLAMP, PARTIAL_CLAMP)
    return np.log1p(-rho) + np.log1p(rho)


def draw_vine(p: int, eta: float, seed: Seed) -> VineSample:
    _check(p, eta)
    rng = _generator(seed)
    partials = np.zeros((p, p))
    for k, beta in _level_draws(rng, p, eta):
        partials[k - 1, k:] = np.clip(2.0 * beta - 1.0, -PARTIAL_CLAMP, PARTIAL_CLAMP)
    return VineSample(p=p, eta=float(eta), partials=partials, seed=seed)


def draw_vine_logdet(p: int, eta: float, seed: Seed) -> float:
    """``log det`` of ``draw_vine(p, eta, seed)`` in O(p) memory per level."""
    _check(p, eta)
    rng = _generator(seed)
    total = [fsum_array(_log_one_minus_sq_from_beta(beta)) for _, beta in _level_draws(rng, p, eta)]
    return fsum_array(total)


def logdet_from_partials(sample: VineSample) -> float:
    iu = np.triu_indices(sample.p, k=1)
    rho = sample.partials[iu]
    return fsum_array(np.log1p(-rho) + np.log1p(rho))


def reconstruct_matrix(sample: VineSample) -> np.ndarray:
    """Dense correlation matrix encoded by the C-vine partial correlations.

    Each entry is recovered from its partial by undoing the conditioning
    one variable at a time,
    ``rho_{k,i;L} = rho_{k,i;L+l} sqrt((1-rho_{l,i;L}^2)(1-rho_{l,k;L}^2)) + rho_{l,i;L} rho_{l,k;L}``,
    for ``l = k-1, ..., 0`` with ``L = {0..l-1}``.
    """
    p = sample.p
    part = sample.partials
    iu = np.triu_indices(p, k=1)
    if np.any(1.0 - np.abs(part[iu]) < BREAKDOWN_GAP):
        raise NumericalBreakdown("a partial correlation is within 1e-15 of +-1")
    comp = np.sqrt((1.0 - part) * (1.0 + part))
    r = np.eye(p)
    for k in range(p - 1):
        rho = part[k, k + 1:].copy()
        for l in range(k - 1, -1, -1):
            rho = rho * comp[l, k + 1:] * comp[l, k] + part[l, k + 1:] * part[l, k]
        r[k, k + 1:] = rho
        r[k + 1:, k] = rho
    return r
