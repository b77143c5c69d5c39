"""Population correlation families (identity, AR(1), equicorrelation, explicit)."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import InvalidParameter
from .matrix_core import as_symmetric, read_matrix_csv

Family = Literal["identity", "ar1", "equi", "explicit"]

NORM_WARN_LIMIT = 20.0
MIN_EIG_WARN = 1e-8


class AssumptionWarning(UserWarning):
    """A population violates the bounded-spectral-norm / well-conditioned regime."""


@dataclass(frozen=True)
class PopulationSpec:
    """A structured population correlation matrix of dimension `dim`.

    ``ar1`` and ``equi`` with a zero coefficient normalize to ``identity``.
    """

    family: Family
    dim: int
    coef: float = 0.0
    matrix: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidParameter(f"dimension must be positive, got {self.dim}")
        if self.family in ("ar1", "equi") and self.coef == 0.0:
            object.__setattr__(self, "family", "identity")
        if self.family == "ar1" and not -1.0 < self.coef < 1.0:
            raise InvalidParameter(f"AR(1) coefficient must lie in (-1, 1), got {self.coef}")
        if self.family == "equi" and not 0.0 < self.coef < 1.0:
            raise InvalidParameter(f"equicorrelation must lie in (0, 1), got {self.coef}")
        if self.family == "explicit":
            if self.matrix is None:
                raise InvalidParameter("explicit population needs a matrix")
            m = as_symmetric(self.matrix)
            if m.shape[0] != self.dim:
                raise InvalidParameter(f"matrix is {m.shape[0]}x{m.shape[0]}, expected dim {self.dim}")
            if np.max(np.abs(np.diagonal(m) - 1.0)) > 1e-12:
                raise InvalidParameter("explicit correlation matrix needs a unit diagonal")
            if np.linalg.eigvalsh(m)[0] < -1e-10 * max(1.0, float(np.max(np.abs(m)))):
                raise InvalidParameter("explicit correlation matrix is not PSD")
            object.__setattr__(self, "matrix", m)
        elif self.family not in ("identity", "ar1", "equi"):
            raise InvalidParameter(f"unknown population family {self.family!r}")

    @property
    def label(self) -> str:
        if self.family == "identity":
            return "identity"
        if self.family == "explicit":
            return "explicit"
        return f"{self.family}:{self.coef:g}"


def build_correlation(spec: PopulationSpec) -> np.ndarray:
    p = spec.dim
    if spec.family == "identity":
        return np.eye(p)
    if spec.family == "ar1":
        idx = np.arange(p)
        lag = np.abs(idx[:, None] - idx[None, :])
        r = np.power(spec.coef, lag.astype(np.float64))
    elif spec.family == "equi":
        r = np.full((p, p), spec.coef)
    else:
        r = np.array(spec.matrix, dtype=np.float64)
    np.fill_diagonal(r, 1.0)
    return r


def closed_form_logdet(spec: PopulationSpec) -> float | None:
    p, c = spec.dim, spec.coef
    if spec.family == "identity":
        return 0.0
    if spec.family == "ar1":
        return (p - 1) * math.log1p(-c * c)
    if spec.family == "equi":
        return (p - 1) * math.log1p(-c) + math.log1p((p - 1) * c)
    return None


def closed_form_trace_sq(spec: PopulationSpec) -> float | None:
    p, c = spec.dim, spec.coef
    if spec.family == "identity":
        return 0.0
    if spec.family == "equi":
        return p * (p - 1) * c * c
    if spec.family == "ar1":
        c2 = c * c
        return 2.0 * math.fsum((p - k) * c2**k for k in range(1, p))
    return None


def check_assumptions(r: np.ndarray) -> list[str]:
    """Flag populations outside the bounded-norm, well-conditioned regime.

    Issues an AssumptionWarning per problem and returns the messages; never raises.
    """
    lam = np.linalg.eigvalsh(as_symmetric(r))
    issues = []
    if lam[-1] > NORM_WARN_LIMIT:
        issues.append(f"spectral norm {lam[-1]:.4g} exceeds {NORM_WARN_LIMIT:g}")
    if lam[0] < MIN_EIG_WARN:
        issues.append(f"minimum eigenvalue {lam[0]:.3g} below {MIN_EIG_WARN:g}")
    for msg in issues:
        warnings.warn(msg, AssumptionWarning, stacklevel=2)
    return issues


def parse_population(text: str, dim: int | None = None) -> PopulationSpec:
    """Parse ``identity``, ``ar1:<a>``, ``equi:<rho>`` or ``file:<path.csv>``.

    `dim` is required for the structured families; for ``file:`` it is
    inferred (and checked if given).
    """
    kind, _, arg = text.strip().partition(":")
    kind = kind.lower()
    if kind == "file":
        m = read_matrix_csv(arg)
        if dim is not None and m.shape[0] != dim:
            raise InvalidParameter(f"{arg}: matrix dimension {m.shape[0]} != {dim}")
        return PopulationSpec("explicit", m.shape[0], matrix=m)
    if dim is None:
        raise InvalidParameter(f"population {text!r} needs a dimension")
    if kind == "identity" and not arg:
        return PopulationSpec("identity", dim)
    if kind in ("ar1", "equi") and arg:
        try:
            coef = float(arg)
        except ValueError:
            raise InvalidParameter(f"bad coefficient in population {text!r}") from None
        return PopulationSpec(kind, dim, coef)
    raise InvalidParameter(f"unrecognized population {text!r}")
