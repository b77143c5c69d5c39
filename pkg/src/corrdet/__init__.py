"""Log-determinant CLT for large sample correlation matrices.

Asymptotic moments, tests of uncorrelatedness and of uniformity of random
correlation matrices, vine-based correlation sampling and a deterministic
Monte Carlo harness.
"""

from .errors import (
    ConfigError,
    CorrdetError,
    DegenerateRow,
    InvalidInputs,
    InvalidParameter,
    NotPositiveDefinite,
    NotPSD,
    NonPositiveVariance,
)
from .hypothesis_tests import (
    TestOutcome,
    normal_cdf,
    normal_quantile,
    test_uncorrelated,
    test_uniformity,
)
from .matrix_core import c_coefficient, cholesky_logdet, sym_sqrt, trace_sq_deviation
from .moments import (
    INFINITE_KURTOSIS,
    CltMoments,
    MomentInputs,
    clt_moments,
    mu_centered,
    mu_noncentered,
    sigma2,
    standardize,
)
from .population import PopulationSpec, build_correlation, closed_form_logdet, closed_form_trace_sq
from .sampler import (
    NoiseDistribution,
    apply_population,
    draw_noise,
    kurtosis_of,
    sample_correlation,
)
from .vine import VineSample, draw_vine, draw_vine_logdet, logdet_from_partials, reconstruct_matrix

__version__ = "0.1.0"
