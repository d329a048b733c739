"""Curve fitting and coherence-time algebra."""

from .coherence import (
    ERROR_LAW_COEFFICIENT,
    CoherenceBudget,
    ErrorLaw,
    InconsistentBudgetError,
    combine_coherence,
    combine_lifetimes,
    error_from_t2star,
    estimate_scatter_lifetime,
    estimate_t2_doppler,
    estimate_t2_ground,
    extract_coherence,
    fit_error_law,
    t2_prime_from_echo,
)
from .fitting import (
    Contrast,
    FitError,
    FitResult,
    LinearFit,
    extract_contrast,
    fit_cosine,
    fit_curve,
    fit_damped_cosine,
    fit_exponential_decay,
    fit_gaussian_decay,
    fit_inverse_sqrt,
    fit_line,
    fit_parabola,
    stderr_weights,
    fit_pi_train,
    fit_ramsey_kuhr,
)
from .models import MODELS, kuhr_alpha, kuhr_kappa
