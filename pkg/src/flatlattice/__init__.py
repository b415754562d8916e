"""Lattice-point discrepancy for planar convex bodies with flat boundary points."""

from .bodies import (
    Body2D,
    ClassReport,
    FlatPoint,
    ProfileSpec,
    area,
    flat_points,
    make_body,
    rotate_body,
    slice_extents,
    slice_width,
    verify_flat_class,
)
from .lattice import (
    BreakpointProfile,
    LpEstimate,
    count_points,
    discrepancy,
    lp_norm,
    profile_lp_integral,
    rotation_average_l2,
    sweep_profile,
)
from .spectral import (
    FourierSample,
    ScalingFit,
    chi_hat_2d,
    chi_hat_slice,
    decay_fit,
    parseval_l2,
    regime_report,
    sezioni_expansion,
)
from .asymptotics import (
    MollifierCoeffs,
    SeriesParams,
    a_series,
    badly_approximable_check,
    corollary_interference,
    g0_from_hessian,
    lemma_alpha_pair,
    main_term_Y,
    mollifier_coeffs,
    predicted_exponent,
)
from .lab import ExperimentConfig, RunReport, fit_scaling, run_experiment

__version__ = "0.1.0"
