"""Approximate Gaussian boson sampling via positive-P phase-space projection,
with a grouped-count / chi-squared / XEB validation harness and exact
desk-scale oracles."""

from .gaussian_state import (
    ComplexCovariance,
    Signature,
    SqueezerBank,
    TransmissionMatrix,
    apply_transmission,
    build_input_covariance,
    covariance_signature,
    fit_ground_truth_correction,
    haar_random_unitary,
    haar_transmission,
    input_moments,
    is_classical_input,
    y_quadrature_variance,
)
from .gcd import (
    GcdResult,
    Partition,
    batch_means_error,
    gcd_from_counts,
    gcd_pnr_from_ensemble,
    gcd_threshold_from_ensemble,
    marginal_distribution,
)
from .oracle import (
    GaussianOutputState,
    brute_force_gcd,
    click_pattern_probability,
    hafnian,
    pnr_pattern_probability,
    torontonian,
)
from .sampler import (
    CountDataset,
    PhaseSpaceEnsemble,
    ProjectedVariables,
    draw_input_samples,
    iterate_projection,
    propagate,
    run_sampling,
    sample_clicks,
    sample_counts,
    truncate_pnr,
    truncate_threshold,
    vacuum_probability,
    whiten_color,
)
from .stats import (
    ChiSquareResult,
    ValidationReport,
    XebResult,
    max_z_report,
    pearson_chi2,
    run_validation_suite,
    xeb_protocol,
    xeb_score,
    z_from_chi2,
)

__version__ = "0.1.0"
