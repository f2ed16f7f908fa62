"""Quantitative photoacoustics in layered media.

Modal optical diffusion solver with sinh envelopes, damped modal wave
propagation with observability certificates, CGNE recovery of initial
pressure, two-illumination reconstruction of D and mu_a, and a seeded
stability harness.
"""

from .acoustic import (BoundaryTrace, ModalInitialData, ModalWaveOperator,
                       observability_constants, simulate_modal_wave)
from .errors import (CertificateViolation, ConfigError, HypothesisViolation, NumericalError,
                     PatlError, StructuralError)
from .harness import ExperimentConfig, depth_resolution_curve, run_pipeline
from .inversion_acoustic import (certify_finite_fourier, certify_observability,
                                 holder_one_side_bound, recover_modal_initial_data)
from .inversion_optical import Calibration, reconstruct, reconstruct_F, stability_diagnostics
from .kernels import BACKEND
from .medium import (AdmissibleBounds, CoefficientProfile, Grid1D, LayeredMedium,
                     check_admissibility, load_medium, random_medium, wavenumber)
from .optical import compute_envelopes, make_internal_data, solve_modal_bvp

__version__ = "0.1.0"

__all__ = [
    "AdmissibleBounds", "BACKEND", "BoundaryTrace", "Calibration", "CertificateViolation",
    "CoefficientProfile", "ConfigError", "ExperimentConfig", "Grid1D", "HypothesisViolation",
    "LayeredMedium", "ModalInitialData", "ModalWaveOperator", "NumericalError", "PatlError",
    "StructuralError", "certify_finite_fourier", "certify_observability",
    "check_admissibility", "compute_envelopes", "depth_resolution_curve",
    "holder_one_side_bound", "load_medium", "make_internal_data", "observability_constants",
    "random_medium", "reconstruct", "reconstruct_F", "recover_modal_initial_data",
    "run_pipeline", "simulate_modal_wave", "solve_modal_bvp", "stability_diagnostics",
    "wavenumber",
]
