"""Scatterer size distributions from ultrasonic backscatter spectra."""

from .bank import FormFactorBank, build_bank, load_bank, save_bank
from .estimator import (
    SizeDistributionEstimate,
    SuppressionPolicy,
    estimate_constrained,
    estimate_unconstrained,
    normalize_distribution,
    weights_to_number_density,
)
from .evaluation import estimable_size_range, evaluate, noise_sweep
from .faran import GLASS_BEADS, AcousticMaterials, backscatter_cross_section
from .phantom import PhantomSpec, SizeDistributionSpec, default_phantoms, synthesize_phantom

__all__ = [
    "GLASS_BEADS",
    "AcousticMaterials",
    "FormFactorBank",
    "PhantomSpec",
    "SizeDistributionEstimate",
    "SizeDistributionSpec",
    "SuppressionPolicy",
    "backscatter_cross_section",
    "build_bank",
    "default_phantoms",
    "estimable_size_range",
    "estimate_constrained",
    "estimate_unconstrained",
    "evaluate",
    "load_bank",
    "noise_sweep",
    "normalize_distribution",
    "save_bank",
    "synthesize_phantom",
    "weights_to_number_density",
]
