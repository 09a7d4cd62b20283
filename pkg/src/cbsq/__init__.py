"""Pseudo-spectral toolkit for Couette-flow perturbations of the 2D
Boussinesq system with full or vertical-only dissipation."""

__version__ = "0.1.0"

from .spectral import (FrequencyLattice, PhysicsParams, SpectralField,
                       biot_savart, dealiased_product, fractional_dx,
                       lambda_shear_weight, project_nonzero, project_zero,
                       weighted_l2_norm)

__all__ = [
    "FrequencyLattice", "PhysicsParams", "SpectralField", "biot_savart",
    "dealiased_product", "fractional_dx", "lambda_shear_weight",
    "project_nonzero", "project_zero", "weighted_l2_norm", "__version__",
]
