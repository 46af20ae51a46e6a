"""Momentum jerk control with contact-stable wrench parametrization."""

from .errors import (
    ActuationDeficiencyError,
    ConfigError,
    DegenerateProblemError,
    DegradedAuthorityError,
    InvalidInputError,
    OutOfDomainError,
)
from .wrench import (
    ContactGeometry,
    SaturationPolicy,
    check_constraints,
    phi,
    phi_gradient,
    phi_inverse,
)
from .momentum import ContactFrame, MomentumState, contact_map, hdot, plant_step
from .controllers import GainSet, MomentumJerkController, Reference

__all__ = [
    "ActuationDeficiencyError",
    "ConfigError",
    "ContactFrame",
    "ContactGeometry",
    "DegenerateProblemError",
    "DegradedAuthorityError",
    "GainSet",
    "InvalidInputError",
    "MomentumJerkController",
    "MomentumState",
    "OutOfDomainError",
    "Reference",
    "SaturationPolicy",
    "check_constraints",
    "contact_map",
    "hdot",
    "phi",
    "phi_gradient",
    "phi_inverse",
    "plant_step",
]
