"""Drift-induced blocking of bistable fronts in infinite cylinders.

Modules:
    nonlinearity    bistable f, its linear extension, F and derived constants
    traveling_wave  wave speed and profile by phase-plane shooting
    drift           cross-sections, potential drifts, the weight psi and summaries
    criterion       the blocking inequality in both forms
    grid            tensor grids and psi-weighted operators
    supersolution   constrained minimisation, R-limit and extension by one
    simulator       explicit time integration and front classification
    sobolev         numerical lower bounds for the embedding constants
    config, cli     scenario files and the front-blocker command
"""

from .criterion import (
    CriterionReport, Exponents, Form, SobolevConstants, compute_delta, evaluate, exponents_for, optimize_a,
)
from .drift import CrossSection, DriftField, DriftSummary, concentrated, summarize, zero_drift
from .nonlinearity import (
    BistableNonlinearity, ExtendedNonlinearity, NonlinearityConstants, compute_constants, extend, make_cubic,
)
from .traveling_wave import WaveProfile, solve_wave, wave_at

__all__ = [
    "BistableNonlinearity", "CriterionReport", "CrossSection", "DriftField", "DriftSummary", "Exponents",
    "ExtendedNonlinearity", "Form", "NonlinearityConstants", "SobolevConstants", "WaveProfile",
    "compute_constants", "compute_delta", "concentrated", "evaluate", "exponents_for", "extend", "make_cubic",
    "optimize_a", "solve_wave", "summarize", "wave_at", "zero_drift",
]
