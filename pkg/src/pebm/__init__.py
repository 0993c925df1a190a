"""Deterministic solver for a hydrostatic flow coupled to a reactive
surface energy balance, with period-map orbit finding and energy
certification diagnostics.

Submodules are imported lazily so the command-line entry can cap thread
pools via PEBM_THREADS before any numerical backend loads.
"""

from __future__ import annotations

import importlib

__version__ = "0.1.0"

_EXPORTS = {
    # grid
    "Grid": ".grid", "make_grid": ".grid",
    # fields
    "State": ".fields", "DerivedFields": ".fields", "zeros_state": ".fields",
    "random_state": ".fields", "validate_state": ".fields",
    "compute_derived": ".fields", "project_barotropic": ".fields",
    # physics
    "PhysicsParams": ".physics", "ForcingMode": ".physics",
    "ModeForcing": ".physics", "CallableForcing": ".physics",
    "zero_forcing": ".physics", "make_solar_field": ".physics",
    "reaction": ".physics", "coalbedo": ".physics",
    "absorption_constant_sq": ".physics",
    # stepper
    "StepperConfig": ".stepper", "Stepper": ".stepper", "step": ".stepper",
    "simulate": ".stepper", "iterate_states": ".stepper",
    "NumericsError": ".stepper", "BlowUpError": ".stepper",
    "ReactionGuardError": ".stepper",
    # orbit
    "OrbitConfig": ".orbit", "OrbitResult": ".orbit", "BallInfo": ".orbit",
    "period_map": ".orbit", "find_periodic": ".orbit",
    "gronwall_ball_radius": ".orbit", "find_steady_state": ".orbit",
    "steady_residual_norms": ".orbit",
    # diagnostics
    "EnergyTrace": ".diagnostics", "DifferenceTrace": ".diagnostics",
    "energy_inequality_residual": ".diagnostics",
    "max_subinterval_residual": ".diagnostics",
    "gronwall_envelope_check": ".diagnostics",
    "weak_strong_contraction": ".diagnostics",
    "reaction_work_bound": ".diagnostics",
    # config / io
    "Config": ".config", "ConfigError": ".config", "load_config": ".config",
    "save_config": ".config", "default_config": ".config",
    "build_system": ".config",
    "save_snapshot": ".snapshot", "load_snapshot": ".snapshot",
    "SnapshotError": ".snapshot",
}

__all__ = sorted(_EXPORTS) + ["__version__"]


def __getattr__(name: str):
    if name in _EXPORTS:
        module = importlib.import_module(_EXPORTS[name], __name__)
        return getattr(module, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return __all__
