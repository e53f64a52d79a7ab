"""Aharonov-Bohm laboratory: GO predictions, lattice TDSE, electric AB and flux recovery."""

from ._core import (
    AmbiguityError,
    Beam,
    ConfigError,
    ConsistencyError,
    DataError,
    DesignFailureError,
    DomainError,
    Error,
    ExperimentDesignError,
    GeometryError,
    RankDeficientError,
    ReflectionBudgetError,
    Scene,
    design_measurements,
    electric_discrepancy,
    interference_intensity,
    invert_intensity,
    loop_flux,
    predict_two_beam,
    recover,
    solve_mod2pi,
    tdse_evolve,
    trace,
    winding_numbers,
)

__version__ = "0.1.0"

__all__ = [
    "AmbiguityError",
    "Beam",
    "ConfigError",
    "ConsistencyError",
    "DataError",
    "DesignFailureError",
    "DomainError",
    "Error",
    "ExperimentDesignError",
    "GeometryError",
    "RankDeficientError",
    "ReflectionBudgetError",
    "Scene",
    "design_measurements",
    "electric_discrepancy",
    "interference_intensity",
    "invert_intensity",
    "loop_flux",
    "predict_two_beam",
    "recover",
    "solve_mod2pi",
    "tdse_evolve",
    "trace",
    "winding_numbers",
]
