"""Discrete adiabatic quantum computation along quasienergies of rank-1
kicked Floquet operators."""

from .errors import AaqcError, NumericalError, PreconditionError
from .floquet import FloquetSystem, floquet_operator, kick_operator
from .passage import Schedule, linear_schedule, roland_cerf_schedule, run_passage, running_time
from .spectral import detect_anholonomy, min_gap, track_curves

__version__ = "0.1.0"

__all__ = [
    "AaqcError",
    "FloquetSystem",
    "NumericalError",
    "PreconditionError",
    "Schedule",
    "detect_anholonomy",
    "floquet_operator",
    "kick_operator",
    "linear_schedule",
    "min_gap",
    "roland_cerf_schedule",
    "run_passage",
    "running_time",
    "track_curves",
]
