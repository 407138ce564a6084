"""Pulsed quantum annealing: dense simulation, transfer-matrix analysis and ensemble sweeps."""
from .dynamics import EvolutionResult, GapReport, evolve, evolve_many, min_gap
from .errors import InputError, NumericalError
from .model import AnnealSpec, PulseSchedule, SpinGlassInstance, generate_instance
from .suddentm import approx_sp, tm_evolve
from .sweep import PRESETS, Sampling, ensemble_run, optimize_instance, relative_sp

__all__ = [
    "AnnealSpec", "EvolutionResult", "GapReport", "InputError", "NumericalError", "PRESETS",
    "PulseSchedule", "Sampling", "SpinGlassInstance", "approx_sp", "ensemble_run", "evolve",
    "evolve_many", "generate_instance", "min_gap", "optimize_instance", "relative_sp", "tm_evolve",
]
__version__ = "0.1.0"
