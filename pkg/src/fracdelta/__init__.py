"""Numerical laboratory for the fractional Schroedinger equation with a point nonlinearity."""

__version__ = "0.1.0"

from .spectral_kernels import ModelParams, SpectralGrid, build_grid, calibrate_grid
from .initial_data import InitialDatum, RegularPart, make_datum
from .charge_equation import ChargeTrajectory, SolverOptions, TimeGrid, solve_charge, solve_charge_graded
from .wavefunction import WaveSnapshot, march_snapshots
from .observables import ObservableSeries, observable_series
from .standing_waves import StandingWave, build_standing_wave
from .blowup_lab import RegimeReport, run_regime

__all__ = [
    "ModelParams", "SpectralGrid", "build_grid", "calibrate_grid",
    "InitialDatum", "RegularPart", "make_datum",
    "ChargeTrajectory", "SolverOptions", "TimeGrid", "solve_charge", "solve_charge_graded",
    "WaveSnapshot", "march_snapshots",
    "ObservableSeries", "observable_series",
    "StandingWave", "build_standing_wave",
    "RegimeReport", "run_regime",
]
