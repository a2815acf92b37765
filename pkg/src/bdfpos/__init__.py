"""Dressed Dirac dispersion, Choquard-Pekar minimizer, positronium trial
energies and finite-dimensional projector geometry."""

from .energy import (
    EnergyBreakdown,
    ScanResult,
    TrialState,
    alpha_sweep,
    build_trial_state,
    exchange_oracle,
    lambda_scan,
    lambda_star,
    rank2_energy,
    state_density,
)
from .momentum import (
    DispersionTable,
    FixedPointOptions,
    ModelParams,
    RadialGrid,
    build_radial_grid,
    dispersion_diagnostics,
    free_dispersion,
    solve_dressed_dispersion,
)
from .pekar import PekarResult, RadialProfile, minimize_pekar, pekar_energy
from .spinors import CartesianGrid, SpinorField

__version__ = "0.1.0"
