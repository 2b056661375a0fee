"""Quantum-jump simulations of classical/quantum hybrid systems.

Ensemble (master equation) and individual (piecewise-deterministic jump
process) descriptions over a block-diagonal algebra, the spin-1/2 fuzzy
detector model with its Bloch-sphere chaos game, and fractal diagnostics.
"""

from .algebra import (
    BlockOperator,
    CouplingMap,
    DensityFamily,
    Model,
    PureState,
    SectorSpec,
    Segment,
    build_lambda,
    effective_generator,
    liouville_rhs,
)
from .bloch import DetectorConfig, builtin_config, chaos_game, jump_map, jump_probabilities
from .liouville import IntegratorConfig, evolve_density, trace_distance
from .pdp import run_ensemble, run_trajectory
from .rng import RngStream

__version__ = "0.1.0"
