"""Discrete-event simulation of heralded entanglement between two AFC quantum memories.

Photonic states are density matrices over truncated Fock spaces, held in a
keyed state manager owned by the simulation timeline.
"""

from .analysis import (
    AnalyticOracle,
    EffectiveState,
    InterferencePoint,
    SinusoidFit,
    analytic_heralded_state,
    assemble_reconstruction,
    effective_density_matrix,
    effective_fidelity,
    fit_sinusoid,
    generation_rate,
    tomography_coherence,
    tomography_diagonal,
)
from .config import ConfigError, ExperimentConfig, load_config
from .fock import DensityMatrix, FockSpace, Ket, KrausChannel, NumericalError, Povm
from .hardware import Herald
from .kernel import Entity, Event, Timeline
from .protocol import Topology, TrialRecord, run_cycle, run_trials
from .state_manager import QuantumManager

__version__ = "0.1.0"
