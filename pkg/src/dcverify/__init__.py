"""Divide-and-conquer fidelity estimation for shallow circuits on sparse chips."""
from .circuit import CZ, Circuit, Single, linear_graph_state_circuit, load_circuit, parse_circuit, single
from .partition import Partition, LayeredDecomposition, decompose_circuit, find_min_cut
from .sim import IDEAL, NoiseModel, QuantumState
from .estimate import EstimatorConfig, FidelityEstimate, ShotRecord, algorithm1, required_shots
from .oracle import exact_cross_term, exact_fidelity
from .estimator import DirectPauliEstimator, DivideAndConquerVerifier
from ._validation import BudgetExceeded, CircuitError, NonCliffordError, PartitionError

__version__ = "0.1.0"

__all__ = [
    "CZ", "Circuit", "Single", "linear_graph_state_circuit", "load_circuit", "parse_circuit", "single",
    "Partition", "LayeredDecomposition", "decompose_circuit", "find_min_cut",
    "IDEAL", "NoiseModel", "QuantumState",
    "EstimatorConfig", "FidelityEstimate", "ShotRecord", "algorithm1", "required_shots",
    "exact_cross_term", "exact_fidelity",
    "DirectPauliEstimator", "DivideAndConquerVerifier",
    "BudgetExceeded", "CircuitError", "NonCliffordError", "PartitionError",
]
