"""Simulation and analysis of bilocality tests in entanglement-swapping networks."""
from .biloc import (
    BilocResult,
    Scenario,
    b_from_bloch,
    bilocality_parameter,
    classify_point,
    compute_I_J,
    find_violation_pairs,
    max_b_2233,
    max_b_3333,
    maximize_b,
    quantum_probability_table,
    shared_randomness_table,
    tripartite_correlator,
)
from .errors import InvalidInputError, NumericalConsistencyError, TheoremViolationError
from .qcore import NoiseModel, TwoQubitState, classical_mixture, correlation_tensor, singlet, werner

__version__ = "0.1.0"
