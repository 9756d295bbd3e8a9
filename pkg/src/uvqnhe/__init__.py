"""Shot-noise laboratory for VQE, VQNHE and unitary VQNHE on small qubit Hamiltonians."""

from .circuit import AnsatzSpec, Circuit, Gate, ShotCounts, Statevector, build_hea, run_circuit, sample_counts
from .errors import (
    CircuitError,
    ConfigError,
    EstimatorError,
    ModelError,
    PauliParseError,
    ResourceError,
    TrainingError,
    UvqnheError,
)
from .hamiltonian import Hamiltonian, PauliString, exact_ground_energy, tfim_hamiltonian
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "AnsatzSpec",
    "BACKEND",
    "Circuit",
    "CircuitError",
    "ConfigError",
    "EstimatorError",
    "Gate",
    "Hamiltonian",
    "ModelError",
    "PauliParseError",
    "PauliString",
    "ResourceError",
    "ShotCounts",
    "Statevector",
    "TrainingError",
    "UvqnheError",
    "build_hea",
    "exact_ground_energy",
    "run_circuit",
    "sample_counts",
    "tfim_hamiltonian",
]
