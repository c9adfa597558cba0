"""Random-data laboratory for the Benjamin-Ono flow in Birkhoff coordinates."""

__version__ = "0.1.0"

from .flow import FlowSpec, flow_full, flow_truncated, hamiltonian, phase_vector, vector_field
from .measures import AmplitudeSequence, RadialLaw, sample_ensemble, tail_mass_product
from .rng import CounterRNG
from .state import BirkhoffState

__all__ = [
    "__version__",
    "AmplitudeSequence",
    "BirkhoffState",
    "CounterRNG",
    "FlowSpec",
    "RadialLaw",
    "flow_full",
    "flow_truncated",
    "hamiltonian",
    "phase_vector",
    "sample_ensemble",
    "tail_mass_product",
    "vector_field",
]
