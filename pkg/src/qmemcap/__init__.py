"""Classical capacity and strong-converse experiments for quantum channels with Markov memory."""

__version__ = "0.1.0"

from .capacity import CapacityEstimate, Ensemble, OptimizerConfig, capacity_sequence, holevo_quantity, product_capacity
from .channel import (
    KrausChannel,
    MemoryChannel,
    apply_memory,
    apply_memory_bruteforce,
    apply_memory_product,
    conditional_block_states,
    depolarizing_channel,
    identity_channel,
    load_channel,
    save_channel,
)
from .markov import MarkovChain, mixing_length, stationary_distribution
from .operators import DensityOperator, eig_hermitian, partial_trace, trace_distance, von_neumann_entropy

__all__ = [
    "CapacityEstimate",
    "DensityOperator",
    "Ensemble",
    "KrausChannel",
    "MarkovChain",
    "MemoryChannel",
    "OptimizerConfig",
    "apply_memory",
    "apply_memory_bruteforce",
    "apply_memory_product",
    "capacity_sequence",
    "conditional_block_states",
    "depolarizing_channel",
    "eig_hermitian",
    "holevo_quantity",
    "identity_channel",
    "load_channel",
    "mixing_length",
    "partial_trace",
    "product_capacity",
    "save_channel",
    "stationary_distribution",
    "trace_distance",
    "von_neumann_entropy",
]
