"""QAOA parameter-initialization toolkit for Max-Cut on Erdos-Renyi graphs."""

__version__ = "0.1.0"

from .graphs import Graph, generate_erdos_renyi, cut_value, brute_force_max_cut
from .simulator import QaoaParams, evolve, expectation, gradient, approximation_ratio

__all__ = [
    "Graph",
    "generate_erdos_renyi",
    "cut_value",
    "brute_force_max_cut",
    "QaoaParams",
    "evolve",
    "expectation",
    "gradient",
    "approximation_ratio",
]
