"""Class C network models: quantum Green functions and their classical trail expansions.

Modules:

- ``matrixkit``: SU(2)/O(N) helpers, minors, Haar sampling
- ``netgraph``: network graphs, validation, JSON documents, L-lattices
- ``quantum``: evolution operator, Green functions, quenched averages, DOS, conductance
- ``trails``: node weights, trail enumeration, the history-dependent walk
- ``smatrix``: determinant sign structure and reducibility of S-matrices
- ``lattice``: hull loops and conductance scans on the L-lattice
- ``verification``: named identity/equivalence checks
"""
from . import config, fixtures, lattice, matrixkit, netgraph, quantum, smatrix, trails
from ._accel import backend
from .errors import (ClassCError, ConditioningError, ConfigError, DegeneratePrefixError,
                     GraphParseError, NonProbabilisticNodeError, ParameterError,
                     ResourceError, StatisticsError)
from .netgraph import Edge, NetworkGraph, Node

__version__ = "0.1.0"

__all__ = [
    "config", "fixtures", "lattice", "matrixkit", "netgraph", "quantum", "smatrix", "trails",
    "backend", "Edge", "NetworkGraph", "Node",
    "ClassCError", "ConditioningError", "ConfigError", "DegeneratePrefixError", "GraphParseError",
    "NonProbabilisticNodeError", "ParameterError", "ResourceError", "StatisticsError",
]
