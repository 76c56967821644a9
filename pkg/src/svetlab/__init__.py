"""Numerical laboratory for the regularized multipartite chained Svetlichny functional."""

from .core import BehaviorTable, Scenario, check_nonsignaling, marginalize, permute_parties
from .functional import BellFunctional, build_functional, evaluate

__all__ = [
    "BehaviorTable",
    "BellFunctional",
    "Scenario",
    "build_functional",
    "check_nonsignaling",
    "evaluate",
    "marginalize",
    "permute_parties",
]
__version__ = "0.1.0"
