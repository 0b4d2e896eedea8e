"""4D orthogonal range reporting with shallow cuttings and range-tree hierarchies."""

__version__ = "0.1.0"

from .geometry import ContractError, QueryBox, RankedPointSet, canonicalize_query, to_rank_space
from .cutting import ConstructionError, build_cutting
from .oracle import oracle_count, oracle_report, verify_cutting
from .outer import (FiveSidedStructure, GeneralStructure, OuterConfig, build_5sided, build_general,
                    query_5sided, query_dominance4, query_general)
from .restricted import QueryStats, RestrictedStructure

__all__ = [
    "ConstructionError", "ContractError", "FiveSidedStructure", "GeneralStructure", "OuterConfig",
    "QueryBox", "QueryStats", "RankedPointSet", "RestrictedStructure", "build_5sided", "build_cutting",
    "build_general", "canonicalize_query", "oracle_count", "oracle_report", "query_5sided",
    "query_dominance4", "query_general", "to_rank_space", "verify_cutting",
]
