"""Preferential attachment graphs PA(m; n): generation, symmetry, degrees, entropy and DAG levels."""

from .errors import ResourceBudgetError
from .model import (
    ChoiceSequence,
    DegreeView,
    InadmissibleGraphError,
    Multigraph,
    PaGraph,
    PagFormatError,
    WeightMode,
    admissible_check,
    decode_graph,
    degree_at,
    derive_seed,
    encode_graph,
    generate,
)

__version__ = "0.1.0"

__all__ = [
    "ChoiceSequence",
    "DegreeView",
    "InadmissibleGraphError",
    "Multigraph",
    "PaGraph",
    "PagFormatError",
    "ResourceBudgetError",
    "WeightMode",
    "admissible_check",
    "decode_graph",
    "degree_at",
    "derive_seed",
    "encode_graph",
    "generate",
]
