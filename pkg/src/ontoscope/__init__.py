"""ontoscope: finite ontological models, overlap bounds and exclusion tests."""

__version__ = "0.1.0"

from .errors import OntoscopeError  # noqa: E402
from .lp import LinearProgram, LPSolution, lp_solve  # noqa: E402
from .ontology import (  # noqa: E402
    CondDist,
    EmpiricalModel,
    OnticSpace,
    OntologicalModel,
    ResponseFunctions,
    operational_table,
    overlap,
    toy_model,
)

__all__ = [
    "__version__", "OntoscopeError", "LinearProgram", "LPSolution", "lp_solve", "CondDist",
    "EmpiricalModel", "OnticSpace", "OntologicalModel", "ResponseFunctions", "operational_table",
    "overlap", "toy_model",
]
