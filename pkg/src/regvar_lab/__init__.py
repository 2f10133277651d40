"""regvar-lab: numerical workbench for sequential regular variation."""
from .errors import (
    ConfigError,
    DataFormatError,
    DegenerateKernelError,
    DomainError,
    EmptyAnchorError,
    InsufficientDataError,
    NoBracketError,
    NonConvergenceError,
    RegVarError,
    SingularityError,
    TrivialKernelError,
)
from .popa import INF, PopaParam
from .kernels import KernelSpec, classify
from .functions import FunctionSpec
from .sequences import SequenceSpec
from .kendall import KendallInput, KendallSet, run_kendall

__version__ = "0.1.0"
