"""Branch-merging compiler pass and miniature symbolic executor."""

__version__ = "0.1.0"

from .ir import parse_module, print_module, validate_module  # noqa: F401
from .symanalysis import analyze_program, classify_branches  # noqa: F401
from .transform import merge_branches  # noqa: F401
from .symexec import DseConfig, DseEngine, run_dse  # noqa: F401
from .interp import concrete_run  # noqa: F401
