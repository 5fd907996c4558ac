"""duct: interactive use-define chain queries over MiniIL programs."""

from .chains import UDChain, compute_ud_chain
from .index import ProgramIndex, build_program_index
from .model import MilError, ParseError, Program, ResolveError, UseSite
from .parser import parse_program
from .printer import print_program
from .uses import resolve_use_site

__version__ = "0.1.0"

__all__ = [
    "UDChain",
    "compute_ud_chain",
    "ProgramIndex",
    "build_program_index",
    "MilError",
    "ParseError",
    "Program",
    "ResolveError",
    "UseSite",
    "parse_program",
    "print_program",
    "resolve_use_site",
    "__version__",
]
