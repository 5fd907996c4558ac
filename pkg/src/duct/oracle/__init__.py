"""Ground-truth triangle for the chain engine: an independent reference
implementation, a random program generator, and a concrete interpreter."""

from .generator import GeneratorLimits, generate_random_program
from .interp import NotExecutable, StepBudgetExceeded, StoreRecord, interpret
from .reference import OracleBounds, OracleBoundsError, reference_ud_chain

__all__ = [
    "GeneratorLimits",
    "generate_random_program",
    "NotExecutable",
    "StepBudgetExceeded",
    "StoreRecord",
    "interpret",
    "OracleBounds",
    "OracleBoundsError",
    "reference_ud_chain",
]
