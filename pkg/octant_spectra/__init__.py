import logging
from dataclasses import dataclass


stream_handler = logging.StreamHandler()

logger = logging.getLogger(__name__)
logger.addHandler(stream_handler)
logger.setLevel(logging.INFO)

CSV_DELIMITER = ","


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances shared by the spectral computations"""

    closed_gap: float = 1e-9
    edge_residual: float = 1e-9
    virtual_state: float = 1e-8
    gap_map_residual: float = 1e-8
    finite_difference_step: float = 1e-6
    count_cluster: float = 1e-7
    coverage: float = 0.05
    dense_limit: int = 4000
    sparse_limit: int = 100_000


DEFAULT_TOLERANCES = Tolerances()


class ValidationError(Exception):
    """Base exception for inputs outside an operation's precondition"""


class NumericalError(Exception):
    """Base exception for solvers that fail to reach their tolerance"""
