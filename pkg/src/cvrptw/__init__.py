"""CVRP-TW solver: value-network-guided rollouts with exact sub-tour
optimization under constrained position shifting."""

__version__ = "0.1.0"

from .model import (Customer, Instance, Solution, check_feasible,  # noqa: F401
                    distance_matrix, parse_solomon, solution_distance)
from .preprocess import preprocess  # noqa: F401
from .episode import PreparedInstance, run_episode  # noqa: F401
