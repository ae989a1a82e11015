"""Optimal transport through a finite set of centers.

The routed cost ``min_j c1(x, z_j) + c2(z_j, y)`` turns the transport problem
into maximizing a concave function of one price per center. This package
solves that problem for atomic measures, extracts partitions and plans,
improves the centers, and checks everything against an exact solver.
"""

__version__ = "0.1.0"

from .cost import CenterSet, CostSpec, ground_cost, semidiscrete_cost, semidiscrete_matrix
from .dual import DualProblem, dual_eval, hedonic_eval, xi_leg
from .errors import (CapacityError, DimensionError, ImbalanceError, InfeasibleError,
                     NonFiniteError, ParseError, SemiDiscreteError, ValidationError)
from .measures import (DiscreteMeasure, MapSpec, grid_uniform, load_measure,
                       pushforward_gradient_map)
from .optimizer import SolveOptions, SolveReport, maximize_dual, maximize_hedonic
from .oracle import GapReport, asymptotic_sweep, exact_ot, gap
from .partition import Partition, TransportPlan, assign, balance, make_plan
from .refinement import RefineOptions, RefineTrajectory, refine_loop, update_centers

__all__ = [
    "CenterSet", "CostSpec", "ground_cost", "semidiscrete_cost", "semidiscrete_matrix",
    "DualProblem", "dual_eval", "hedonic_eval", "xi_leg",
    "CapacityError", "DimensionError", "ImbalanceError", "InfeasibleError",
    "NonFiniteError", "ParseError", "SemiDiscreteError", "ValidationError",
    "DiscreteMeasure", "MapSpec", "grid_uniform", "load_measure", "pushforward_gradient_map",
    "SolveOptions", "SolveReport", "maximize_dual", "maximize_hedonic",
    "GapReport", "asymptotic_sweep", "exact_ot", "gap",
    "Partition", "TransportPlan", "assign", "balance", "make_plan",
    "RefineOptions", "RefineTrajectory", "refine_loop", "update_centers",
]
