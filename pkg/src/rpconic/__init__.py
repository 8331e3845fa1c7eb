"""Random projections for linear and semidefinite programs.

Sketch the orthant rows of a conic program with a non-negative Gaussian
sketch ``S = T o T`` and compress PSD blocks by congruence; the result is a
smaller relaxation whose value lower-bounds the original.
"""

from .analysis import BoundReport, evaluate_theorem1, evaluate_theorem3
from .conic import ConicElement, ConicProblem, ConeSpec, lp_problem, project_problem
from .experiments import InstanceSpec, Law, choose_k, generate_instance, run_trial
from .sketch import SketchBundle, SketchConfig, make_sketch
from .solver import SolveReport, SolverConfig, solve
from .transform import TransformData, make_transform, transform_problem

__all__ = [
    "BoundReport", "ConeSpec", "ConicElement", "ConicProblem", "InstanceSpec", "Law",
    "SketchBundle", "SketchConfig", "SolveReport", "SolverConfig", "TransformData",
    "choose_k", "evaluate_theorem1", "evaluate_theorem3", "generate_instance", "lp_problem",
    "make_sketch", "make_transform", "project_problem", "run_trial", "solve",
    "transform_problem",
]
__version__ = "0.1.0"
