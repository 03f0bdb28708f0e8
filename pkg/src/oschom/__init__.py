"""Space-time Galerkin solver and homogenisation verification toolkit for
mixed-type evolutionary systems with rapidly oscillating material laws on
the periodic unit interval."""

from .coefficients import (CoercivityError, EvolutionaryProblem, MaterialField,
                           MatrixField, StaticProblem, averaged_coefficients,
                           random_coercive_field, verify_positivity)
from .dg_solver import DiscreteSolution, evaluate_solution, solve
from .fem_space import PeriodicCgSpace, SpacePartition, build_space
from .gelfand import (StepFunctionN, FiberStack, gelfand_transform,
                      inverse_gelfand, inverse_scaling, scaling_transform)
from .quadrature import TimePartition, gauss_radau_weighted, weighted_moments

__version__ = "0.1.0"

__all__ = [
    "CoercivityError", "EvolutionaryProblem", "MaterialField", "MatrixField",
    "StaticProblem", "averaged_coefficients", "random_coercive_field",
    "verify_positivity", "DiscreteSolution", "evaluate_solution", "solve",
    "PeriodicCgSpace", "SpacePartition", "build_space", "StepFunctionN",
    "FiberStack", "gelfand_transform", "inverse_gelfand", "inverse_scaling",
    "scaling_transform", "TimePartition", "gauss_radau_weighted",
    "weighted_moments", "__version__",
]
