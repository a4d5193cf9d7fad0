"""Derivative-free trust-region optimization with black-box inequality constraints."""

from .blackbox import BlackBoxProblem, EvalCounter, NoisyProblem, evaluate, is_feasible
from .core import IterationRecord, OptimizeResult, SolverConfig, TrustRegionState, optimize
from .errors import (BudgetExhausted, ConfigRangeError, DimensionMismatch, EmptyResults,
                     FeasibilityViolation, ImprovementStalled, InfeasibleStart,
                     NonFiniteEvaluation, NowpacError, SingularGeometry,
                     SubproblemInfeasibleStart, UnknownProblemId)

__all__ = [
    "BlackBoxProblem", "EvalCounter", "NoisyProblem", "evaluate", "is_feasible",
    "IterationRecord", "OptimizeResult", "SolverConfig", "TrustRegionState", "optimize",
    "BudgetExhausted", "ConfigRangeError", "DimensionMismatch", "EmptyResults",
    "FeasibilityViolation", "ImprovementStalled", "InfeasibleStart", "NonFiniteEvaluation",
    "NowpacError", "SingularGeometry", "SubproblemInfeasibleStart", "UnknownProblemId",
]
