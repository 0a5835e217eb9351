"""Distributed primal-dual consensus optimization over agent graphs."""

from .graph import Graph, erdos_renyi, incidence_matrix, is_connected, laplacian, spectral_norm
from .problem import ConsensusProblem, Agent, LassoInstance, generate_lasso, oracle_solve, optimality_residual
from .prox import BoxIndicator, L1Norm, ProxFunction, SquaredDistance, ZeroFunction
from .solver import (
    AgentState,
    RunTrace,
    StepSizes,
    Termination,
    default_stepsizes,
    lnorm_bound,
    lnorm_exact,
    run,
    run_reduced,
    validate_stepsizes,
)

__version__ = "0.1.0"
