"""scikit-learn compatible front end for the distributed lasso solver."""

from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import ConvergenceWarning
from sklearn.utils.validation import check_is_fitted, validate_data

from .graph import erdos_renyi
from .problem import lasso_instance
from .solver import DIVERGED, Termination, default_stepsizes, lnorm_bound, run, validate_stepsizes


class ConsensusLasso(RegressorMixin, BaseEstimator):
    """Lasso fitted by agents that only talk to graph neighbors.

    The rows of ``X`` are dealt out in contiguous blocks to ``n_agents``
    agents, which minimize ``lam * ||w||_1 + 0.5 * ||X w - y||^2`` jointly
    over a random connected communication graph (or ``graph`` when given).

    Parameters
    ----------
    lam : float, default=None
        Absolute l1 weight.  When None, ``lambda_frac * ||X^T y||_inf``.
    lambda_frac : float, default=0.05
        Used only when ``lam`` is None.
    n_agents : int, default=5
    edge_prob : float, default=0.5
        Erdos-Renyi edge probability for the generated graph.
    graph : Graph, default=None
        Fixed communication graph; overrides ``n_agents``/``edge_prob``.
    theta : float, default=1.5
    step_scale : float, default=20.0
        Primal/dual step balance: ``sigma = step_scale/||L||``.
    tol : float, default=1e-8
        Fixed-point residual tolerance.
    max_rounds : int, default=100000
    random_state : int, default=0
        Seed of the graph generator.

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,)
        Average of the agents' final iterates.
    agent_coefs_ : ndarray of shape (n_agents, n_features)
    lam_ : float
    graph_ : Graph
    trace_ : RunTrace
    n_rounds_ : int
    """

    def __init__(self, lam=None, lambda_frac=0.05, n_agents=5, edge_prob=0.5, graph=None,
                 theta=1.5, step_scale=20.0, tol=1e-8, max_rounds=100_000, random_state=0):
        self.lam = lam
        self.lambda_frac = lambda_frac
        self.n_agents = n_agents
        self.edge_prob = edge_prob
        self.graph = graph
        self.theta = theta
        self.step_scale = step_scale
        self.tol = tol
        self.max_rounds = max_rounds
        self.random_state = random_state

    def fit(self, X, y):
        X, y = validate_data(self, X, y, y_numeric=True)
        graph = self.graph
        if graph is None:
            graph = erdos_renyi(self.n_agents, self.edge_prob, self.random_state)
        n_agents = graph.num_nodes
        if n_agents > X.shape[0]:
            raise ValueError(f"{n_agents} agents but only {X.shape[0]} samples")
        blocks = np.array_split(np.arange(X.shape[0]), n_agents)
        lam = self.lam
        if lam is None:
            lam = self.lambda_frac * np.abs(X.T @ y).max()
        inst = lasso_instance([X[b] for b in blocks], [y[b] for b in blocks], lam,
                              enforce_bound=False)
        L_norm = lnorm_bound(inst.problem, graph)
        steps = default_stepsizes(self.theta, self.step_scale, L_norm, graph)
        check = validate_stepsizes(steps, L_norm)
        if not check:
            raise ValueError(str(check))
        trace = run(inst.problem, graph, steps, Termination(self.tol, self.max_rounds))
        if trace.status == DIVERGED:
            raise FloatingPointError(trace.reason)
        if not trace.converged:
            warnings.warn(trace.reason, ConvergenceWarning)
        self.agent_coefs_ = trace.x
        self.coef_ = self.agent_coefs_.mean(axis=0)
        self.lam_ = float(lam)
        self.graph_ = graph
        self.trace_ = trace
        self.n_rounds_ = trace.rounds
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = validate_data(self, X, reset=False)
        return X @ self.coef_
