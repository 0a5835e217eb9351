"""Distributed primal-dual consensus solver.

Every agent ``i`` keeps a primal copy ``x_i``, a dual ``y_i`` for its
``g_i o C_i`` term and a node dual ``rho_i`` that stands in for the edge
multipliers of the consensus constraints.  One round is

    x_i+ = prox_{sigma_i f_i}(x_i - sigma_i rho_i - sigma_i C_i^T y_i)
    ybar = prox_{tau_i g_i*}(y_i + tau_i C_i (theta x_i+ + (1 - theta) x_i))
    y_i+ = ybar + tau_i (2 - theta) C_i (x_i+ - x_i)
    u_i  = 2 x_i+ - x_i                         (broadcast to neighbors)
    rho_i+ = rho_i + sum_{j in N(i)} kappa_ij (u_i - u_j)

``theta = 2`` is the Chambolle-Pock method.  Convergence is guaranteed when

    1/max(sigma) - max(tau, kappa) * (theta^2 - 3 theta + 3) * ||L|| > 0

with ``L = Laplacian (x) I_n + blkdiag(C_i^T C_i)`` (``>= 0`` suffices at
``theta = 2``).
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .exceptions import DivergenceError
from .graph import Graph, SpectralEstimate, is_connected, laplacian, laplacian_norm, spectral_norm
from .problem import ConsensusProblem
from .prox import ProxFunction, prox_conjugate
from .simnet import CommStats, RoundMailbox

__all__ = [
    "StepSizes",
    "StepSizeCheck",
    "AgentState",
    "Termination",
    "RunTrace",
    "theta_factor",
    "validate_stepsizes",
    "default_stepsizes",
    "data_norm",
    "lnorm_bound",
    "lnorm_exact",
    "local_step",
    "exchange_step",
    "run",
    "run_reduced",
]

log = logging.getLogger(__name__)

CONVERGED = "converged"
MAX_ROUNDS = "max_rounds"
DIVERGED = "diverged"


def theta_factor(theta: float) -> float:
    """``theta^2 - 3 theta + 3``; positive everywhere, minimal (0.75) at 1.5."""
    return theta * theta - 3.0 * theta + 3.0


@dataclass(frozen=True)
class StepSizes:
    """Per-agent ``sigma``, ``tau`` and per-edge ``kappa`` (edge order of the graph)."""

    sigma: np.ndarray
    tau: np.ndarray
    kappa: np.ndarray
    theta: float

    def __post_init__(self):
        for name in ("sigma", "tau", "kappa"):
            arr = np.atleast_1d(np.asarray(getattr(self, name), dtype=float)).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "theta", float(self.theta))
        bad = [name for name in ("sigma", "tau", "kappa")
               if not np.all(np.isfinite(getattr(self, name)))
               or np.any(getattr(self, name) <= 0)]
        if bad:
            raise ValueError(f"step sizes must be finite and positive: {', '.join(bad)}")
        if not (np.isfinite(self.theta) and self.theta >= 0):
            raise ValueError("theta must be a finite value >= 0")

    @classmethod
    def uniform(cls, sigma, tau, theta, graph: Graph, kappa=None) -> "StepSizes":
        N, M = graph.num_nodes, graph.num_edges
        kappa = tau if kappa is None else kappa
        return cls(np.full(N, sigma), np.full(N, tau), np.full(M, kappa), theta)

    @property
    def sigma_bar(self) -> float:
        return float(self.sigma.max())

    @property
    def tau_bar(self) -> float:
        return float(max(self.tau.max(), self.kappa.max() if self.kappa.size else 0.0))


@dataclass(frozen=True)
class StepSizeCheck:
    ok: bool
    lhs: float
    sigma_bar: float
    tau_bar: float
    theta: float
    L_norm: float

    def __bool__(self):
        return self.ok

    def __str__(self):
        verdict = "ok" if self.ok else "VIOLATED"
        rel = ">= 0" if self.theta == 2.0 else "> 0"
        return (f"step-size condition {verdict}: 1/{self.sigma_bar:.6g} - {self.tau_bar:.6g}"
                f" * {theta_factor(self.theta):.6g} * {self.L_norm:.6g} = {self.lhs:.6g} (need {rel})")


def validate_stepsizes(s: StepSizes, L_norm: float) -> StepSizeCheck:
    if not L_norm >= 0:
        raise ValueError("L_norm must be non-negative")
    lhs = 1.0 / s.sigma_bar - s.tau_bar * theta_factor(s.theta) * L_norm
    ok = lhs > 0 or (s.theta == 2.0 and lhs >= 0)
    return StepSizeCheck(bool(ok), float(lhs), s.sigma_bar, s.tau_bar, s.theta, float(L_norm))


def default_stepsizes(theta: float, alpha: float, L_norm: float, graph: Graph) -> StepSizes:
    """``sigma = alpha/||L||`` and ``tau = kappa = 0.99 / (alpha * theta_factor)``."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if L_norm <= 0:
        raise ValueError("L_norm must be positive")
    sigma = alpha / L_norm
    tau = 0.99 / (alpha * theta_factor(theta))
    return StepSizes.uniform(sigma, tau, theta, graph)


def data_norm(problem: ConsensusProblem, tol: float = 1e-8, seed: int = 0) -> float:
    """``max_i ||C_i||^2`` (inflated power-iteration estimates); 0 without coupling."""
    best = 0.0
    for a in problem.agents:
        if a.r == 0:
            continue
        C = a.C
        est = spectral_norm(lambda v: C.T @ (C @ v), problem.n, tol=tol, seed=seed)
        best = max(best, est.bound)
    return best


def lnorm_bound(problem: ConsensusProblem, graph: Graph, tol: float = 1e-8,
                data_term: float | None = None) -> float:
    """Cheap upper bound ``||Laplacian|| + max_i ||C_i||^2`` on ``||L||``."""
    if data_term is None:
        data_term = data_norm(problem, tol)
    return laplacian_norm(graph, tol=tol).bound + data_term


def lnorm_exact(problem: ConsensusProblem, graph: Graph, tol: float = 1e-8,
                max_iter: int = 10_000) -> SpectralEstimate:
    """Power iteration on ``Laplacian (x) I_n + blkdiag(C_i^T C_i)`` itself."""
    N, n = graph.num_nodes, problem.n
    Lap = laplacian(graph).astype(float)
    agents = problem.agents

    def apply(v):
        X = v.reshape(N, n)
        out = Lap @ X
        for i, a in enumerate(agents):
            if a.r:
                out[i] += a.C.T @ (a.C @ X[i])
        return out.reshape(-1)

    return spectral_norm(apply, N * n, tol=tol, max_iter=max_iter)


@dataclass(frozen=True)
class AgentState:
    """Iterates held by one agent.  ``cached_Cx`` is ``C_i x_i`` (None until known)."""

    x: np.ndarray
    y: np.ndarray
    rho: np.ndarray
    cached_Cx: np.ndarray | None = None

    @classmethod
    def zeros(cls, n: int, r: int) -> "AgentState":
        return cls(np.zeros(n), np.zeros(r), np.zeros(n), np.zeros(r) if r else None)


@dataclass
class Termination:
    """Stopping rule.

    With a ``reference`` the run stops once every agent satisfies
    ``||x_i - ref||_inf / ||ref||_inf <= tol``.  Otherwise both the primal
    residual ``max_i ||x_i+ - x_i||_inf / sigma_i`` and the dual residual
    ``max_i max(||y_i+ - y_i||_inf / tau_i, ||rho_i+ - rho_i||_inf / max(kappa))``
    must be ``<= tol``.
    """

    tol: float
    max_rounds: int
    reference: np.ndarray | None = None
    mode: str | None = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_rounds < 0:
            raise ValueError("max_rounds must be >= 0")
        if self.mode is None:
            self.mode = "relative_error" if self.reference is not None else "fixed_point"
        if self.mode not in ("relative_error", "fixed_point"):
            raise ValueError(f"unknown termination mode {self.mode!r}")
        if self.mode == "relative_error":
            if self.reference is None:
                raise ValueError("relative-error termination needs a reference")
            self.reference = np.asarray(self.reference, dtype=float)
            if not np.abs(self.reference).max() > 0:
                raise ValueError("reference must be nonzero for relative errors")


@dataclass
class RunTrace:
    """Per-round metrics and terminal status of one solver run.

    Row ``k`` of the metric lists describes the iterates after round ``k + 1``.
    """

    rel_err: list = field(default_factory=list)
    disagreement: list = field(default_factory=list)
    residual: list = field(default_factory=list)
    dual_residual: list = field(default_factory=list)
    stats: CommStats = field(default_factory=CommStats)
    status: str = MAX_ROUNDS
    reason: str = ""
    initial_rel_err: float = float("nan")
    states: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def rounds(self) -> int:
        return len(self.residual)

    @property
    def x(self) -> np.ndarray:
        """Final primal iterates stacked as ``(N, n)``."""
        return np.array([s.x for s in self.states])

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED


def local_step(state: AgentState, f: ProxFunction, g: ProxFunction | None, C,
               sigma: float, tau: float, theta: float, *, agent=None, round_index=None):
    """Local half of a round.  Returns ``(new_state, u)``; ``rho`` is left as is.

    Two products with ``C_i`` per call (``y^T C_i`` and ``C_i x+``);
    ``C_i x`` comes from the cache, filled with one extra product if empty.
    """
    x = state.x
    if g is None:
        x_new = f.prox(x - sigma * state.rho, sigma)
        y_new, Cx_new = state.y, state.cached_Cx
    else:
        x_new = f.prox(x - sigma * (state.rho + state.y @ C), sigma)
        Cx = state.cached_Cx if state.cached_Cx is not None else C @ x
        Cx_new = C @ x_new
        y_bar = prox_conjugate(g, state.y + tau * (theta * Cx_new + (1.0 - theta) * Cx), tau)
        y_new = y_bar + (tau * (2.0 - theta)) * (Cx_new - Cx)
    if not (np.isfinite(x_new).all() and np.isfinite(y_new).all()):
        raise DivergenceError(agent, round_index)
    u = 2.0 * x_new - x
    return AgentState(x_new, y_new, state.rho, Cx_new), u


def exchange_step(rho, u_self, neighbor_us: Sequence, kappas: Sequence[float]):
    """``rho + sum_j kappa_ij (u_self - u_j)``, summed in the given neighbor order."""
    if len(neighbor_us) != len(kappas):
        raise ValueError("one kappa per neighbor required")
    out = np.array(rho, dtype=float)
    for (_, u_j), k in zip(neighbor_us, kappas):
        if u_j.shape != out.shape:
            raise ValueError(f"neighbor vector has shape {u_j.shape}, expected {out.shape}")
        out += k * (u_self - u_j)
    return out


def _neighbor_kappas(graph: Graph, kappa: np.ndarray) -> list[list[float]]:
    idx = graph.edge_index
    return [[float(kappa[idx[(min(i, j), max(i, j))]]) for j in graph.neighbors[i]]
            for i in range(graph.num_nodes)]


def _check_inputs(problem: ConsensusProblem, graph: Graph, steps: StepSizes):
    if graph.num_nodes != problem.num_agents:
        raise ValueError(f"graph has {graph.num_nodes} nodes but problem has "
                         f"{problem.num_agents} agents")
    if not is_connected(graph):
        raise ValueError("communication graph must be connected")
    if steps.sigma.size != problem.num_agents or steps.tau.size != problem.num_agents:
        raise ValueError("need one sigma and one tau per agent")
    if steps.kappa.size != graph.num_edges:
        raise ValueError(f"need one kappa per edge ({graph.num_edges}), got {steps.kappa.size}")


class _Recorder:
    """Evaluates termination and appends metrics after each round."""

    def __init__(self, term: Termination, steps: StepSizes, trace: RunTrace):
        self.term = term
        self.sigma = steps.sigma
        self.tau = steps.tau
        self.kappa_bar = float(steps.kappa.max()) if steps.kappa.size else 1.0
        self.trace = trace
        self.ref = term.reference
        self.ref_scale = None if self.ref is None else float(np.abs(self.ref).max())

    def rel_err(self, X):
        if self.ref is None:
            return float("nan")
        return float(np.abs(X - self.ref).max() / self.ref_scale)

    def initial(self, states) -> bool:
        self.trace.initial_rel_err = self.rel_err(np.array([s.x for s in states]))
        return self.term.mode == "relative_error" and self.trace.initial_rel_err <= self.term.tol

    def record(self, old, new) -> bool:
        X_old = np.array([s.x for s in old])
        X_new = np.array([s.x for s in new])
        err = self.rel_err(X_new)
        dis = float(np.abs(X_new - X_new.mean(axis=0)).max())
        res = float((np.abs(X_new - X_old).max(axis=1) / self.sigma).max())
        dual = 0.0
        for i, (a, b) in enumerate(zip(old, new)):
            if b.y.size:
                dual = max(dual, float(np.abs(b.y - a.y).max()) / self.tau[i])
            dual = max(dual, float(np.abs(b.rho - a.rho).max()) / self.kappa_bar)
        self.trace.rel_err.append(err)
        self.trace.disagreement.append(dis)
        self.trace.residual.append(res)
        self.trace.dual_residual.append(dual)
        if self.term.mode == "relative_error":
            return err <= self.term.tol
        return res <= self.term.tol and dual <= self.term.tol


def _initial_states(problem, init):
    if init is None:
        return [AgentState.zeros(problem.n, a.r) for a in problem.agents]
    states = list(init)
    if len(states) != problem.num_agents:
        raise ValueError("need one initial state per agent")
    return states


def _exchange(mbox: RoundMailbox, states, us, kappas):
    for i, u in enumerate(us):
        mbox.broadcast(i, u)
    new_rho = [exchange_step(s.rho, us[i], mbox.gather(i), kappas[i])
               for i, s in enumerate(states)]
    mbox.advance_round()
    return [replace(s, rho=r) for s, r in zip(states, new_rho)]


def run(problem: ConsensusProblem, graph: Graph, steps: StepSizes, term: Termination,
        init=None, *, n_jobs: int = 1,
        callback: Callable[[int, list], None] | None = None) -> RunTrace:
    """Run the distributed algorithm until ``term`` fires.

    Starts from ``x = y = rho = 0`` unless ``init`` (one :class:`AgentState`
    per agent) is given.  Local steps may be spread over ``n_jobs`` threads;
    results do not depend on ``n_jobs``.  Divergence and exhausted round
    budgets are reported through ``RunTrace.status``.
    """
    _check_inputs(problem, graph, steps)
    states = _initial_states(problem, init)
    agents = problem.agents
    sigma, tau, theta = steps.sigma, steps.tau, steps.theta
    kappas = _neighbor_kappas(graph, steps.kappa)
    mbox = RoundMailbox(graph, problem.n)
    trace = RunTrace(stats=mbox.stats)
    rec = _Recorder(term, steps, trace)
    trace.states = states

    if rec.initial(states):
        trace.status = CONVERGED
        return trace

    pool = ThreadPoolExecutor(n_jobs) if n_jobs > 1 else None
    try:
        for k in range(1, term.max_rounds + 1):
            def step(i, k=k):
                a = agents[i]
                return local_step(states[i], a.f, a.g, a.C, sigma[i], tau[i], theta,
                                  agent=i, round_index=k)

            try:
                if pool is None:
                    out = [step(i) for i in range(len(agents))]
                else:
                    out = list(pool.map(step, range(len(agents))))
            except DivergenceError as exc:
                trace.status, trace.reason = DIVERGED, str(exc)
                log.warning("run diverged: %s", exc)
                return trace
            old = states
            states = _exchange(mbox, [o[0] for o in out], [o[1] for o in out], kappas)
            trace.states = states
            done = rec.record(old, states)
            if callback is not None:
                callback(k, states)
            if done:
                trace.status = CONVERGED
                return trace
    finally:
        if pool is not None:
            pool.shutdown()
    trace.status = MAX_ROUNDS
    trace.reason = f"no convergence within {term.max_rounds} rounds"
    return trace


def run_reduced(problem: ConsensusProblem, graph: Graph, steps: StepSizes, term: Termination,
                init=None, *, callback: Callable[[int, list], None] | None = None) -> RunTrace:
    """Specialised loop for problems without ``g_i o C_i`` terms.

    The dual ``y_i`` disappears and the round becomes
    ``x+ = prox_{sigma f}(x - sigma rho)``, ``u = 2x+ - x`` and the usual
    exchange, for any ``theta``.  The step-size condition only involves the
    graph Laplacian in this case.
    """
    if problem.has_coupling:
        bad = [i for i, a in enumerate(problem.agents) if a.r > 0]
        raise ValueError(f"run_reduced needs g_i absent for every agent; agents {bad} have one")
    _check_inputs(problem, graph, steps)
    states = _initial_states(problem, init)
    fs = [a.f for a in problem.agents]
    sigma = steps.sigma
    kappas = _neighbor_kappas(graph, steps.kappa)
    mbox = RoundMailbox(graph, problem.n)
    trace = RunTrace(stats=mbox.stats)
    rec = _Recorder(term, steps, trace)
    trace.states = states
    if rec.initial(states):
        trace.status = CONVERGED
        return trace

    for k in range(1, term.max_rounds + 1):
        new_states, us = [], []
        for i, s in enumerate(states):
            x_new = fs[i].prox(s.x - sigma[i] * s.rho, sigma[i])
            if not np.isfinite(x_new).all():
                trace.status = DIVERGED
                trace.reason = str(DivergenceError(i, k))
                return trace
            us.append(2.0 * x_new - s.x)
            new_states.append(replace(s, x=x_new))
        old = states
        states = _exchange(mbox, new_states, us, kappas)
        trace.states = states
        done = rec.record(old, states)
        if callback is not None:
            callback(k, states)
        if done:
            trace.status = CONVERGED
            return trace
    trace.status = MAX_ROUNDS
    trace.reason = f"no convergence within {term.max_rounds} rounds"
    return trace
