"""Consensus problem instances and the distributed lasso benchmark.

A :class:`ConsensusProblem` is a list of agents, each holding
``f_i : R^n -> R``, ``g_i : R^{r_i} -> R`` and ``C_i`` of shape ``(r_i, n)``.
The collective goal is ``min_x sum_i f_i(x) + g_i(C_i x)``.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import ConvergenceError
from .graph import spectral_norm
from .prox import L1Norm, ProxFunction, SquaredDistance, evaluate_objective

__all__ = [
    "Agent",
    "ConsensusProblem",
    "LassoInstance",
    "lasso_instance",
    "generate_lasso",
    "oracle_solve",
    "optimality_residual",
    "save_instance",
    "load_instance",
]

LAMBDA_BOUND_FRACTION = 0.1
MAGIC = b"AFBA1"


@dataclass(frozen=True)
class Agent:
    """Private data of one agent.  ``g=None`` means ``g_i o C_i`` is absent."""

    f: ProxFunction
    g: ProxFunction | None = None
    C: object = None

    def __post_init__(self):
        if (self.g is None) != (self.C is None):
            raise ValueError("g and C must be given together")

    @property
    def r(self) -> int:
        return 0 if self.C is None else int(self.C.shape[0])


@dataclass(frozen=True)
class ConsensusProblem:
    n: int
    agents: tuple[Agent, ...]

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        if not self.agents:
            raise ValueError("a problem needs at least one agent")
        for i, a in enumerate(self.agents):
            if a.C is not None and a.C.shape[1] != self.n:
                raise ValueError(f"agent {i}: C has {a.C.shape[1]} columns, expected {self.n}")

    @property
    def num_agents(self) -> int:
        return len(self.agents)

    @property
    def has_coupling(self) -> bool:
        return any(a.r > 0 for a in self.agents)

    def objective(self, x) -> float:
        return evaluate_objective(
            [a.f for a in self.agents],
            [a.g for a in self.agents],
            [a.C for a in self.agents],
            x,
        )


@dataclass(frozen=True)
class LassoInstance:
    """``lam * ||x||_1 + sum_i 0.5 * ||D_i x - d_i||^2`` split across agents."""

    problem: ConsensusProblem
    D: tuple[np.ndarray, ...]
    d: tuple[np.ndarray, ...]
    lam: float
    planted: np.ndarray | None = None
    seed: int | None = None
    params: dict = field(default_factory=dict)

    @property
    def num_agents(self) -> int:
        return len(self.D)

    @property
    def n(self) -> int:
        return self.problem.n

    def correlation(self) -> np.ndarray:
        """``sum_i D_i^T d_i``."""
        return sum(Di.T @ di for Di, di in zip(self.D, self.d))

    def gram(self) -> np.ndarray:
        return sum(Di.T @ Di for Di in self.D)

    def objective(self, x) -> float:
        return self.problem.objective(x)


def lasso_instance(D, d, lam, *, planted=None, seed=None, params=None, enforce_bound=True):
    """Build the consensus splitting ``f_i = lam/N ||.||_1``, ``g_i = 0.5||. - d_i||^2``, ``C_i = D_i``.

    With ``enforce_bound`` the benchmark condition ``lam < 0.1 ||sum D_i^T d_i||_inf``
    is checked.
    """
    D = tuple(np.array(Di, dtype=float) for Di in D)
    d = tuple(np.array(di, dtype=float).reshape(-1) for di in d)
    if len(D) != len(d) or not D:
        raise ValueError("need one (D_i, d_i) pair per agent")
    n = D[0].shape[1]
    for i, (Di, di) in enumerate(zip(D, d)):
        if Di.ndim != 2 or Di.shape[1] != n or Di.shape[0] != di.shape[0]:
            raise ValueError(f"agent {i}: inconsistent shapes {Di.shape} / {di.shape}")
        Di.setflags(write=False)
        di.setflags(write=False)
    lam = float(lam)
    if lam < 0:
        raise ValueError("lam must be non-negative")
    if enforce_bound:
        cap = LAMBDA_BOUND_FRACTION * np.abs(sum(Di.T @ di for Di, di in zip(D, d))).max()
        if not lam < cap:
            raise ValueError(f"lam={lam} violates lam < 0.1*||sum D_i^T d_i||_inf = {cap}")
    N = len(D)
    agents = tuple(Agent(L1Norm(lam / N), SquaredDistance(di), Di) for Di, di in zip(D, d))
    return LassoInstance(
        ConsensusProblem(n, agents), D, d, lam,
        planted=planted, seed=seed, params=dict(params or {}),
    )


def generate_lasso(
    N: int,
    n: int,
    m: int,
    p_sparse: float = 0.1,
    lambda_frac: float = 0.05,
    noise_std: float = 0.0,
    seed: int = 0,
    entry_std: float | None = None,
) -> LassoInstance:
    """Random lasso benchmark with a planted sparse solution.

    ``D_i`` has i.i.d. normal entries with standard deviation ``entry_std``
    (default ``1/sqrt(N*m)``, i.e. unit expected column norm of the stacked
    data matrix).  The planted vector has ``ceil(p_sparse*n)`` standard-normal
    nonzeros, ``d_i = D_i x + noise_std * e_i`` and
    ``lam = lambda_frac * ||sum_i D_i^T d_i||_inf``.
    """
    if min(N, n, m) < 1:
        raise ValueError("N, n and m must be >= 1")
    if not 0 < p_sparse <= 1:
        raise ValueError("p_sparse must lie in (0, 1]")
    if lambda_frac <= 0:
        raise ValueError("lambda_frac must be positive")
    if noise_std < 0:
        raise ValueError("noise_std must be non-negative")
    if entry_std is None:
        entry_std = 1.0 / math.sqrt(N * m)
    rng = np.random.default_rng(seed)
    D = rng.standard_normal((N, m, n)) * entry_std
    k = math.ceil(p_sparse * n)
    support = np.sort(rng.choice(n, size=k, replace=False))
    planted = np.zeros(n)
    planted[support] = rng.standard_normal(k)
    noise = rng.standard_normal((N, m))
    d = D @ planted + noise_std * noise
    corr = np.abs(np.einsum("imn,im->n", D, d)).max()
    params = dict(N=N, n=n, m=m, p_sparse=p_sparse, lambda_frac=lambda_frac,
                  noise_std=noise_std, entry_std=entry_std)
    return lasso_instance(list(D), list(d), lambda_frac * corr,
                          planted=planted, seed=seed, params=params)


def _soft(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def oracle_solve(inst: LassoInstance, tol: float = 1e-12, max_iter: int = 200_000) -> np.ndarray:
    """Centralized FISTA with adaptive restart; reference solution for benchmarks.

    Terminates once the proximal-gradient fixed-point residual
    ``||x - prox(x - grad/L)||_inf`` drops to ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    H = inst.gram()
    b = inst.correlation()
    lip = spectral_norm(lambda v: H @ v, inst.n, tol=1e-10, max_iter=100_000).bound
    if lip == 0.0:
        return np.zeros(inst.n)
    step = 1.0 / lip
    thr = inst.lam * step
    x = np.zeros(inst.n)
    z = x.copy()
    t = 1.0
    residual = np.inf
    for it in range(1, max_iter + 1):
        x_new = _soft(z - step * (H @ z - b), thr)
        residual = np.abs(x_new - _soft(x_new - step * (H @ x_new - b), thr)).max()
        if residual <= tol:
            return x_new
        if (z - x_new) @ (x_new - x) > 0:
            # momentum points uphill: restart
            t = 1.0
            z = x_new
        else:
            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            z = x_new + ((t - 1.0) / t_new) * (x_new - x)
            t = t_new
        x = x_new
    raise ConvergenceError(residual, max_iter)


def optimality_residual(inst: LassoInstance, x) -> float:
    """Sup-norm distance of ``-grad h(x)`` from ``lam * subdiff ||x||_1``.

    Zero exactly when ``x`` minimizes the aggregated lasso objective.
    """
    x = np.asarray(x, dtype=float)
    s = -sum(Di.T @ (Di @ x - di) for Di, di in zip(inst.D, inst.d))
    lam = inst.lam
    dist = np.where(
        x > 0, np.abs(s - lam),
        np.where(x < 0, np.abs(s + lam), np.maximum(np.abs(s) - lam, 0.0)),
    )
    return float(dist.max()) if dist.size else 0.0


def _write_matrix(path: Path, a: np.ndarray) -> None:
    a = np.ascontiguousarray(a, dtype="<f8")
    rows, cols = (a.shape[0], 1) if a.ndim == 1 else a.shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<QQ", rows, cols))
        fh.write(a.tobytes(order="C"))


def _read_matrix(path: Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:5] != MAGIC:
        raise ValueError(f"{path}: bad magic {raw[:5]!r}")
    rows, cols = struct.unpack("<QQ", raw[5:21])
    body = raw[21:]
    if len(body) != 8 * rows * cols:
        raise ValueError(f"{path}: expected {rows}x{cols} doubles, got {len(body)} bytes")
    return np.frombuffer(body, dtype="<f8").reshape(rows, cols).astype(float)


def save_instance(inst: LassoInstance, directory) -> None:
    """Serialize to ``manifest.json`` plus one ``.bin`` file per matrix."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    for i, (Di, di) in enumerate(zip(inst.D, inst.d)):
        _write_matrix(out / f"D_{i:04d}.bin", Di)
        _write_matrix(out / f"d_{i:04d}.bin", di)
    if inst.planted is not None:
        _write_matrix(out / "planted.bin", inst.planted)
    manifest = {
        "format": "AFBA1",
        "N": inst.num_agents,
        "n": inst.n,
        "m": [int(Di.shape[0]) for Di in inst.D],
        "lambda": inst.lam.hex(),
        "lambda_decimal": repr(inst.lam),
        "seed": inst.seed,
        "has_planted": inst.planted is not None,
        "params": inst.params,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def load_instance(directory) -> LassoInstance:
    src = Path(directory)
    manifest = json.loads((src / "manifest.json").read_text())
    N = manifest["N"]
    D = [_read_matrix(src / f"D_{i:04d}.bin") for i in range(N)]
    d = [_read_matrix(src / f"d_{i:04d}.bin").reshape(-1) for i in range(N)]
    planted = _read_matrix(src / "planted.bin").reshape(-1) if manifest["has_planted"] else None
    return lasso_instance(
        D, d, float.fromhex(manifest["lambda"]),
        planted=planted, seed=manifest["seed"], params=manifest["params"],
        enforce_bound=False,
    )
