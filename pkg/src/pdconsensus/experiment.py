"""Theta sweep over random graphs for one fixed lasso instance.

One instance is generated from ``data_seed`` and solved centrally for the
reference ``x*``.  Then every ``(theta, graph_seed)`` pair gets its own
Erdos-Renyi graph, default step sizes and a solver run to the relative
error tolerance.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from .graph import Graph, erdos_renyi, read_edge_list
from .problem import LassoInstance, generate_lasso, optimality_residual, oracle_solve
from .solver import (
    CONVERGED,
    DIVERGED,
    MAX_ROUNDS,
    Termination,
    data_norm,
    default_stepsizes,
    lnorm_bound,
    lnorm_exact,
    run,
    validate_stepsizes,
)

__all__ = ["ExperimentConfig", "RunRecord", "ExperimentResult", "run_experiment", "emit_plot_data"]

log = logging.getLogger(__name__)

FILE_GRAPH_SEED = -1


@dataclass
class ExperimentConfig:
    nodes: int = 50
    edge_prob: float = 0.05
    dim: int = 500
    rows: int = 50
    thetas: tuple = (0.0, 0.5, 1.5, 2.0)
    alpha: float = 20.0
    lambda_frac: float = 0.05
    noise_std: float = 0.0
    p_sparse: float = 0.1
    entry_std: float | None = None
    tol: float = 1e-6
    max_rounds: int = 100_000
    graph_seeds: tuple = tuple(range(200))
    data_seed: int = 0
    graph_file: str | None = None
    exact_lnorm: bool = False

    def __post_init__(self):
        self.thetas = tuple(float(t) for t in self.thetas)
        self.graph_seeds = tuple(int(s) for s in self.graph_seeds)
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not self.thetas or any(t < 0 for t in self.thetas):
            raise ValueError("need at least one theta, all >= 0")
        if not self.graph_seeds and self.graph_file is None:
            raise ValueError("need at least one graph seed")


@dataclass
class RunRecord:
    theta: float
    graph_seed: int
    status: str
    reason: str
    rounds: int
    rel_err: list
    final_rel_err: float
    opt_residual: float
    L_norm: float
    num_edges: int
    vectors_sent: int
    bytes_sent: int


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    instance: LassoInstance
    reference: np.ndarray
    runs: list = field(default_factory=list)

    def summary(self) -> list[dict]:
        rows = []
        for theta in self.config.thetas:
            rounds = [r.rounds for r in self.runs if r.theta == theta and r.status == CONVERGED]
            if rounds:
                p25, med, p75 = np.percentile(rounds, [25, 50, 75]).tolist()
            else:
                p25 = med = p75 = float("nan")
            rows.append(dict(theta=theta, median_rounds=med, p25=p25, p75=p75,
                             n_converged=len(rounds)))
        return rows

    @property
    def exit_code(self) -> int:
        statuses = {r.status for r in self.runs}
        if DIVERGED in statuses:
            return 3
        if MAX_ROUNDS in statuses:
            return 2
        return 0


def _single_run(inst, reference, graph, graph_seed, theta, cfg, data_term):
    if cfg.exact_lnorm:
        L_norm = lnorm_exact(inst.problem, graph).bound
    else:
        L_norm = lnorm_bound(inst.problem, graph, data_term=data_term)
    steps = default_stepsizes(theta, cfg.alpha, L_norm, graph)
    check = validate_stepsizes(steps, L_norm)
    if not check:
        raise RuntimeError(f"default step sizes failed validation: {check}")
    trace = run(inst.problem, graph, steps, Termination(cfg.tol, cfg.max_rounds, reference))
    X = trace.x
    scale = np.abs(reference).max()
    final_err = float(np.abs(X - reference).max() / scale)
    opt = max(optimality_residual(inst, x) for x in X) if trace.status != DIVERGED else float("nan")
    log.info("theta=%g seed=%d: %s after %d rounds", theta, graph_seed, trace.status, trace.rounds)
    return RunRecord(
        theta=theta, graph_seed=graph_seed, status=trace.status, reason=trace.reason,
        rounds=trace.rounds, rel_err=list(trace.rel_err), final_rel_err=final_err,
        opt_residual=float(opt), L_norm=float(L_norm), num_edges=graph.num_edges,
        vectors_sent=trace.stats.vectors_sent, bytes_sent=trace.stats.bytes_sent,
    )


def run_experiment(cfg: ExperimentConfig, n_jobs: int = 1) -> ExperimentResult:
    """Sweep ``cfg.thetas`` x graph seeds; runs are independent and may use ``n_jobs`` workers."""
    inst = generate_lasso(cfg.nodes, cfg.dim, cfg.rows, p_sparse=cfg.p_sparse,
                          lambda_frac=cfg.lambda_frac, noise_std=cfg.noise_std,
                          seed=cfg.data_seed, entry_std=cfg.entry_std)
    reference = oracle_solve(inst)
    data_term = None if cfg.exact_lnorm else data_norm(inst.problem)
    if cfg.graph_file is not None:
        graph = read_edge_list(cfg.graph_file)
        if graph.num_nodes != cfg.nodes:
            raise ValueError(f"{cfg.graph_file}: {graph.num_nodes} nodes, config says {cfg.nodes}")
        graphs = [(FILE_GRAPH_SEED, graph)]
    else:
        graphs = [(s, erdos_renyi(cfg.nodes, cfg.edge_prob, s)) for s in cfg.graph_seeds]
    jobs = [(g, s, theta) for s, g in graphs for theta in cfg.thetas]
    runs = Parallel(n_jobs=n_jobs)(
        delayed(_single_run)(inst, reference, g, s, theta, cfg, data_term) for g, s, theta in jobs
    )
    return ExperimentResult(cfg, inst, reference, list(runs))


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def emit_plot_data(result: ExperimentResult, out_dir) -> list[Path]:
    """Write ``histogram.csv``, ``summary.csv``, ``config.json`` and one trace per run."""
    if not result.runs:
        raise ValueError("no runs to write")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    path = out / "histogram.csv"
    _write_csv(path, ["theta", "graph_seed", "rounds", "status"],
               [(r.theta, r.graph_seed, r.rounds, r.status) for r in result.runs])
    written.append(path)
    for r in result.runs:
        path = out / f"trace_{r.theta:g}_{r.graph_seed}.csv"
        _write_csv(path, ["round", "rel_err"], [(k, e) for k, e in enumerate(r.rel_err, start=1)])
        written.append(path)
    path = out / "summary.csv"
    _write_csv(path, ["theta", "median_rounds", "p25", "p75", "n_converged"],
               [(s["theta"], s["median_rounds"], s["p25"], s["p75"], s["n_converged"])
                for s in result.summary()])
    written.append(path)
    path = out / "config.json"
    path.write_text(json.dumps(asdict(result.config), indent=2, sort_keys=True) + "\n")
    written.append(path)
    return written
