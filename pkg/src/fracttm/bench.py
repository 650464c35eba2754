"""Convergence and M studies, reference caching, and surface export."""
from __future__ import annotations

import csv
import gc
import hashlib
import io
import itertools
import json
import os
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from .assembly import TensorMesh2D
from .metrics import ReferenceSolution, convergence_rate, error_frac_norm, error_l2
from .problems import ProblemSpec, get_problem
from .solvers import SolverConfig
from .timestep import DiscretizationConfig, run_standard_fe
from .ttm import TwoMeshGrid, run_ttm

CSV_COLUMNS = [
    "problem", "method", "alpha", "theta", "epsilon", "h", "tau_c", "tau", "M",
    "err_l2", "rate_l2", "err_mu", "rate_mu", "cpu_s", "status",
]
M_STUDY_COLUMNS = ["M", "cpu_seconds", "err_mu", "err_l2"]
REFERENCE_FORMAT_VERSION = 1


# -- configuration ------------------------------------------------------------


@dataclass(frozen=True)
class Level:
    """One row of a refinement ladder: ``h = 1 / n_cells``, fine step ``tau`` and ``M``."""

    n_cells: int
    tau: float
    M: int

    @property
    def h(self) -> float:
        return 1.0 / self.n_cells

    @property
    def tau_c(self) -> float:
        return self.M * self.tau


@dataclass(frozen=True)
class StudyConfig:
    problem: str
    levels: tuple[Level, ...]
    alphas: tuple[float, ...] = (1.5,)
    thetas: tuple[float, ...] = (0.0,)
    epsilons: tuple[float, ...] = (0.01,)
    method: str = "ttm"
    norms: tuple[str, ...] = ("l2", "mu")
    reference_res: int = 64
    repeats: int = 0
    initial: str = "l2"

    def __post_init__(self):
        if self.method not in ("ttm", "fe", "both"):
            raise ValueError(f"method must be ttm, fe or both, got {self.method!r}")
        for lev in self.levels:
            if self.method != "fe":
                TwoMeshGrid.from_fine(lev.tau, lev.M)
            if lev.n_cells >= self.reference_res and self.problem != "example1":
                raise ValueError("reference resolution must be finer than every study mesh")


def _methods(method: str) -> list[str]:
    return ["ttm", "fe"] if method == "both" else [method]


# -- timing -------------------------------------------------------------------


def timed_median(fn: Callable[[], object], repeats: int = 3) -> tuple[object, float]:
    """One untimed warm-up call, then the median CPU time of ``repeats`` calls.

    Runs with BLAS pinned to one thread and the garbage collector paused.
    Returns the warm-up result and the median seconds.
    """
    with threadpool_limits(1):
        result = fn()
        times = []
        for _ in range(repeats):
            gc.collect()
            gc.disable()
            try:
                t0 = time.process_time()
                fn()
                times.append(time.process_time() - t0)
            finally:
                gc.enable()
    return result, statistics.median(times)


def run_method(problem: ProblemSpec, disc: DiscretizationConfig, method: str):
    return run_ttm(problem, disc) if method == "ttm" else run_standard_fe(problem, disc)


# -- reference cache ----------------------------------------------------------


@dataclass
class ReferenceEntry:
    key: dict
    config_hash: str
    coeffs: np.ndarray
    mesh: TensorMesh2D
    checkpoint_times: np.ndarray
    checkpoints: np.ndarray
    version: int = REFERENCE_FORMAT_VERSION

    def solution(self) -> ReferenceSolution:
        return ReferenceSolution(self.coeffs, self.mesh)


def cache_dir() -> Path:
    return Path(os.environ.get("FRACTTM_CACHE_DIR", Path.home() / ".cache" / "fracttm"))


def reference_key(problem: ProblemSpec, theta: float, resolution: int, initial: str = "l2") -> dict:
    return {
        "problem": problem.name,
        "alpha": problem.alpha.alpha,
        "epsilon": problem.epsilon,
        "theta": theta,
        "h_ref": 1.0 / resolution,
        "tau_ref": 1.0 / resolution,
        "initial": initial,
        "version": REFERENCE_FORMAT_VERSION,
    }


def _config_hash(key: dict) -> str:
    return hashlib.sha256(json.dumps(key, sort_keys=True).encode()).hexdigest()


def build_reference(
    problem: ProblemSpec,
    resolution: int = 64,
    theta: float = 0.0,
    *,
    directory: Optional[Path] = None,
    initial: str = "l2",
    use_cache: bool = True,
    n_checkpoints: int = 4,
) -> ReferenceEntry:
    """Standard FE solution with ``h = tau = 1 / resolution``, cached on disk.

    The linear systems are solved with the Kronecker-preconditioned
    conjugate gradient path.  A cached file whose version or configuration
    hash does not match is rebuilt.
    """
    key = reference_key(problem, theta, resolution, initial)
    digest = _config_hash(key)
    directory = Path(directory) if directory is not None else cache_dir()
    path = directory / f"{problem.name}-{digest[:20]}.npz"
    mesh = TensorMesh2D.unit_square(resolution)
    if use_cache and path.exists():
        try:
            with np.load(path, allow_pickle=False) as data:
                meta = json.loads(str(data["meta"]))
                if meta.get("version") == REFERENCE_FORMAT_VERSION and meta.get("hash") == digest:
                    return ReferenceEntry(key, digest, data["coeffs"].copy(), mesh,
                                          data["checkpoint_times"].copy(), data["checkpoints"].copy())
        except (OSError, KeyError, ValueError):
            pass
    disc = DiscretizationConfig(resolution, 1.0 / resolution, theta, solver=SolverConfig(strategy="pcg"),
                                initial=initial)
    traj = run_standard_fe(problem, disc)
    n = len(traj.states) - 1
    idx = sorted({round(k * n / n_checkpoints) for k in range(1, n_checkpoints + 1)})
    times = np.array([traj.states[i].time_label for i in idx])
    checkpoints = np.array([np.asarray(traj.states[i]) for i in idx])
    entry = ReferenceEntry(key, digest, np.asarray(traj.final, dtype=float).copy(), mesh, times, checkpoints)
    if use_cache:
        directory.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp.npz")
        meta = json.dumps({"version": REFERENCE_FORMAT_VERSION, "hash": digest, "key": key})
        np.savez(tmp, coeffs=entry.coeffs, checkpoint_times=times, checkpoints=checkpoints, meta=np.array(meta))
        os.replace(tmp, path)
    return entry


# -- convergence study ----------------------------------------------------------


@dataclass
class ConvergenceReport:
    rows: list[dict] = field(default_factory=list)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow({k: _fmt(row.get(k)) for k in CSV_COLUMNS})
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def _ratio(prev: Level, cur: Level) -> float:
    if cur.n_cells != prev.n_cells:
        return cur.n_cells / prev.n_cells
    return prev.tau / cur.tau


def run_convergence_study(config: StudyConfig, *, reference_dir: Optional[Path] = None) -> ConvergenceReport:
    """One row per (alpha, theta, epsilon, method, level); rates between consecutive levels."""
    report = ConvergenceReport()
    for alpha, theta, eps in itertools.product(config.alphas, config.thetas, config.epsilons):
        problem = get_problem(config.problem, alpha, eps)
        exact = problem.exact
        reference = None
        if exact is None and config.levels:
            reference = build_reference(problem, config.reference_res, theta, directory=reference_dir,
                                        initial=config.initial).solution()
        for method in _methods(config.method):
            prev: Optional[tuple[Level, dict]] = None
            for lev in config.levels:
                row = {
                    "problem": config.problem, "method": method, "alpha": alpha, "theta": theta,
                    "epsilon": eps, "h": lev.h, "tau_c": lev.tau_c if method == "ttm" else lev.tau,
                    "tau": lev.tau, "M": lev.M if method == "ttm" else 1, "status": "ok",
                }
                disc = DiscretizationConfig(lev.n_cells, lev.tau, theta, lev.M if method == "ttm" else 1,
                                            initial=config.initial)
                try:
                    if config.repeats > 0:
                        traj, cpu = timed_median(lambda: run_method(problem, disc, method), config.repeats)
                    else:
                        traj = run_method(problem, disc, method)
                        cpu = traj.cpu_seconds
                    mesh = traj.opset.mesh
                    if "l2" in config.norms:
                        row["err_l2"] = error_l2(traj.final, exact if exact is not None else reference, mesh,
                                                 problem.T if exact is not None else None)
                    if "mu" in config.norms and exact is not None:
                        row["err_mu"] = error_frac_norm(traj.final, exact, mesh, problem.mu, problem.T)
                    row["cpu_s"] = cpu
                except Exception as exc:  # a failed cell is recorded and the study continues
                    row["status"] = f"failed: {type(exc).__name__}: {exc}"
                if prev is not None and prev[1]["status"] == "ok" and row["status"] == "ok":
                    ratio = _ratio(prev[0], lev)
                    for norm in ("l2", "mu"):
                        a, b = prev[1].get(f"err_{norm}"), row.get(f"err_{norm}")
                        if a and b and ratio > 1:
                            row[f"rate_{norm}"] = convergence_rate(a, b, ratio)
                report.rows.append(row)
                prev = (lev, row)
    return report


# -- M study ------------------------------------------------------------------


@dataclass(frozen=True)
class MStudyConfig:
    problem: str = "example1"
    alpha: float = 1.2
    theta: float = 0.5
    epsilon: float = 0.1
    n_cells: int = 20
    tau: float = 1.0 / 400.0
    Ms: tuple[int, ...] = (2, 5, 10, 20)
    repeats: int = 3
    initial: str = "l2"


def run_m_study(config: MStudyConfig) -> list[dict]:
    """Rows ``(M, cpu_seconds, err_mu, err_l2)``; the ``M = 1`` row is the standard FE baseline."""
    problem = get_problem(config.problem, config.alpha, config.epsilon)
    if problem.exact is None:
        raise ValueError("the M study needs a problem with an exact solution")
    rows = []
    for M in (1, *config.Ms):
        disc = DiscretizationConfig(config.n_cells, config.tau, config.theta, M, initial=config.initial)
        method = "fe" if M == 1 else "ttm"
        traj, cpu = timed_median(lambda: run_method(problem, disc, method), config.repeats)
        mesh = traj.opset.mesh
        rows.append({
            "M": M,
            "cpu_seconds": cpu,
            "err_mu": error_frac_norm(traj.final, problem.exact, mesh, problem.mu, problem.T),
            "err_l2": error_l2(traj.final, problem.exact, mesh, problem.T),
        })
    return rows


def m_study_csv(rows: Sequence[dict], path=None) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=M_STUDY_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: _fmt(r[k]) for k in M_STUDY_COLUMNS})
    if path is not None:
        Path(path).write_text(buf.getvalue())
    return buf.getvalue()


# -- surface export -------------------------------------------------------------


def emit_surface(state, mesh: TensorMesh2D, path) -> None:
    """Write ``x y value`` for every node, boundary included, y-major, 17 significant digits.

    ``path`` may also be an open text stream.
    """
    Up = mesh.pad(np.asarray(state, dtype=float))
    xs, ys = mesh.mesh_x.nodes, mesh.mesh_y.nodes
    lines = ["x y value\n"]
    lines += [f"{x:.17g} {y:.17g} {Up[j, i]:.17g}\n" for j, y in enumerate(ys) for i, x in enumerate(xs)]
    if hasattr(path, "write"):
        path.writelines(lines)
    else:
        with open(path, "w") as fh:
            fh.writelines(lines)


def read_surface(path) -> np.ndarray:
    """Rows of ``(x, y, value)`` from a surface file."""
    return np.loadtxt(path, skiprows=1, ndmin=2)
