"""Global-best particle swarm optimizer with reflecting bounds.

Generic over the evaluation callable: it may return a bare float or
any object exposing .objective, .m_total and .m_diff (the masking
metric result does), which then get recorded in the iteration trace.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class PsoConfig:
    swarm_size: int = 50
    max_iterations: int = 100
    inertia: float = 0.7298
    cognitive: float = 1.49618
    social: float = 1.49618
    velocity_clamp: float = 0.2  # fraction of each dimension's range
    stall_window: int = 10
    stall_tolerance: float = 0.05
    rng_seed: int = 0
    workers: int = 1

    def __post_init__(self) -> None:
        if self.swarm_size < 2:
            raise ValueError("swarm_size must be >= 2")
        if self.max_iterations < 1 or self.stall_window < 1:
            raise ValueError("max_iterations and stall_window must be >= 1")
        if self.stall_tolerance < 0.0:
            raise ValueError("stall_tolerance must be >= 0")
        if not 0.0 < self.velocity_clamp <= 1.0:
            raise ValueError("velocity_clamp must be in (0, 1]")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    best_f: float
    m_total: float
    m_diff: float
    evaluations: int


@dataclass
class PsoTrace:
    rows: list[TraceRow] = field(default_factory=list)
    stop_reason: str = ""
    nan_evaluations: int = 0
    best_result: object = None


def _score(result) -> tuple[float, float, float]:
    if hasattr(result, "objective"):
        return float(result.objective), float(result.m_total), float(result.m_diff)
    return float(result), math.nan, math.nan


def seed_identity_particle(
    positions: np.ndarray, bounds: np.ndarray, identity_values: np.ndarray
) -> np.ndarray:
    """Pin particle 0 to a known-good starting point.

    The point must lie inside the bounds; the optimizer can then never
    return anything worse than it.
    """
    identity_values = np.asarray(identity_values, dtype=np.float64)
    if identity_values.shape != (positions.shape[1],):
        raise ValueError(
            f"identity vector shape {identity_values.shape} does not match dimension {positions.shape[1]}"
        )
    if np.any(identity_values < bounds[:, 0]) or np.any(identity_values > bounds[:, 1]):
        raise ValueError("identity point lies outside the search bounds")
    out = positions.copy()
    out[0] = identity_values
    return out


def _reflect(positions: np.ndarray, velocities: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> None:
    # mirror positions at the violated face and flip that velocity
    # component; repeated in case a large step crosses several times
    for _ in range(100):
        under = positions < lo
        over = positions > hi
        if not (under.any() or over.any()):
            return
        positions[under] = 2.0 * np.broadcast_to(lo, positions.shape)[under] - positions[under]
        positions[over] = 2.0 * np.broadcast_to(hi, positions.shape)[over] - positions[over]
        velocities[under | over] *= -1.0
    np.clip(positions, lo, hi, out=positions)


def optimize(
    evaluate,
    bounds: np.ndarray,
    config: PsoConfig | None = None,
    initial: np.ndarray | None = None,
) -> tuple[np.ndarray, PsoTrace]:
    """Minimize evaluate(x) over a box.

    Parameters
    ----------
    evaluate : callable(np.ndarray) -> float | result object
    bounds : (dims, 2) array of [low, high] per dimension
    initial : optional point pinned as particle 0

    Returns
    -------
    (best_values, trace)
        The trace has one row per iteration (iteration 1 is the
        evaluation of the initial swarm) with the running best; its
        stop_reason is one of "zero_objective", "tolerance_stall",
        "max_iterations".
    """
    if config is None:
        config = PsoConfig()
    bounds = np.asarray(bounds, dtype=np.float64)
    if bounds.ndim != 2 or bounds.shape[1] != 2:
        raise ValueError(f"bounds must be (dims, 2), got {bounds.shape}")
    lo, hi = bounds[:, 0], bounds[:, 1]
    if not np.all(np.isfinite(bounds)) or np.any(lo >= hi):
        raise ValueError("bounds must be finite with low < high")
    dims = bounds.shape[0]

    rng = np.random.default_rng(config.rng_seed)
    positions = rng.uniform(lo, hi, size=(config.swarm_size, dims))
    if initial is not None:
        positions = seed_identity_particle(positions, bounds, initial)
    velocities = np.zeros_like(positions)
    v_max = config.velocity_clamp * (hi - lo)

    trace = PsoTrace()
    evaluations = 0
    pool = ThreadPoolExecutor(max_workers=config.workers) if config.workers > 1 else None

    def run_swarm(pos):
        nonlocal evaluations
        rows = [np.array(row) for row in pos]
        results = list(pool.map(evaluate, rows)) if pool else [evaluate(row) for row in rows]
        evaluations += len(rows)
        fvals = np.empty(len(rows))
        for i, res in enumerate(results):
            f, _, _ = _score(res)
            if math.isnan(f):
                trace.nan_evaluations += 1
                f = math.inf
            fvals[i] = f
        return fvals, results

    try:
        f_vals, results = run_swarm(positions)
        pbest_pos = positions.copy()
        pbest_f = f_vals.copy()
        g_idx = int(np.argmin(f_vals))
        gbest_pos = positions[g_idx].copy()
        gbest_f = float(f_vals[g_idx])
        gbest_result = results[g_idx]

        history = []

        def record(iteration):
            _, m_total, m_diff = _score(gbest_result)
            trace.rows.append(TraceRow(iteration, gbest_f, m_total, m_diff, evaluations))
            history.append(gbest_f)

        record(1)

        iteration = 1
        while True:
            if gbest_f == 0.0:
                trace.stop_reason = "zero_objective"
                break
            if (
                len(history) > config.stall_window
                and history[-1 - config.stall_window] - history[-1] < config.stall_tolerance
            ):
                trace.stop_reason = "tolerance_stall"
                break
            if iteration >= config.max_iterations:
                trace.stop_reason = "max_iterations"
                break

            iteration += 1
            r1 = rng.random((config.swarm_size, dims))
            r2 = rng.random((config.swarm_size, dims))
            velocities = (
                config.inertia * velocities
                + config.cognitive * r1 * (pbest_pos - positions)
                + config.social * r2 * (gbest_pos[None, :] - positions)
            )
            np.clip(velocities, -v_max, v_max, out=velocities)
            positions = positions + velocities
            _reflect(positions, velocities, lo, hi)

            f_vals, results = run_swarm(positions)
            improved = f_vals < pbest_f
            pbest_pos[improved] = positions[improved]
            pbest_f[improved] = f_vals[improved]
            g_idx = int(np.argmin(pbest_f))
            if pbest_f[g_idx] < gbest_f:
                gbest_f = float(pbest_f[g_idx])
                gbest_pos = pbest_pos[g_idx].copy()
                best_i = int(np.argmin(f_vals))
                # the new global best came from this swarm evaluation
                gbest_result = results[best_i]
            record(iteration)
    finally:
        if pool:
            pool.shutdown()

    trace.best_result = gbest_result
    return gbest_pos, trace


def write_trace_csv(trace: PsoTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "f", "m_total", "m_diff", "evaluations"])
        for row in trace.rows:
            writer.writerow(
                [row.iteration, repr(row.best_f), repr(row.m_total), repr(row.m_diff), row.evaluations]
            )
