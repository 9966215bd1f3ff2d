"""Batch runners shared by the command line and the acceptance tests.

Benchmarks measure; they never assert.  A run that collides still returns
its metrics with ``collision`` set.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .metrics import MetricsReport, compute_metrics
from .scenarios import REFERENCE_SCENARIOS, ScenarioConfig, bundled, random_scenarios
from .sim import run


@dataclass
class RunResult:
    scenario: str
    planner: str
    planner_model: str
    plant: str
    trace: list
    metrics: MetricsReport
    J_smooth_plan: float     # mean over ticks of the returned plan's J_theta + J_v

    def record(self) -> dict:
        m = self.metrics
        return {"scenario": self.scenario, "planner": self.planner, "planner_model": self.planner_model,
                "plant": self.plant, "min_distance": m.min_inter_vehicle_distance,
                "overshoot_pct": m.velocity_overshoot, "oscillation_rms": m.settling_oscillation,
                "J_v": m.J_v, "J_theta": m.J_theta, "J_smooth_plan": self.J_smooth_plan,
                "iters_mean": m.iters_mean, "iters_max": m.iters_max, "wall_ms_mean": m.wall_ms_mean,
                "wall_ms_max": m.wall_ms_max, "collision": m.collision, "ticks": m.ticks}


def run_scenario(sc: ScenarioConfig, planner: str = "am", planner_model: str = "first-order",
                 plant: str = "first-order", tau: float | None = None, ticks: int | None = None,
                 **overrides) -> RunResult:
    """Closed-loop run of one scenario with the carrot goal and its metrics."""
    config = sc.planner_config(planner_model, tau=tau, **overrides)
    smooth = []

    def on_tick(sim, rec):
        if sim.last_plan is not None:
            smooth.append(sim.last_plan.costs.J_theta + sim.last_plan.costs.J_v)

    trace = run(sc.ego, sc.all_obstacles(), config, sc.duration, planner, sc.plant(plant),
                goal_fn=sc.goal_fn(config), ticks=ticks, on_tick=on_tick)
    metrics = compute_metrics(trace, sc.vehicles(), sc.transitions, config.ego_offsets,
                              config.w_smooth_v, config.w_smooth_theta)
    return RunResult(sc.name, planner, planner_model, plant, trace, metrics,
                     float(np.mean(smooth)) if smooth else 0.0)


def _pool_map(fn, jobs, workers: int):
    if workers <= 1:
        return [fn(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_star, [(fn, j) for j in jobs]))


def _star(item):
    fn, args = item
    return fn(*args)


def _suite_job(seed, count, index, planner, duration):
    sc = random_scenarios(seed, count, duration)[index]
    res = run_scenario(sc, planner)
    res.trace = []          # keep worker results small
    return res


def am_vs_joint(seed: int = 0, count: int = 20, workers: int = 1, duration: float = 8.0) -> list[RunResult]:
    """Both planners on the seeded random suite (first-order model and plant)."""
    jobs = [(seed, count, i, p, duration) for i in range(count) for p in ("am", "joint")]
    return _pool_map(_suite_job, jobs, workers)


def _actuator_job(name, model, plant, tau):
    res = run_scenario(bundled(name), "am", model, plant, tau)
    res.trace = []
    return res


def actuator_comparison(plant: str = "first-order", tau: float | None = None, workers: int = 1,
                        scenarios=REFERENCE_SCENARIOS) -> list[RunResult]:
    """The reference scenarios under the first-order and linear-ramp planner models."""
    jobs = [(n, m, plant, tau) for n in scenarios for m in ("first-order", "linear")]
    return _pool_map(_actuator_job, jobs, workers)


def not_worse(x: float, ref: float, tol: float = 1e-6) -> bool:
    """``x <= ref`` up to solver noise (both planners sit at zero on trivial scenes)."""
    return x <= ref + tol * max(1.0, abs(ref))


def summarize_am_vs_joint(results: list[RunResult]) -> dict:
    am = [r for r in results if r.planner == "am"]
    jt = [r for r in results if r.planner == "joint"]
    pairs = list(zip(am, jt))
    return {
        "scenarios": len(pairs),
        "am_iters_mean": float(np.mean([r.metrics.iters_mean for r in am])) if am else 0.0,
        "joint_iters_mean": float(np.mean([r.metrics.iters_mean for r in jt])) if jt else 0.0,
        "am_wall_ms_mean": float(np.mean([r.metrics.wall_ms_mean for r in am])) if am else 0.0,
        "joint_wall_ms_mean": float(np.mean([r.metrics.wall_ms_mean for r in jt])) if jt else 0.0,
        "joint_smoother_fraction": (float(np.mean([not_worse(j.J_smooth_plan, a.J_smooth_plan) for a, j in pairs]))
                                    if pairs else 0.0),
        "am_collisions": sum(r.metrics.collision for r in am),
        "joint_collisions": sum(r.metrics.collision for r in jt),
    }


def format_table(records: list[dict], columns: list[str]) -> str:
    """Fixed-width text table."""
    cells = [[_cell(r[c]) for c in columns] for r in records]
    widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)


def _cell(v) -> str:
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)
