"""Compiled vs pure-numpy timings of the hot kernels.

The JIT switch is read at import time, so each backend runs in its own
subprocess::

    python3 benchmarks/bench_kernels.py            # both backends, side by side
    python3 benchmarks/bench_kernels.py --worker   # one backend, JSON to stdout
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _time(fn, repeat: int) -> float:
    fn()                                  # compile / warm up
    best = np.inf
    for _ in range(3):
        t0 = time.perf_counter()
        for _ in range(repeat):
            fn()
        best = min(best, (time.perf_counter() - t0) / repeat)
    return best * 1e6


def worker() -> dict:
    from ampc import backend
    from ampc.dynamics import FirstOrder, SecondOrder, VehicleState, plant_step, rollout_kernel
    from ampc.qp import solve_qp
    from ampc.planner import PlannerConfig, plan
    from ampc.scenarios import bundled

    rng = np.random.default_rng(0)
    N, dt = 50, 0.1
    thdd = rng.uniform(-0.5, 0.5, N)
    v_c = rng.uniform(5, 15, N)
    m = np.full(N, np.exp(-dt / 0.5))
    state = VehicleState(0.0, 0.0, 0.1, 0.0, 10.0)

    sc = bundled("sudden_brake")
    cfg = sc.planner_config("first-order")
    obstacles = sc.all_obstacles()

    from ampc.planner.am import angular_layer
    from ampc.planner.common import build_scene, initial_traj
    scene = build_scene(obstacles, sc.ego, 0.0, cfg)
    guess = initial_traj(None, None, sc.ego, cfg)
    captured = []
    import ampc.planner.am as am_mod
    original = am_mod.solve_qp

    def capture(p, *a, **k):
        captured.append(p)
        return original(p, *a, **k)
    am_mod.solve_qp = capture
    angular_layer(guess, 10.0, 0.3, cfg, scene)
    am_mod.solve_qp = original
    qp = captured[0]

    return {
        "backend": backend(),
        "rollout_us": _time(lambda: rollout_kernel(0.0, 0.0, 0.0, 0.0, 10.0, thdd, v_c, m, dt), 2000),
        "plant_first_order_us": _time(lambda: plant_step(state, 12.0, 0.1, FirstOrder(0.5), dt, dt / 10), 2000),
        "plant_second_order_us": _time(lambda: plant_step(state, 12.0, 0.1, SecondOrder(2.0, 0.7), dt, dt / 10), 2000),
        "qp_angular_layer_us": _time(lambda: solve_qp(qp), 50),
        "plan_cold_ms": _time(lambda: plan(sc.ego, obstacles, cfg), 3) / 1e3,
    }


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--worker", action="store_true")
    args = ap.parse_args()
    if args.worker:
        print(json.dumps(worker()))
        return 0
    rows = {}
    for flag in ("0", "1"):
        env = dict(os.environ, AMPC_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, __file__, "--worker"], env=env, check=True,
                             capture_output=True, text=True).stdout
        res = json.loads(out.strip().splitlines()[-1])
        rows[res.pop("backend")] = res
    keys = list(next(iter(rows.values())))
    print(f"{'kernel':24s} {'numba':>12s} {'numpy':>12s} {'speedup':>9s}")
    for k in keys:
        a, b = rows.get("numba", {}).get(k, np.nan), rows.get("numpy", {}).get(k, np.nan)
        print(f"{k:24s} {a:12.2f} {b:12.2f} {b / a:9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
