"""Command-line entry point (``ampc``).

Subcommands::

    ampc run --scenario sudden_brake --planner am --plant second-order --out runs/
    ampc bench-am-vs-joint --seed 0 --out bench/
    ampc bench-actuator --plant second-order --out bench/
    ampc fit-tau [--data samples.csv]
    ampc step-response --plant second-order --out step.csv

``--scenario`` takes a bundled name, a path to a TOML file, or
``random-<seed>-<index>`` for a member of the random suite.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import bench
from .dynamics import FirstOrder, LinearRamp, SecondOrder, fit_tau, step_response
from .errors import ConfigError, IdentificationError, InvalidParameterError, ScenarioError
from .scenarios import REFERENCE_SCENARIOS, bundled, load, random_scenarios
from .sim import write_trace

log = logging.getLogger("ampc.cli")

PLANT_CHOICES = ("first-order", "linear", "second-order")
MODEL_CHOICES = ("first-order", "linear")
SUITE_COLUMNS = ["scenario", "planner", "iters_mean", "iters_max", "wall_ms_mean", "wall_ms_max",
                 "J_smooth_plan", "min_distance", "collision"]
ACTUATOR_COLUMNS = ["scenario", "planner_model", "plant", "min_distance", "overshoot_pct", "oscillation_rms",
                    "J_v", "J_theta", "wall_ms_mean", "collision"]


def resolve_scenario(name: str):
    if name.startswith("random-"):
        try:
            _, seed, index = name.split("-")
            seed, index = int(seed), int(index)
        except ValueError as exc:
            raise ConfigError(f"random scenarios are named random-<seed>-<index>, got {name!r}") from exc
        return random_scenarios(seed, index + 1)[index]
    if name in REFERENCE_SCENARIOS:
        return bundled(name)
    return load(name)


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_records(path: Path, records: list[dict]) -> None:
    if not records:
        path.write_text("")
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(records[0]))
        w.writeheader()
        w.writerows(records)


def cmd_run(args) -> int:
    sc = resolve_scenario(args.scenario)
    res = bench.run_scenario(sc, args.planner, args.planner_model, args.plant, args.tau, args.ticks)
    out = _out_dir(args.out)
    stem = f"{sc.name}_{args.planner}_{args.planner_model}_{args.plant}"
    write_trace(res.trace, out / f"{stem}.csv")
    (out / f"{stem}_metrics.json").write_text(json.dumps(res.metrics.as_dict(), indent=2, sort_keys=True))
    if not args.quiet:
        m = res.metrics
        print(f"{sc.name}: {m.ticks} ticks, min distance {m.min_inter_vehicle_distance:.3f} m, "
              f"overshoot {m.velocity_overshoot:.2f} %, mean plan {m.wall_ms_mean:.1f} ms, "
              f"collision {'yes' if m.collision else 'no'}")
        print(f"trace: {out / (stem + '.csv')}")
    return 0


def cmd_bench_am_vs_joint(args) -> int:
    results = bench.am_vs_joint(args.seed, args.count, args.workers)
    records = [r.record() for r in results]
    summary = bench.summarize_am_vs_joint(results)
    out = _out_dir(args.out)
    _write_records(out / "am_vs_joint.csv", records)
    (out / "am_vs_joint_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    table = bench.format_table(records, SUITE_COLUMNS)
    (out / "am_vs_joint.txt").write_text(table + "\n")
    if not args.quiet:
        print(table)
        print()
        for k, v in summary.items():
            print(f"{k:24s} {v:.4g}" if isinstance(v, float) else f"{k:24s} {v}")
    return 0


def cmd_bench_actuator(args) -> int:
    results = bench.actuator_comparison(args.plant, args.tau, args.workers)
    records = [r.record() for r in results]
    out = _out_dir(args.out)
    _write_records(out / f"actuator_{args.plant}.csv", records)
    table = bench.format_table(records, ACTUATOR_COLUMNS)
    (out / f"actuator_{args.plant}.txt").write_text(table + "\n")
    if not args.quiet:
        print(table)
    return 0


def read_step_samples(path) -> np.ndarray:
    """``t, v, v0, v_c`` rows from a CSV file; ``#`` lines and a header are skipped."""
    rows = []
    with open(path, newline="") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            try:
                rows.append([float(p) for p in parts])
            except ValueError:
                if rows:
                    raise ConfigError(f"{path}: non-numeric row {line!r}")
                continue   # header
            if len(rows[-1]) != 4:
                raise ConfigError(f"{path}: expected 4 columns (t, v, v0, v_c), got {len(rows[-1])}")
    return np.asarray(rows, dtype=float)


def cmd_fit_tau(args) -> int:
    if args.data is None:
        path = resources.files("ampc.data").joinpath("step_tau07.csv")
    else:
        path = Path(args.data)
        if not path.exists():
            raise ConfigError(f"data file not found: {path}")
    tau = fit_tau(read_step_samples(path))
    print(f"{tau:.6g}")
    return 0


def _plant_model(kind: str, tau: float, omega_n: float, zeta: float):
    if kind == "first-order":
        return FirstOrder(tau)
    if kind == "linear":
        return LinearRamp()
    return SecondOrder(omega_n, zeta)


def cmd_step_response(args) -> int:
    model = _plant_model(args.plant, args.tau if args.tau is not None else 0.5, args.omega_n, args.zeta)
    t, v = step_response(model, args.v0, args.vc, args.duration, args.dt)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "v", "v0", "v_c"])
        for ti, vi in zip(t, v):
            w.writerow([f"{ti:.9g}", f"{vi:.9g}", f"{args.v0:.9g}", f"{args.vc:.9g}"])
    if not args.quiet:
        print(f"{args.plant} step {args.v0:g} -> {args.vc:g} m/s: {t.size} samples written to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ampc", description="Alternating-minimisation MPC planner and benchmarks")
    parser.add_argument("--log-level", default="WARNING", help="logging level (default WARNING)")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="out", help="output directory (default ./out)")
    common.add_argument("--quiet", action="store_true", help="suppress the printed summary")
    common.add_argument("--tau", type=float, default=None, help="planner time constant override [s]")

    p = sub.add_parser("run", parents=[common], help="simulate one scenario and write its trace")
    p.add_argument("--scenario", required=True, help="bundled name, TOML path or random-<seed>-<index>")
    p.add_argument("--planner", choices=("am", "joint"), default="am")
    p.add_argument("--plant", choices=PLANT_CHOICES, default="first-order")
    p.add_argument("--planner-model", choices=MODEL_CHOICES, default="first-order")
    p.add_argument("--ticks", type=int, default=None, help="number of ticks (default: whole scenario)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench-am-vs-joint", parents=[common], help="both planners on the random suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--workers", type=int, default=1, help="parallel processes (wall times get noisier)")
    p.set_defaults(func=cmd_bench_am_vs_joint)

    p = sub.add_parser("bench-actuator", parents=[common], help="first-order vs linear-ramp planner model")
    p.add_argument("--plant", choices=PLANT_CHOICES, default="first-order")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_bench_actuator)

    p = sub.add_parser("fit-tau", help="fit a time constant to step-response samples")
    p.add_argument("--data", default=None, help="CSV of t,v,v0,v_c rows (default: bundled tau=0.7 samples)")
    p.set_defaults(func=cmd_fit_tau)

    p = sub.add_parser("step-response", parents=[common], help="simulate a plant step and write t,v samples")
    p.add_argument("--plant", choices=PLANT_CHOICES, default="second-order")
    p.add_argument("--v0", type=float, default=0.0)
    p.add_argument("--vc", type=float, default=10.0)
    p.add_argument("--duration", type=float, default=5.0)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--omega-n", type=float, default=2.0)
    p.add_argument("--zeta", type=float, default=0.7)
    p.set_defaults(func=cmd_step_response, out="step_response.csv")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ScenarioError, IdentificationError, InvalidParameterError, OSError) as exc:
        print(f"ampc: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
