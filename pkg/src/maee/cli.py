"""Command-line entry point: experiment sweeps and a built-in oracle selftest."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

import numpy as np

from .harness import SCHEMES, SWEEPS, ExperimentConfig, load_config, run_sweep


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="maee",
        description="Movable-antenna energy-efficiency experiment runner")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a Monte-Carlo sweep and write a CSV")
    run.add_argument("--config", required=True, help="key=value config file")
    run.add_argument("--sweep", choices=SWEEPS, help="override swept parameter")
    run.add_argument("--sweep-values", help="comma-separated sweep values")
    run.add_argument("--schemes", help=f"comma-separated subset of {SCHEMES}")
    run.add_argument("--trials", type=int, help="trials per sweep value")
    run.add_argument("--seed", type=int, help="base RNG seed")
    run.add_argument("--out", default="results.csv", help="output CSV path")
    run.add_argument("--timing", action="store_true",
                     help="record wall-clock times (breaks byte determinism)")

    sub.add_parser("selftest", help="run the built-in oracle checks")
    return parser


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    updates = {}
    if args.sweep:
        updates["sweep"] = args.sweep
    if args.sweep_values:
        updates["sweep_values"] = tuple(float(v) for v in
                                        args.sweep_values.split(","))
    if args.schemes:
        updates["schemes"] = tuple(s.strip() for s in args.schemes.split(","))
    if args.trials is not None:
        updates["trials"] = args.trials
    if args.seed is not None:
        updates["base_seed"] = args.seed
    if args.timing:
        updates["record_wall_time"] = True
    return replace(cfg, **updates) if updates else cfg


def _cmd_run(args) -> int:
    try:
        cfg = _apply_overrides(load_config(args.config), args)
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    result = run_sweep(cfg, out_path=args.out)
    feasible = sum(r.feasible for r in result.rows)
    print(f"wrote {len(result.rows)} rows ({feasible} feasible) to {args.out}")
    return 0


def _cmd_selftest() -> int:
    """Compact oracle/property checks; exit 0 only if every check passes."""
    from .channel import channel_gain, gain_expansion, sample_channels, two_path_period
    from .multi_user import (algorithm2, bilinear_lower_bound,
                             bilinear_upper_bound, curvature_bound,
                             h_jk_derivative, h_jk_value, pair_matrix)
    from .single_user import GridSpec, ee_upper_bound, exhaustive_search

    rng = np.random.default_rng(1234)
    results = []

    def check(name, ok, detail=""):
        results.append(bool(ok))
        print(f"{'PASS' if ok else 'FAIL'}  {name}"
              f"{'  (' + detail + ')' if detail else ''}")

    cfg = ExperimentConfig(num_users=1, num_paths=4, num_bs_antennas=8)

    # closed-form gain series vs direct norm
    worst = 0.0
    for seed in range(20):
        chan = sample_channels(cfg.scenario(), seed)[0]
        exp = gain_expansion(chan)
        xs = rng.uniform(0, 5 * cfg.wavelength, 50)
        err = np.abs(exp.evaluate(xs) - channel_gain(chan, xs))
        worst = max(worst, float(np.max(err / (1.0 + channel_gain(chan, xs)))))
    check("gain series matches direct norm", worst <= 1e-10, f"max rel {worst:.1e}")

    # two-path periodicity
    ok = True
    for _ in range(10):
        from .channel import ChannelRealization, PathGeometry
        aods = np.sort(rng.uniform(-1, 1, 2))
        if aods[1] - aods[0] < 1e-3:
            continue
        g = rng.standard_normal((2, 4)) + 1j * rng.standard_normal((2, 4))
        chan = ChannelRealization(g, PathGeometry.from_virtual_aods(aods), 0.01)
        period = two_path_period(chan)
        for x in rng.uniform(0, 0.05, 20):
            ok &= abs(channel_gain(chan, x + period) - channel_gain(chan, x)) <= 1e-9
    check("two-path gain periodicity", ok)

    # power-update trace monotone, ratio fixed point, bound dominance
    mono, fixed, dominated = True, True, True
    scenario = cfg.scenario()
    grid = GridSpec.uniform(scenario.users[0].region_length, 100)
    from .errors import Infeasible
    for seed in range(20):
        chan = sample_channels(scenario, 100 + seed)[0]
        try:
            sol = exhaustive_search(chan, scenario, 100, 1e-9)
        except Infeasible:
            continue
        effs = [t[2] for t in sol.dinkelbach_trace]
        mono &= all(b >= a - 1e-12 for a, b in zip(effs, effs[1:]))
        fixed &= abs(effs[-1] - sol.energy_efficiency) <= 1e-9
        bound = ee_upper_bound(chan, scenario, sol.power, grid)
        dominated &= sol.energy_efficiency <= bound * (1 + 1e-9)
    check("power-update trace monotone", mono)
    check("ratio equals efficiency at the fixed point", fixed)
    check("search never beats the analytic bound", dominated)

    # bilinear product bounds
    ok = True
    for _ in range(200):
        a_i, b_i = rng.uniform(0.01, 10, 2)
        a, b = rng.uniform(0.001, 20, 2)
        ok &= a * b <= bilinear_upper_bound(a, b, a_i, b_i) + 1e-9
        ok &= a * b >= bilinear_lower_bound(a, b, a_i, b_i) - 1e-9
    check("bilinear product bounds hold", ok)

    # quadratic surrogate sandwich and curvature domination
    ok = True
    from .channel import ChannelRealization, PathGeometry
    for _ in range(5):
        g = rng.standard_normal((4, 6)) + 1j * rng.standard_normal((4, 6))
        chan = ChannelRealization(
            g, PathGeometry.from_virtual_aods(rng.uniform(-1, 1, 4)), 0.01)
        w = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        m = pair_matrix(chan, w, 0.5)
        aods = chan.geometry.virtual_aod
        eps = curvature_bound(m, aods, 0.01)
        x_i = 0.004
        h0 = h_jk_value(m, aods, x_i, 0.01)
        d0 = h_jk_derivative(m, aods, x_i, 0.01)
        for x in np.linspace(0, 0.01, 100):
            val = h_jk_value(m, aods, x, 0.01)
            dx = x - x_i
            lo = h0 + d0 * dx - 0.5 * eps * dx * dx
            hi = h0 + d0 * dx + 0.5 * eps * dx * dx
            ok &= lo <= val + 1e-9 and val <= hi + 1e-9
    check("position surrogates sandwich the received power", ok)

    # small multi-user run: monotone and convergent
    cfg4 = ExperimentConfig(num_users=2, num_paths=3, num_bs_antennas=8)
    scenario4 = cfg4.scenario()
    try:
        res = algorithm2(scenario4, sample_channels(scenario4, 3), 1e-6)
        tr = np.array(res.min_ee_trace)
        check("alternating optimizer monotone and converged",
              res.converged and np.all(np.diff(tr) >= -1e-6),
              f"{res.iterations} iterations")
    except Infeasible:
        check("alternating optimizer monotone and converged", False,
              "selftest instance infeasible")

    if all(results):
        print(f"selftest: {len(results)}/{len(results)} checks passed")
        return 0
    print(f"selftest: {sum(results)}/{len(results)} checks passed", file=sys.stderr)
    return 1


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    return _cmd_selftest()


if __name__ == "__main__":
    sys.exit(main())
