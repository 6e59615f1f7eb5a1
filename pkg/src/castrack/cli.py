"""Command-line front end.

Exit codes: 0 success, 2 usage, 3 configuration, 4 scenario rejected,
5 size guard, 6 detection fit, 7 other parameter-domain error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import export
from .config import config_to_dict, default_config, dump_config, load_config
from .errors import (
    ConfigError,
    FitError,
    ParameterDomainError,
    ScenarioRejected,
    SizeGuardError,
)
from .harness import monte_carlo, parse_policy, run_episode, timing_sweep
from .sensor import fit_detection_model, read_detection_table
from .world import random_scenario, simulate_truth

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_SCENARIO = 4
EXIT_SIZE = 5
EXIT_FIT = 6
EXIT_DOMAIN = 7

_EXIT_FOR = (
    (ConfigError, EXIT_CONFIG),
    (ScenarioRejected, EXIT_SCENARIO),
    (SizeGuardError, EXIT_SIZE),
    (FitError, EXIT_FIT),
    (ParameterDomainError, EXIT_DOMAIN),
)

log = logging.getLogger("castrack")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _sim(args):
    return load_config(args.config) if args.config else default_config(0)


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    sim = _sim(args)
    policy = parse_policy(args.policy, sim)
    cfg = config_to_dict(sim)
    episode = run_episode(sim, policy, args.seed)
    truth = simulate_truth(sim.scenario, sim.scenario.duration + 1)
    out = _outdir(args)
    export.write_episode_csv(out / "episode.csv", episode, cfg)
    export.write_truth_csv(out / "truth.csv", truth, args.seed, cfg)
    export.write_json(out / "summary.json", {"policy": policy.name, "summary": episode.summary()}, args.seed, cfg)
    if args.plots:
        from .plots import write_plots

        write_plots(out / "episode.csv", out)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_mc(args) -> int:
    sim = _sim(args)
    names = args.policies.split(",")
    policies = [parse_policy(n.strip(), sim) for n in names if n.strip()]
    n_runs = args.runs if args.runs is not None else sim.monte_carlo.n_runs
    table = monte_carlo(sim, policies, n_runs, args.seed)
    out = _outdir(args)
    export.write_json(out / "comparison.json", table, args.seed, config_to_dict(sim))
    for row in table["rows"]:
        m = row["metrics"]["mean_summed_trace"]
        print(f"{row['policy']:>12}  mean summed trace {m['mean']:.6g} +- {m['std']:.3g}")
    return EXIT_OK


def cmd_timing(args) -> int:
    sim = _sim(args)
    table = timing_sweep(sim, args.horizons, args.targets, args.solves, args.seed)
    out = _outdir(args)
    export.write_json(out / "timing.json", table, args.seed, config_to_dict(sim))
    for c in table["cells"]:
        print(f"N={c['N']:>2} C={c['C']:>2}  {1e3 * c['mean_s']:.2f} ms")
    return EXIT_OK


def cmd_fit(args) -> int:
    model = fit_detection_model(read_detection_table(args.table))
    out = _outdir(args)
    export.write_json(out / "detection_model.json", {"detection": model.to_dict(), "table": str(args.table)},
                      None, None)
    print(json.dumps(model.to_dict()))
    return EXIT_OK


def cmd_gen_scenario(args) -> int:
    scenario = random_scenario(args.seed, n_castaways=args.castaways, duration=args.duration, dt=args.dt)
    sim = default_config(0).with_scenario(scenario)
    out = _outdir(args)
    dump_config(sim, out / "config.json")
    export.write_truth_csv(out / "truth.csv", simulate_truth(scenario, scenario.duration + 1),
                           args.seed, config_to_dict(sim))
    print(f"wrote {out / 'config.json'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="castrack", description="UAV castaway tracking with receding-horizon control")
    p.add_argument("-v", "--verbose", action="store_true", help="log planner and boundary warnings")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed_help="random seed"):
        sp.add_argument("--config", type=Path, help="JSON configuration (defaults if absent)")
        sp.add_argument("--seed", type=int, default=0, help=seed_help)
        sp.add_argument("--out", type=Path, default=Path("out"), help="output directory")

    s = sub.add_parser("simulate", help="run one closed-loop episode")
    common(s, "episode seed")
    s.add_argument("--policy", default="mpc", help="mpc, hover:Z, lawnmower[:Z] or openloop")
    s.add_argument("--plots", action="store_true", help="also write SVG figures")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("mc", help="Monte Carlo comparison of policies")
    common(s, "base seed")
    s.add_argument("--runs", type=int, help="runs per policy (config default otherwise)")
    s.add_argument("--policies", default="mpc,hover,lawnmower", help="comma-separated policies")
    s.set_defaults(func=cmd_mc)

    s = sub.add_parser("timing", help="planner wall time over horizon and target count")
    common(s)
    s.add_argument("--horizons", type=_int_list, default=[3, 5, 7])
    s.add_argument("--targets", type=_int_list, default=[2, 4])
    s.add_argument("--solves", type=int, default=20, help="planner calls per cell")
    s.set_defaults(func=cmd_timing)

    s = sub.add_parser("fit", help="fit the detection model to a recall table")
    s.add_argument("table", type=Path, help="CSV with columns altitude_m, tp, fn")
    s.add_argument("--out", type=Path, default=Path("out"))
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("gen-scenario", help="write a random scenario config and its truth")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", type=Path, default=Path("out"))
    s.add_argument("--castaways", type=int, default=4)
    s.add_argument("--duration", type=int, default=1800, help="steps")
    s.add_argument("--dt", type=float, default=2.0, help="seconds per step")
    s.set_defaults(func=cmd_gen_scenario)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except tuple(cls for cls, _ in _EXIT_FOR) as exc:
        code = next(c for cls, c in _EXIT_FOR if isinstance(exc, cls))
        print(f"castrack: error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
