"""Command-line entry point.

One subcommand per scenario; flags override a JSON config file when both are
given.  Exit codes: 0 all gates pass, 1 gate failure, 2 configuration
error.
"""

import argparse
import json
import sys

from .experiments import SCENARIOS, ScenarioConfig, run_scenario
from .errors import ParameterError


def _add_common(p):
    p.add_argument("--config", type=str, default=None,
                   help="JSON file mirroring the scenario config")
    p.add_argument("--k", type=float, default=None)
    p.add_argument("--K", dest="K", type=float, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--nx", type=int, default=None)
    p.add_argument("--ny", type=int, default=None)
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", type=str, default=None)
    p.add_argument("--tbar", type=float, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--k-test", dest="k_test", type=float, default=None)


def build_config(args) -> ScenarioConfig:
    base = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            base = json.load(fh)
        if not isinstance(base, dict):
            raise ParameterError("config file must hold a JSON object")
    base.setdefault("scenario", args.scenario)
    if base["scenario"] != args.scenario:
        raise ParameterError(
            f"config scenario {base['scenario']!r} does not match "
            f"subcommand {args.scenario!r}")
    for key in ("k", "K", "eps", "nx", "ny", "depth", "seed", "out",
                "tbar", "samples", "k_test"):
        val = getattr(args, key, None)
        if val is not None:
            base[key] = val
    return ScenarioConfig.from_dict(base)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="branchcd",
        description="Verification laboratory for entropy convexity on a "
                    "branching metric measure space")
    sub = parser.add_subparsers(dest="scenario", required=True)
    for name in SCENARIOS:
        _add_common(sub.add_parser(name))
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
    except (ParameterError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return run_scenario(cfg)


if __name__ == "__main__":
    raise SystemExit(main())
