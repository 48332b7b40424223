"""Command-line entry point.

    backlashcert <subcommand> --config scenario.json [--out DIR] [--seed N]
                 [--steps-per-period N] [--lambda L] [--json-only]

Subcommands: ``simulate``, ``pair``, ``tube``, ``stationary``, ``certify``,
``all``. ``--config`` also accepts ``builtin:desk2d``. Exit status is 0 on
success, 2 for a malformed scenario, 3 when a theorem hypothesis fails and 4
on numerical failure.
"""

import argparse
import json
import os
import sys

from . import scenario as scenario_mod
from .errors import ConfigError, DomainError, HypothesisError, NumericalError
from .pipeline import build_report

SECTIONS = {
    "simulate": (),
    "pair": ("measured_exponent",),
    "tube": ("localization",),
    "stationary": ("stationarity",),
    "certify": ("rate",),
    "all": ("localization", "stationarity", "rate", "measured_exponent"),
}
EXIT_CONFIG, EXIT_HYPOTHESIS, EXIT_NUMERICAL = 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def make_parser():
    parser = _Parser(prog="backlashcert", description="Simulate and certify periodically forced systems with backlash.")
    parser.add_argument("command", choices=sorted(SECTIONS))
    parser.add_argument("--config", required=True, help="scenario JSON file, or builtin:<name>")
    parser.add_argument("--out", default="out", help="output directory (default: ./out)")
    parser.add_argument("--seed", type=int, default=None, help="override the scenario seed (unsigned 64-bit)")
    parser.add_argument("--steps-per-period", type=int, default=None, dest="steps_per_period")
    parser.add_argument("--lambda", type=float, default=None, dest="lam", help="certificate rate, 0 < lambda < |mu|")
    parser.add_argument("--json-only", action="store_true", help="print the report JSON instead of the summary")
    return parser


def _load(args):
    if args.config.startswith("builtin:"):
        scen = scenario_mod.builtin(args.config.split(":", 1)[1])
    else:
        scen = scenario_mod.load(args.config)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        raise ConfigError("must be an unsigned 64-bit integer", "--seed")
    return scen.with_overrides(args.seed, args.steps_per_period, args.lam)


def _write_json(path, data):
    with open(path, "w") as fh:
        json.dump(data, fh, sort_keys=True, indent=2)
        fh.write("\n")


def summary(report):
    lines = [f"scenario {report['scenario']['name']}  mu = {report['scenario']['mu']:.6g}"]
    loc = report.get("localization")
    if loc:
        tc = loc["tube_check"]
        lines.append(f"tube: d = {loc['d']:.6g}  D_CF = {loc['D_CF']:.6g}  max violation = {tc['max_violation']:.3e}"
                     f"  ({'pass' if tc['passed'] else 'FAIL'})")
    st = report.get("stationarity")
    if st:
        ic, em = st["initial_condition"], st["emptiness"]
        lines.append(f"stationary: z0 member = {ic['member']} (margin {ic['margin']:.3e});  R(T) {em['status']}")
    rate = report.get("rate")
    if rate:
        lines.append(f"certificate: lambda = {rate['lam']:.6g}  alpha = {rate['alpha']:.6g}  beta = {rate['beta']:.6g}"
                     f"  psi(0) = {rate['psi0']:.6g}  [{rate['note']}]")
        lines.append(f"theta = {rate['theta']:.6g}  verdict: {'exponentially stable' if rate['verdict'] else 'inconclusive'}")
    me = report.get("measured_exponent")
    if me:
        lines.append(f"measured exponent = {me['slope']}  within bound: {me['within_bound']}  "
                     f"Gronwall ratio max = {me['gronwall_max_ratio']:.6g}")
    return "\n".join(lines)


def run(argv=None):
    args = make_parser().parse_args(argv)
    try:
        scen = _load(args)
        os.makedirs(args.out, exist_ok=True)
        report, ctx = build_report(scen, SECTIONS[args.command], command=args.command,
                                   use_toggles=args.command == "all")
        if args.command in ("simulate", "all"):
            ctx.trajectory.to_csv(os.path.join(args.out, "trajectory.csv"))
        if args.command in ("certify", "all") and report["rate"] is not None:
            ctx.orbit.to_csv(os.path.join(args.out, "orbit.csv"))
        if args.command == "pair" and scen.pair is None:
            raise ConfigError("the pair subcommand needs a 'pair' section", "pair")
        if ctx.pair is not None:
            ctx.pair.to_csv(os.path.join(args.out, "pair.csv"))
        _write_json(os.path.join(args.out, "report.json"), report)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HypothesisError as exc:
        print(f"hypothesis violated: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except DomainError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.json_only:
        print(json.dumps(report, sort_keys=True, indent=2))
    else:
        print(summary(report))
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
