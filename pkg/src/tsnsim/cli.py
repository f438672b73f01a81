"""Command-line interface: ``tsnsim run|matrix|validate|trace|list``.

Exit codes: 0 success, 1 scenario/configuration error, 2 run failure.
"""

from __future__ import annotations

import argparse
import sys
from contextlib import nullcontext
from pathlib import Path

from .cbs import CreditMode
from .gcl import FpMode
from .model import ConfigError, parse_time
from .runner import RunFailure, run_matrix, run_single
from .scenario import SCALINGS, bundled_names, collect_warnings, parse_scenario, resolve_path

EXIT_OK, EXIT_SCENARIO, EXIT_RUN = 0, 1, 2


def _csv_list(choices):
    def parse(text):
        items = [s.strip() for s in text.split(",") if s.strip()]
        bad = [s for s in items if s not in choices]
        if bad or not items:
            raise argparse.ArgumentTypeError(f"expected a comma list of {', '.join(choices)}")
        return items
    return parse


def _seeds(text):
    """``10`` means seeds 1..10; ``3,7`` and ``2-5`` list them explicitly."""
    try:
        if "," in text:
            return [int(s) for s in text.split(",")]
        if "-" in text:
            a, b = text.split("-")
            return list(range(int(a), int(b) + 1))
        return list(range(1, int(text) + 1))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None


def _duration(text):
    try:
        return parse_time(text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


MODES = [m.value for m in CreditMode]
FPS = [m.value for m in FpMode]


def _common(p, *, single=True):
    p.add_argument("scenario", help="scenario file or bundled scenario name")
    if single:
        p.add_argument("--mode", choices=MODES, help="credit mode (default: scenario's)")
        p.add_argument("--fp", choices=FPS, help="frame preemption mode (default: scenario's)")
        p.add_argument("--seed", type=int, help="random seed (default: scenario's)")
    p.add_argument("--gb", choices=["on", "off"],
                   help="guardband for preemptable classes (only meaningful with without-hr)")
    p.add_argument("--duration", type=_duration,
                   help="simulated time, e.g. 30s, 200ms (default: scenario's)")
    p.add_argument("--scaling", choices=SCALINGS, help="idle-slope scaling rule")
    p.add_argument("--out", type=Path, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tsnsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one configuration and write KPI CSV + summary")
    _common(p)
    p.add_argument("--event-log", type=Path, help="write one line per dispatched event")

    p = sub.add_parser("matrix", help="sweep credit modes x FP modes x seeds")
    _common(p, single=False)
    p.add_argument("--modes", type=_csv_list(MODES), default=MODES)
    p.add_argument("--fps", type=_csv_list(FPS), default=FPS)
    p.add_argument("--seeds", type=_seeds, default=list(range(1, 11)),
                   help="count (1..N), list (1,4,9) or range (2-5); default 10")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")

    p = sub.add_parser("validate", help="parse and check scenarios, print warnings")
    p.add_argument("scenario", nargs="+")

    p = sub.add_parser("trace", help="run once and write the per-port credit trace CSV")
    _common(p)
    p.add_argument("--port", action="append", dest="ports",
                   help="egress port 'A->B' to trace (repeatable; default all)")
    p.add_argument("--interval", type=_duration, default=10_000,
                   help="sampling interval in addition to change points (default 10us)")

    sub.add_parser("list", help="list bundled scenarios")
    return parser


def _config(scenario, args, **extra):
    cfg = scenario.defaults.replace(
        credit_mode=getattr(args, "mode", None), fp_mode=getattr(args, "fp", None),
        seed=getattr(args, "seed", None), duration=args.duration, scaling=args.scaling,
        guardband=None if args.gb is None else args.gb == "on", **extra,
    )
    if not cfg.guardband and cfg.fp_mode is not FpMode.WITHOUT_HR and hasattr(args, "fp"):
        raise ConfigError("--gb off only applies to --fp without-hr")
    return cfg


def _print_summary(summary, out=None):
    out = out or sys.stdout
    print(f"{summary['scenario']}  mode={summary['credit_mode']} fp={summary['fp']} "
          f"gb={'on' if summary['guardband'] else 'off'} seed={summary['seed']}  "
          f"events={summary['events']} delivered={summary['frames_delivered']}", file=out)
    for name, c in summary["classes"].items():
        print(f"  {name:<4} {c['kind']:<3} flows={c['flows']:<3} max SMD={c['max_smd_ns']} ns  "
              f"max SMJ={c['max_smj_ns']} ns", file=out)


def _cmd_run(args, trace_ports=None):
    scenario = parse_scenario(resolve_path(args.scenario))
    config = _config(scenario, args)
    out = args.out or Path("results") / scenario.name
    log_path = getattr(args, "event_log", None)
    with open(log_path, "w") if log_path else nullcontext() as log:
        result = run_single(scenario, config, out, trace_ports=trace_ports,
                            sample_interval=getattr(args, "interval", 10_000), event_log=log)
    _print_summary(result.summary)
    print(f"wrote {out}/")
    return EXIT_OK


def _cmd_trace(args):
    return _cmd_run(args, trace_ports=args.ports or [])


def _cmd_matrix(args):
    scenario = parse_scenario(resolve_path(args.scenario))
    base = _config(scenario, args)
    out = args.out or Path("results") / f"{scenario.name}-matrix"
    results = run_matrix(scenario, args.modes, args.fps, args.seeds, base=base,
                         guardband=base.guardband, jobs=args.jobs, out_dir=out)
    for r in results:
        _print_summary(r.summary)
    print(f"{len(results)} runs; wrote {out}/comparison.csv")
    return EXIT_OK


def _cmd_validate(args):
    status = EXIT_OK
    for name in args.scenario:
        try:
            scenario = parse_scenario(resolve_path(name))
            notes = collect_warnings(scenario)
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            status = EXIT_SCENARIO
            continue
        print(f"{name}: ok ({len(scenario.flows)} flows, {len(scenario.port_keys())} ports, "
              f"{len(notes)} warnings)")
        for note in notes:
            print(f"  warning: {note}")
    return status


def _cmd_list(args):
    for name in bundled_names():
        print(name)
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "matrix": _cmd_matrix, "validate": _cmd_validate,
            "trace": _cmd_trace, "list": _cmd_list}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except RunFailure as exc:
        print(f"run failure: {exc}", file=sys.stderr)
        return EXIT_RUN
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO


if __name__ == "__main__":
    sys.exit(main())
