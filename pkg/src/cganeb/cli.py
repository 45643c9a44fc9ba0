"""Command line entry point: ``grid``, ``run`` and ``simulate``."""

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .harness import builtin_grid, get_experiment, load_spec, run_experiment
from .report import emit_histogram, emit_report
from .screening import MapeSet
from .simulate import simulate_dataset


def parse_replications(text):
    """``K`` means K training sets x K test sets; ``TxS`` sets both explicitly."""
    parts = text.lower().split("x")
    try:
        values = [int(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected K or TxS, got {text!r}") from None
    if len(values) == 1:
        values = values * 2
    if len(values) != 2 or min(values) < 1:
        raise argparse.ArgumentTypeError(f"expected K or TxS with positive integers, got {text!r}")
    return tuple(values)


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def build_parser():
    parser = argparse.ArgumentParser(prog="cganeb", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("grid", help="list the built-in experiments")

    run = sub.add_parser("run", help="run one experiment or the whole grid")
    run.add_argument("--experiment", default=None, help="experiment id or 'all'")
    run.add_argument("--config", type=Path, help="JSON or TOML experiment spec")
    run.add_argument("--out", type=Path, default=Path("results"))
    run.add_argument("--seed", type=int, default=None, help="master seed")
    run.add_argument("--replications-override", type=parse_replications, metavar="K|TxS")
    run.add_argument("--epochs", type=int, default=None)
    run.add_argument("--m-samples", type=int, default=None)
    run.add_argument("--parallel", type=_positive_int, default=1)
    run.add_argument("--mape-set", choices=[m.value for m in MapeSet], default=MapeSet.PROPOSED.value)

    sim = sub.add_parser("simulate", help="simulate a dataset and plot its count histogram")
    sim.add_argument("--experiment", required=True)
    sim.add_argument("--histogram", type=Path, required=True)
    sim.add_argument("--seed", type=int, default=0)
    return parser


def _apply_overrides(spec, args):
    changes = {}
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if args.replications_override is not None:
        changes["n_train_sets"], changes["n_test_sets_per_train"] = args.replications_override
    if args.m_samples is not None:
        changes["m_samples"] = args.m_samples
    if args.epochs is not None:
        changes["cgan_config"] = replace(spec.cgan_config, epochs=args.epochs)
    return replace(spec, **changes)


def _select_specs(args):
    if args.config is not None:
        if args.experiment not in (None, "all"):
            raise SystemExit("--config and --experiment are mutually exclusive")
        return [load_spec(args.config)]
    if args.experiment is None:
        raise SystemExit("run needs --experiment or --config")
    if args.experiment == "all":
        return builtin_grid()
    try:
        return [get_experiment(args.experiment)]
    except KeyError as exc:
        raise SystemExit(str(exc)) from None


def cmd_grid(args):
    print("id\talpha\tbeta0\tn_sites\tform")
    for s in builtin_grid():
        print(f"{s.id}\t{s.alpha}\t{s.beta0}\t{s.n_sites}\t{s.functional_form.value}")
    return 0


def cmd_run(args):
    specs = [_apply_overrides(s, args) for s in _select_specs(args)]
    reports = []
    for spec in specs:
        logging.info("running %s (%d replications)", spec.id, spec.n_replications)
        reports.append(run_experiment(spec, parallel=args.parallel, mape_set=MapeSet(args.mape_set)))
    out = emit_report(reports, args.out)
    print(f"wrote {out}")
    return 1 if any(r.partial for r in reports) else 0


def cmd_simulate(args):
    try:
        spec = get_experiment(args.experiment)
    except KeyError as exc:
        raise SystemExit(str(exc)) from None
    dataset = simulate_dataset(spec.sim_config(args.seed))
    counts = emit_histogram(dataset, args.histogram)
    print(f"wrote {args.histogram} ({int(counts.sum())} sites, max count {counts.size - 1})")
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handler = {"grid": cmd_grid, "run": cmd_run, "simulate": cmd_simulate}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
