"""Command line entry point: ``iplna run`` and ``iplna gen``."""

from __future__ import annotations

import argparse
import json
import sys

from .architectures import parse_arch
from .errors import ConfigError, DataError
from .harness import EXIT_USAGE, ExperimentConfig, generate, parse_synth, run_experiment, write_csv
from .monitor import MonitorConfig


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="iplna", description="Online learning of in-parameter-linear models with stability monitoring.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="train a model on a data stream and log stability reports")
    run.add_argument("--arch", required=True, help="honu:order=<r>,dim=<n>[,bias=<0|1>] or rvfl:dim=<n>,hidden=<h>,act=<tanh|logistic>[,direct=<0|1>],seed=<u64>")
    run.add_argument("--learner", required=True, help="gd:mu=..., ngd:mu=...,eps=..., rls:mu=...,delta=..., adam:mu=...,beta1=...,beta2=...,eps=...[,mode=...]")
    run.add_argument("--data", required=True, help="CSV path or synth:<spec>")
    run.add_argument("--steps", type=int, required=True)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--window", type=int, default=50, help="sliding window length p")
    run.add_argument("--stride", type=int, default=1, help="evaluate the window product every s steps")
    run.add_argument("--norm", choices=("frob", "spec"), default="frob")
    run.add_argument("--margin", type=float, default=0.05, help="alarm threshold is 1 + margin")
    run.add_argument("--init", choices=("zeros", "uniform"), default="zeros")
    run.add_argument("--out", required=True, help="JSON-lines report path")

    gen = sub.add_parser("gen", help="write a synthetic data set as CSV")
    gen.add_argument("--synth", required=True)
    gen.add_argument("--arch", help="feature map for linear and probe plants")
    gen.add_argument("--steps", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    return parser


def _run(args) -> int:
    cfg = ExperimentConfig(
        arch_spec=args.arch,
        learner_spec=args.learner,
        data_source=args.data,
        steps=args.steps,
        seed=args.seed,
        output_path=args.out,
        monitor=MonitorConfig(
            window_p=args.window,
            eval_stride=args.stride,
            norm_kind="frobenius" if args.norm == "frob" else "spectral",
            alarm_threshold=1.0 + args.margin,
        ),
        init=args.init,
    )
    summary = run_experiment(cfg)
    print(json.dumps(summary.to_dict()))
    return summary.exit_code


def _gen(args) -> int:
    if args.steps < 1:
        raise ConfigError("steps must be >= 1")
    spec = parse_synth(args.synth)
    fmap = parse_arch(args.arch) if args.arch else None
    count = write_csv(args.out, generate(spec, args.seed, args.steps, fmap))
    print(json.dumps({"rows": count, "out": args.out}))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args) if args.command == "run" else _gen(args)
    except (ConfigError, DataError, OSError) as exc:
        print(f"iplna: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
