"""Run every learner on the same realisable plant and tabulate the outcome.

Each learner sees an identical sample stream (same seed). Per run the JSON-lines
log is written to ``--logdir`` so trajectories can be plotted elsewhere.

    python scripts/compare_learners.py --arch honu:order=2,dim=3 --steps 3000
"""

import argparse
import json
from pathlib import Path

from iplna import ExperimentConfig, MonitorConfig, run_experiment

LEARNERS = {
    "gd": "gd:mu=0.05",
    "ngd": "ngd:mu=1.0,eps=1e-8",
    "rls": "rls:mu=0.99,delta=100",
    "adam": "adam:mu=0.005,beta1=0.9,beta2=0.999,eps=1e-8",
    "adam-elementwise": "adam:mu=0.005,beta1=0.9,beta2=0.999,eps=1e-8,mode=elementwise",
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--arch", default="honu:order=2,dim=3")
    ap.add_argument("--data", default="synth:linear:noise=0.01")
    ap.add_argument("--steps", type=int, default=3000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--window", type=int, default=50)
    ap.add_argument("--norm", choices=("frobenius", "spectral"), default="spectral")
    ap.add_argument("--logdir", default="runs")
    args = ap.parse_args(argv)

    logdir = Path(args.logdir)
    logdir.mkdir(parents=True, exist_ok=True)
    print(f"{'learner':<18}{'status':<10}{'rms(last 10%)':>15}{'||w||':>10}{'alarms':>8}{'bibs':>12}")
    for name, spec in LEARNERS.items():
        summary = run_experiment(
            ExperimentConfig(
                arch_spec=args.arch,
                learner_spec=spec,
                data_source=args.data,
                steps=args.steps,
                seed=args.seed,
                output_path=str(logdir / f"{name}.jsonl"),
                monitor=MonitorConfig(window_p=args.window, norm_kind=args.norm),
            )
        )
        bibs = "-" if summary.bibs_bound_final is None else f"{summary.bibs_bound_final:.3g}"
        rms = "-" if summary.final_error_rms is None else f"{summary.final_error_rms:.3e}"
        print(f"{name:<18}{summary.status:<10}{rms:>15}{summary.final_w_norm:>10.4f}{summary.alarms_count:>8}{bibs:>12}")
        (logdir / f"{name}.summary.json").write_text(json.dumps(summary.to_dict(), indent=2) + "\n")


if __name__ == "__main__":
    main()
