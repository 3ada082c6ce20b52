"""Sweep the per-step factor c = eta * ||g||^2 and record how the monitor reacts.

For each c a fixed-direction probe is run under fixed-rate GD (per-step
spectral radius |1 - c| along g), and a persistently exciting NGD run is made
with mu = c. The table shows when the window condition first fires, whether
the run diverged, and the final weight norm.

    python scripts/stability_sweep.py --out sweep.csv
"""

import argparse
import csv
import sys

import numpy as np

from iplna import ExperimentConfig, MonitorConfig, run_experiment


def sweep(factors, steps, window, seed):
    rows = []
    for c in factors:
        probe = run_experiment(
            ExperimentConfig(
                arch_spec="honu:order=1,dim=4,bias=0",
                learner_spec="gd:mu=1",
                data_source=f"synth:probe:dir=1;1;0;0,target={c!r}",
                steps=steps,
                seed=seed,
                monitor=MonitorConfig(window_p=window, norm_kind="spectral"),
            )
        )
        ngd = run_experiment(
            ExperimentConfig(
                arch_spec="honu:order=1,dim=4,bias=0",
                learner_spec=f"ngd:mu={c!r},eps=1e-8",
                data_source="synth:linear:noise=0.05",
                steps=steps,
                seed=seed,
                monitor=MonitorConfig(window_p=window, norm_kind="spectral"),
            )
        )
        rows.append(
            {
                "c": c,
                "rho": abs(1 - c),
                "probe_status": probe.status,
                "probe_first_alarm": probe.first_alarm_k,
                "probe_steps": probe.steps_run,
                "ngd_status": ngd.status,
                "ngd_alarms": ngd.alarms_count,
                "ngd_rms": ngd.final_error_rms,
                "ngd_w_norm": ngd.final_w_norm,
            }
        )
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cmin", type=float, default=0.25)
    ap.add_argument("--cmax", type=float, default=2.75)
    ap.add_argument("--num", type=int, default=11)
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--window", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", help="CSV path (default: stdout)")
    args = ap.parse_args(argv)

    rows = sweep(np.linspace(args.cmin, args.cmax, args.num).tolist(), args.steps, args.window, args.seed)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if args.out:
            fh.close()


if __name__ == "__main__":
    main()
