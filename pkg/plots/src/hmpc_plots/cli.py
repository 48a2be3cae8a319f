"""Command line for rendering figures from harmonic-mpc output files."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import plot_period_sweep, plot_timeseries, plot_trajectory
from .io import SchemaError


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="harmonic-mpc-plots",
                                     description="render figures from run logs")
    sub = parser.add_subparsers(dest="command", required=True)

    p_traj = sub.add_parser("trajectory", help="position-plane trajectory figure")
    p_traj.add_argument("log_csv")
    p_traj.add_argument("summary_json")
    p_traj.add_argument("--out", required=True)
    p_traj.add_argument("--snapshot-t", type=int, default=None)

    p_ts = sub.add_parser("timeseries", help="per-axis time series figure")
    p_ts.add_argument("log_csv")
    p_ts.add_argument("summary_json")
    p_ts.add_argument("--out", required=True)
    p_ts.add_argument("--axis", type=int, default=0)
    p_ts.add_argument("--snapshot-t", type=int, default=None)

    p_sweep = sub.add_parser("sweep", help="time-per-iteration vs period figure")
    p_sweep.add_argument("sweep_csv")
    p_sweep.add_argument("--out", required=True)

    args = parser.parse_args(argv)
    try:
        if args.command == "trajectory":
            out = plot_trajectory(args.log_csv, args.summary_json, args.out,
                                  snapshot_t=args.snapshot_t)
        elif args.command == "timeseries":
            out = plot_timeseries(args.log_csv, args.summary_json, args.out,
                                  axis=args.axis, snapshot_t=args.snapshot_t)
        else:
            out = plot_period_sweep(args.sweep_csv, args.out)
    except (SchemaError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {Path(out)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
