"""Command-line front end: simulate, track, eval, export-plots.

Exit codes: 0 success, 1 usage error, 2 unreadable or inconsistent data,
3 tracking lost.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import io
from .config import PipelineConfig, dump_config, read_config
from .errors import EventPoseError
from .metrics import evaluate, export_plots
from .simulator import Trajectory, simulate
from .tracker import TrackedPose, track

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_LOST = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    parser = _Parser(prog="eventpose")
    sub = parser.add_subparsers(dest="command")

    sim = sub.add_parser("simulate", help="render events from a trajectory")
    sim.add_argument("--cloud")
    sim.add_argument("--trajectory")
    sim.add_argument("--config")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--out-events")
    sim.add_argument("--out-gt")
    sim.add_argument("--out-labels")
    sim.add_argument("--dump-config", action="store_true")

    trk = sub.add_parser("track", help="track a model through an event file")
    trk.add_argument("--events")
    trk.add_argument("--cloud")
    trk.add_argument("--init-pose")
    trk.add_argument("--config")
    trk.add_argument("--out")
    trk.add_argument("--dump-config", action="store_true")

    ev = sub.add_parser("eval", help="compare a trajectory against reference")
    ev.add_argument("--est", required=True)
    ev.add_argument("--gt", required=True)
    ev.add_argument("--out", required=True)
    ev.add_argument("--csv")

    ex = sub.add_parser("export-plots", help="write overlay data per window")
    ex.add_argument("--events", required=True)
    ex.add_argument("--cloud", required=True)
    ex.add_argument("--est", required=True)
    ex.add_argument("--gt")
    ex.add_argument("--config")
    ex.add_argument("--out-dir", required=True)
    return parser


def _load_config(path) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    return read_config(path)


def _require(args, names):
    missing = [n for n in names if getattr(args, n.replace("-", "_")) is None]
    if missing:
        flags = ", ".join(f"--{n}" for n in missing)
        print(f"error: missing {flags}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _cmd_simulate(args) -> int:
    if args.dump_config:
        sys.stdout.write(dump_config())
        return EXIT_OK
    _require(args, ["cloud", "trajectory", "out-events"])
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg.sim.seed = args.seed
    cloud = io.read_cloud(args.cloud)
    traj = Trajectory.from_keyframes(io.read_keyframes(args.trajectory))
    result = simulate(cloud, traj, cfg.camera, cfg.sim)
    io.write_events(args.out_events, result.events)
    if args.out_gt:
        rows = [TrackedPose(int(t), p, 0, 0.0, "ok")
                for t, p in zip(result.gt_times, result.gt_poses)]
        io.write_trajectory(args.out_gt, rows)
    if args.out_labels:
        np.savetxt(args.out_labels, result.labels, fmt="%d")
    return EXIT_OK


def _cmd_track(args) -> int:
    if args.dump_config:
        sys.stdout.write(dump_config())
        return EXIT_OK
    _require(args, ["events", "cloud", "init-pose", "out"])
    cfg = _load_config(args.config)
    events = io.read_events(args.events)
    cloud = io.read_cloud(args.cloud)
    pose0 = io.read_pose(args.init_pose)
    rows = list(track(events, cloud, pose0, cfg.camera, cfg.tracker))
    io.write_trajectory(args.out, rows)
    if rows and rows[-1].status == "lost":
        return EXIT_LOST
    return EXIT_OK


def _cmd_eval(args) -> int:
    est = io.read_trajectory(args.est)
    ref = io.read_trajectory(args.gt)
    report = evaluate(est, ref)
    with open(args.out, "w") as fh:
        fh.write(report.to_text())
    csv_path = args.csv if args.csv else args.out + ".csv"
    with open(csv_path, "w") as fh:
        fh.write(report.to_csv())
    return EXIT_OK


def _cmd_export(args) -> int:
    cfg = _load_config(args.config)
    events = io.read_events(args.events)
    cloud = io.read_cloud(args.cloud)
    rows = io.read_trajectory(args.est)
    reference = io.read_trajectory(args.gt) if args.gt else None
    export_plots(events, cloud, cfg.camera, rows, cfg.tracker, args.out_dir,
                 reference)
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "track": _cmd_track,
    "eval": _cmd_eval,
    "export-plots": _cmd_export,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except SystemExit as e:
        return int(e.code)
    except (OSError, ValueError, EventPoseError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
