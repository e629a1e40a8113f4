"""Trajectory error metrics and plot-data export."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoOverlap
from .events import guided_filter, iter_windows, time_surface
from .features import detect_corners, extract_boundary, project_cloud, select_uniform
from .geometry import CameraIntrinsics, Pose
from .tracker import TrackerConfig

ALIGN_TOL_US = 50_000


def rotation_error(rot, rot_ref) -> float:
    """Geodesic angle between two rotations, in degrees."""
    c = (np.trace(np.asarray(rot).T @ np.asarray(rot_ref)) - 1.0) / 2.0
    return float(np.degrees(np.arccos(np.clip(c, -1.0, 1.0))))


def translation_error(t, t_ref) -> float:
    """Euclidean distance between translations, in centimeters."""
    return float(np.linalg.norm(np.asarray(t) - np.asarray(t_ref)) * 100.0)


@dataclass(frozen=True)
class EvalReport:
    times: np.ndarray
    rot_deg: np.ndarray
    trans_cm: np.ndarray
    statuses: tuple

    @property
    def mean_rot_deg(self) -> float:
        return float(self.rot_deg.mean())

    @property
    def mean_trans_cm(self) -> float:
        return float(self.trans_cm.mean())

    def to_text(self) -> str:
        lines = [f"windows {len(self.times)}",
                 f"mean_rotation_deg {self.mean_rot_deg:.6f}",
                 f"mean_translation_cm {self.mean_trans_cm:.6f}"]
        counts: dict = {}
        for s in self.statuses:
            counts[s] = counts.get(s, 0) + 1
        for s in sorted(counts):
            lines.append(f"status_{s} {counts[s]}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        lines = ["t_us,rotation_deg,translation_cm,status"]
        for t, r, d, s in zip(self.times, self.rot_deg, self.trans_cm,
                              self.statuses):
            lines.append(f"{int(t)},{r:.6f},{d:.6f},{s}")
        return "\n".join(lines) + "\n"


def evaluate(estimated, reference, max_dt_us: int = ALIGN_TOL_US) -> EvalReport:
    """Per-window pose errors against the nearest reference timestamp.

    Both arguments are trajectory row lists. Rows with no reference within
    max_dt_us are skipped; if none align, NoOverlap is raised.
    """
    if not estimated or not reference:
        raise NoOverlap("empty trajectory")
    ref_t = np.array([r.t for r in reference], dtype=np.int64)
    order = np.argsort(ref_t, kind="stable")
    ref_t = ref_t[order]
    ref_rows = [reference[i] for i in order]
    times, rot, trans, statuses = [], [], [], []
    for row in estimated:
        j = int(np.searchsorted(ref_t, row.t))
        best, best_dt = None, None
        for k in (j - 1, j):
            if 0 <= k < len(ref_t):
                dt = abs(int(ref_t[k]) - row.t)
                if best_dt is None or dt < best_dt:
                    best, best_dt = k, dt
        if best is None or best_dt > max_dt_us:
            continue
        ref = ref_rows[best]
        times.append(row.t)
        rot.append(rotation_error(row.pose.rotation, ref.pose.rotation))
        trans.append(translation_error(row.pose.translation,
                                       ref.pose.translation))
        statuses.append(row.status)
    if not times:
        raise NoOverlap(f"no timestamps align within {max_dt_us} us")
    return EvalReport(np.array(times, dtype=np.int64), np.array(rot),
                      np.array(trans), tuple(statuses))


def export_plots(events, cloud, cam: CameraIntrinsics, rows,
                 cfg: TrackerConfig, out_dir, reference=None) -> dict:
    """Write per-window overlay data as CSV files.

    edges.csv holds the silhouette boundary reprojected at each estimated
    pose, corners.csv the detected corners per window, and (with a
    reference trajectory) ref_edges.csv the boundary at the matched
    reference pose. Returns the path dict.
    """
    import os

    os.makedirs(out_dir, exist_ok=True)
    paths = {"edges": os.path.join(out_dir, "edges.csv"),
             "corners": os.path.join(out_dir, "corners.csv")}
    ref_rows = None
    if reference is not None:
        ref_t = np.array([r.t for r in reference], dtype=np.int64)
        paths["ref_edges"] = os.path.join(out_dir, "ref_edges.csv")
        ref_rows = (ref_t, list(reference))

    by_time = {row.t: row for row in rows}
    edge_lines = ["t_us,x,y,model_index"]
    corner_lines = ["t_us,x,y,response"]
    ref_lines = ["t_us,x,y,model_index"]
    for window in iter_windows(events, cfg.window):
        row = by_time.get(window.t_end)
        if row is None:
            continue
        sp = cfg.surface
        ts = guided_filter(time_surface(window, sp.tau_ms, window.t_end,
                                        cam.width, cam.height),
                           sp.filter_radius, sp.filter_eps)
        for c in select_uniform(detect_corners(ts, cfg.harris),
                                cfg.select.cell, cfg.select.max_corners):
            corner_lines.append(f"{window.t_end},{c.position[0]:.3f},"
                                f"{c.position[1]:.3f},{c.response:.6e}")
        for pose, sink in _poses_for(row, ref_rows, window.t_end):
            try:
                edges = extract_boundary(project_cloud(cloud, pose, cam),
                                         cam.width, cam.height)
            except Exception:
                continue
            target = edge_lines if sink == "est" else ref_lines
            for e in edges:
                target.append(f"{window.t_end},{e.pixel[0]:.0f},"
                              f"{e.pixel[1]:.0f},{e.model_index}")
    with open(paths["edges"], "w") as fh:
        fh.write("\n".join(edge_lines) + "\n")
    with open(paths["corners"], "w") as fh:
        fh.write("\n".join(corner_lines) + "\n")
    if ref_rows is not None:
        with open(paths["ref_edges"], "w") as fh:
            fh.write("\n".join(ref_lines) + "\n")
    return paths


def _poses_for(row, ref_rows, t):
    yield row.pose, "est"
    if ref_rows is None:
        return
    ref_t, rows = ref_rows
    j = int(np.searchsorted(ref_t, t))
    best, best_dt = None, None
    for k in (j - 1, j):
        if 0 <= k < len(ref_t):
            dt = abs(int(ref_t[k]) - t)
            if best_dt is None or dt < best_dt:
                best, best_dt = k, dt
    if best is not None and best_dt <= ALIGN_TOL_US:
        yield rows[best].pose, "ref"
