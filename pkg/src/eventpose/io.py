"""File formats: events, model clouds, trajectories, and poses."""

from __future__ import annotations

import numpy as np

from .events import EVENT_DTYPE, make_events
from .features import ModelCloud
from .geometry import Pose, quat_to_rotation, rotation_to_quat
from .tracker import TrackedPose


def read_events_text(path) -> np.ndarray:
    """Read `t_us x y p` lines; file polarity 0/1 maps to -1/+1."""
    data = np.loadtxt(path, dtype=np.int64, ndmin=2)
    if data.size == 0:
        return np.empty(0, dtype=EVENT_DTYPE)
    if data.shape[1] != 4:
        raise ValueError(f"expected 4 columns, found {data.shape[1]}")
    p = data[:, 3]
    if not np.all(np.isin(p, (0, 1))):
        raise ValueError("text polarity must be 0 or 1")
    return make_events(data[:, 0], data[:, 1], data[:, 2],
                       np.where(p == 1, 1, -1).astype(np.int8))


def write_events_text(path, events: np.ndarray) -> None:
    with open(path, "w") as fh:
        for e in events:
            p = 1 if e["p"] > 0 else 0
            fh.write(f"{int(e['t'])} {int(e['x'])} {int(e['y'])} {p}\n")


def read_events_binary(path) -> np.ndarray:
    """Packed little-endian records: u64 t_us, u16 x, u16 y, i8 p."""
    raw = np.fromfile(path, dtype=EVENT_DTYPE)
    if len(raw) > 1 and np.any(np.diff(raw["t"].astype(np.int64)) < 0):
        raise ValueError("event timestamps must be non-decreasing")
    if len(raw) and not np.all(np.isin(raw["p"], (-1, 1))):
        raise ValueError("binary polarity must be -1 or +1")
    return raw


def write_events_binary(path, events: np.ndarray) -> None:
    np.ascontiguousarray(events, dtype=EVENT_DTYPE).tofile(path)


def read_events(path) -> np.ndarray:
    """Dispatch on extension: .bin is binary, everything else is text."""
    if str(path).endswith(".bin"):
        return read_events_binary(path)
    return read_events_text(path)


def write_events(path, events: np.ndarray) -> None:
    if str(path).endswith(".bin"):
        write_events_binary(path, events)
    else:
        write_events_text(path, events)


def read_cloud_xyz(path) -> ModelCloud:
    """Plain `x y z` lines in meters."""
    pts = np.loadtxt(path, dtype=float, ndmin=2)
    if pts.size == 0 or pts.shape[1] != 3:
        raise ValueError("cloud file must hold three columns")
    return ModelCloud(pts, str(path))


def write_cloud_xyz(path, cloud: ModelCloud) -> None:
    with open(path, "w") as fh:
        for x, y, z in cloud.points:
            fh.write(f"{x:.9f} {y:.9f} {z:.9f}\n")


def read_cloud_ply(path) -> ModelCloud:
    """ASCII PLY, vertex element only; non-vertex elements are skipped."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh]
    if not lines or lines[0] != "ply":
        raise ValueError("not a ply file")
    n_vertex = None
    props = []
    elements = []     # (name, count) in header order
    i = 1
    while i < len(lines):
        ln = lines[i]
        i += 1
        if ln == "end_header":
            break
        parts = ln.split()
        if not parts:
            continue
        if parts[0] == "format" and parts[1] != "ascii":
            raise ValueError("only ascii ply is supported")
        if parts[0] == "element":
            elements.append((parts[1], int(parts[2])))
            if parts[1] == "vertex":
                n_vertex = int(parts[2])
        elif parts[0] == "property" and elements and elements[-1][0] == "vertex":
            props.append(parts[-1])
    else:
        raise ValueError("missing end_header")
    if n_vertex is None:
        raise ValueError("no vertex element")
    try:
        cols = [props.index(axis) for axis in ("x", "y", "z")]
    except ValueError:
        raise ValueError("vertex element lacks x/y/z properties") from None
    pts = []
    row = i
    for name, count in elements:
        if name == "vertex":
            for ln in lines[row:row + count]:
                vals = ln.split()
                pts.append([float(vals[c]) for c in cols])
        row += count
    if len(pts) != n_vertex:
        raise ValueError("vertex count does not match header")
    return ModelCloud(np.asarray(pts), str(path))


def read_cloud(path) -> ModelCloud:
    if str(path).endswith(".ply"):
        return read_cloud_ply(path)
    return read_cloud_xyz(path)


def write_trajectory(path, rows) -> None:
    """`t_us` + row-major 3x4 pose + status, match count, cost per line."""
    with open(path, "w") as fh:
        for row in rows:
            m = np.hstack([row.pose.rotation,
                           row.pose.translation[:, None]]).reshape(-1)
            nums = " ".join(f"{v:.9f}" for v in m)
            fh.write(f"{int(row.t)} {nums} {row.status} "
                     f"{int(row.n_matches)} {row.final_cost:.6f}\n")


def read_trajectory(path) -> list[TrackedPose]:
    rows = []
    with open(path) as fh:
        for ln in fh:
            parts = ln.split()
            if not parts:
                continue
            if len(parts) != 16:
                raise ValueError(f"expected 16 fields, found {len(parts)}")
            m = np.array([float(v) for v in parts[1:13]]).reshape(3, 4)
            # text precision leaves the matrix slightly non-orthonormal;
            # snap it back through the quaternion form
            rot = quat_to_rotation(rotation_to_quat(m[:, :3]))
            rows.append(TrackedPose(int(parts[0]),
                                    Pose(rot, m[:, 3]),
                                    int(parts[14]), float(parts[15]),
                                    parts[13]))
    return rows


def read_keyframes(path) -> list:
    """`t_us qw qx qy qz tx ty tz` lines into (time, Pose) pairs."""
    out = []
    with open(path) as fh:
        for ln in fh:
            parts = ln.split()
            if not parts or parts[0].startswith("#"):
                continue
            if len(parts) != 8:
                raise ValueError(f"expected 8 fields, found {len(parts)}")
            vals = [float(v) for v in parts]
            pose = Pose(quat_to_rotation(vals[1:5]), np.array(vals[5:8]))
            out.append((int(parts[0]), pose))
    return out


def write_keyframes(path, keyframes) -> None:
    with open(path, "w") as fh:
        for t, pose in keyframes:
            q = rotation_to_quat(pose.rotation)
            tr = pose.translation
            fh.write(f"{int(t)} {q[0]:.9f} {q[1]:.9f} {q[2]:.9f} {q[3]:.9f} "
                     f"{tr[0]:.9f} {tr[1]:.9f} {tr[2]:.9f}\n")


def read_pose(path) -> Pose:
    """Single `qw qx qy qz tx ty tz` line."""
    with open(path) as fh:
        parts = fh.read().split()
    if len(parts) != 7:
        raise ValueError(f"expected 7 fields, found {len(parts)}")
    vals = [float(v) for v in parts]
    return Pose(quat_to_rotation(vals[:4]), np.array(vals[4:7]))


def write_pose(path, pose: Pose) -> None:
    q = rotation_to_quat(pose.rotation)
    t = pose.translation
    with open(path, "w") as fh:
        fh.write(f"{q[0]:.9f} {q[1]:.9f} {q[2]:.9f} {q[3]:.9f} "
                 f"{t[0]:.9f} {t[1]:.9f} {t[2]:.9f}\n")
