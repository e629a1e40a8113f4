"""Synthetic event streams from a moving rigid object.

The renderer sweeps a fixed timestep over a keyframe trajectory, draws the
object's silhouette as a blurred log-intensity image, and fires an event
whenever a pixel's change since its last event crosses the contrast
threshold. Every signal event carries the index of its nearest model point,
so downstream association can be scored against ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage as ndi

from .errors import OutOfRange
from .events import EVENT_DTYPE
from .features import ModelCloud
from .geometry import (MIN_DEPTH, Pose, exp_so3, log_so3, project_points,
                       CameraIntrinsics)

# object log-intensity against a zero background
LOG_CONTRAST = 1.0


@dataclass
class SimConfig:
    threshold: float = 0.25
    edge_sigma: float = 1.5
    noise_rate: float = 0.0
    clutter_fraction: float = 0.0
    seed: int = 0
    step_us: int = 100
    closing_iterations: int = 2
    roi_margin: int = 16
    label_radius: int = 6


@dataclass(frozen=True)
class Trajectory:
    """Keyframed object motion; linear in translation, geodesic in rotation."""

    times: np.ndarray
    poses: list

    @staticmethod
    def from_keyframes(keyframes) -> "Trajectory":
        if len(keyframes) < 2:
            raise ValueError("need at least two keyframes")
        times = np.array([int(t) for t, _ in keyframes], dtype=np.int64)
        if np.any(np.diff(times) <= 0):
            raise ValueError("keyframe times must strictly increase")
        return Trajectory(times, [p for _, p in keyframes])


def pose_at(traj: Trajectory, t_us: int) -> Pose:
    """Interpolated pose; exact at keyframes. Raises OutOfRange outside."""
    t = int(t_us)
    times = traj.times
    if t < times[0] or t > times[-1]:
        raise OutOfRange(f"t={t} outside [{times[0]}, {times[-1]}]")
    k = int(np.searchsorted(times, t, side="right")) - 1
    if times[k] == t:
        return traj.poses[k]
    a, b = traj.poses[k], traj.poses[k + 1]
    s = (t - times[k]) / float(times[k + 1] - times[k])
    trans = (1.0 - s) * a.translation + s * b.translation
    w = log_so3(a.rotation.T @ b.rotation)
    return Pose(a.rotation @ exp_so3(s * w), trans)


@dataclass(frozen=True)
class SimResult:
    events: np.ndarray
    labels: np.ndarray
    gt_times: np.ndarray
    gt_poses: list


def _ring_offsets(radius: int):
    dy, dx = np.mgrid[-radius:radius + 1, -radius:radius + 1]
    dy, dx = dy.ravel(), dx.ravel()
    cheb = np.maximum(np.abs(dy), np.abs(dx))
    order = np.lexsort((dx, dy, dy * dy + dx * dx, cheb))
    return dy[order], dx[order]


def simulate(cloud: ModelCloud, traj: Trajectory, cam: CameraIntrinsics,
             cfg: SimConfig) -> SimResult:
    """Render the trajectory into a labeled, time-sorted event stream."""
    if not 0.0 < cfg.threshold:
        raise ValueError("threshold must be positive")
    if not 0.0 <= cfg.clutter_fraction < 1.0:
        raise ValueError("clutter_fraction must lie in [0, 1)")
    rng = np.random.default_rng(cfg.seed)
    h, w = cam.height, cam.width
    ref = np.zeros((h, w))
    step_times = np.arange(int(traj.times[0]), int(traj.times[-1]) + 1,
                           cfg.step_us, dtype=np.int64)
    off_y, off_x = _ring_offsets(cfg.label_radius)
    struct = np.ones((3, 3), dtype=bool)
    margin = cfg.roi_margin
    pad = cfg.label_radius

    ev_t, ev_x, ev_y, ev_p, ev_label = [], [], [], [], []
    gt_poses = []
    for t in step_times:
        pose = pose_at(traj, int(t))
        gt_poses.append(pose)
        pixels, depths = project_points(cam, pose, cloud.points)
        ok = depths > MIN_DEPTH
        cols = np.rint(pixels[ok, 0]).astype(np.int64)
        rows = np.rint(pixels[ok, 1]).astype(np.int64)
        in_frame = (cols >= 0) & (cols < w) & (rows >= 0) & (rows < h)
        if not in_frame.any():
            continue
        cols, rows = cols[in_frame], rows[in_frame]
        model_idx = np.nonzero(ok)[0][in_frame]
        r0 = max(int(rows.min()) - margin, 0)
        r1 = min(int(rows.max()) + margin + 1, h)
        c0 = max(int(cols.min()) - margin, 0)
        c1 = min(int(cols.max()) + margin + 1, w)
        lr, lc = rows - r0, cols - c0
        roi_h, roi_w = r1 - r0, c1 - c0

        occ = np.zeros((roi_h, roi_w), dtype=bool)
        occ[lr, lc] = True
        solid = ndi.binary_closing(occ, structure=struct,
                                   iterations=cfg.closing_iterations) | occ
        lum = LOG_CONTRAST * ndi.gaussian_filter(solid.astype(np.float64),
                                                 cfg.edge_sigma,
                                                 mode="constant")
        if t == step_times[0]:
            # the sensor's references already hold the scene when recording
            # starts, so the first frame is absorbed silently
            ref[r0:r1, c0:c1] = lum
            continue
        diff = lum - ref[r0:r1, c0:c1]
        n_cross = np.floor(np.abs(diff) / cfg.threshold).astype(np.int64)
        iy, ix = np.nonzero(n_cross)
        if len(iy) == 0:
            continue
        counts = n_cross[iy, ix]
        pol = np.where(diff[iy, ix] > 0, 1, -1).astype(np.int8)
        # the reference resets in threshold quanta, not to the exact level
        ref[r0:r1, c0:c1][iy, ix] += pol * counts * cfg.threshold

        idx_map = np.full((roi_h + 2 * pad, roi_w + 2 * pad), -1,
                          dtype=np.int64)
        flat = lr * roi_w + lc
        _, first = np.unique(flat, return_index=True)
        idx_map[lr[first] + pad, lc[first] + pad] = model_idx[first]
        cand = idx_map[iy[None, :] + pad + off_y[:, None],
                       ix[None, :] + pad + off_x[:, None]]
        hit = cand >= 0
        first_hit = np.argmax(hit, axis=0)
        labels = np.where(hit.any(axis=0),
                          cand[first_hit, np.arange(len(iy))], -1)

        ev_t.append(np.repeat(np.full(len(iy), t, dtype=np.int64), counts))
        ev_x.append(np.repeat(ix + c0, counts))
        ev_y.append(np.repeat(iy + r0, counts))
        ev_p.append(np.repeat(pol, counts))
        ev_label.append(np.repeat(labels, counts))

    if ev_t:
        t_all = np.concatenate(ev_t)
        x_all = np.concatenate(ev_x)
        y_all = np.concatenate(ev_y)
        p_all = np.concatenate(ev_p)
        l_all = np.concatenate(ev_label)
    else:
        t_all = np.empty(0, dtype=np.int64)
        x_all = np.empty(0, dtype=np.int64)
        y_all = np.empty(0, dtype=np.int64)
        p_all = np.empty(0, dtype=np.int8)
        l_all = np.empty(0, dtype=np.int64)

    t0, t1 = int(traj.times[0]), int(traj.times[-1])
    duration_s = (t1 - t0) / 1e6
    n_noise = int(rng.poisson(cfg.noise_rate * h * w * duration_s))
    n_signal = len(t_all)
    f = cfg.clutter_fraction
    n_clutter = int(round(f / (1.0 - f) * n_signal)) if f > 0 else 0
    extra = n_noise + n_clutter
    if extra:
        t_all = np.concatenate([t_all, rng.integers(t0, t1 + 1, extra)])
        x_all = np.concatenate([x_all, rng.integers(0, w, extra)])
        y_all = np.concatenate([y_all, rng.integers(0, h, extra)])
        p_all = np.concatenate([p_all,
                                rng.choice(np.array([-1, 1], dtype=np.int8),
                                           extra)])
        l_all = np.concatenate([l_all, np.full(extra, -1, dtype=np.int64)])

    order = np.lexsort((x_all, y_all, t_all))
    events = np.empty(len(t_all), dtype=EVENT_DTYPE)
    events["t"] = t_all[order]
    events["x"] = x_all[order]
    events["y"] = y_all[order]
    events["p"] = p_all[order]
    return SimResult(events, l_all[order].astype(np.int64),
                     step_times.copy(), gt_poses)


def drop_time_range(events: np.ndarray, labels: np.ndarray,
                    t0_us: int, t1_us: int, signal_only: bool = True):
    """Remove events in [t0, t1), mimicking an occluder over the object."""
    t = events["t"].astype(np.int64)
    inside = (t >= t0_us) & (t < t1_us)
    if signal_only:
        inside &= labels >= 0
    keep = ~inside
    return events[keep], labels[keep]


def point_track_events(start, u, times_ms, seed: int = 0, t0_us: int = 0,
                       jitter_px: int = 0, clutter_fraction: float = 0.0,
                       clutter_radius: float = 7.0,
                       clutter_margin: float = 2.5):
    """Events shed by a single point feature moving at constant velocity.

    One event per entry of times_ms (relative to t0_us), at the rounded
    track position start + u * tau, with optional integer jitter. Clutter is
    sprinkled uniformly over the surrounding box but kept clutter_margin
    away from the track so it stays genuinely off-feature. Returns a sorted
    structured array and a boolean clutter mask.
    """
    rng = np.random.default_rng(seed)
    start = np.asarray(start, dtype=float)
    u = np.asarray(u, dtype=float)
    times_ms = np.asarray(times_ms, dtype=float)
    pos = start + np.outer(times_ms, u)
    if jitter_px > 0:
        pos = pos + rng.integers(-jitter_px, jitter_px + 1, pos.shape)
    xy = np.rint(pos).astype(np.int64)
    t_us = t0_us + np.rint(times_ms * 1000.0).astype(np.int64)
    pol = rng.choice(np.array([-1, 1], dtype=np.int8), len(times_ms))
    clutter = np.zeros(len(times_ms), dtype=bool)

    f = clutter_fraction
    if f > 0:
        n_clutter = int(round(f / (1.0 - f) * len(times_ms)))
        lo = np.floor(pos.min(axis=0)) - clutter_radius
        hi = np.ceil(pos.max(axis=0)) + clutter_radius
        c_xy = np.empty((n_clutter, 2), dtype=np.int64)
        c_t = rng.uniform(times_ms.min(), times_ms.max(), n_clutter)
        for i in range(n_clutter):
            while True:
                p = rng.integers(lo.astype(np.int64), hi.astype(np.int64) + 1)
                track = start + u * c_t[i]
                if np.linalg.norm(p - track) >= clutter_margin:
                    c_xy[i] = p
                    break
        xy = np.vstack([xy, c_xy])
        t_us = np.concatenate([t_us,
                               t0_us + np.rint(c_t * 1000.0).astype(np.int64)])
        pol = np.concatenate([pol, rng.choice(np.array([-1, 1], dtype=np.int8),
                                              n_clutter)])
        clutter = np.concatenate([clutter, np.ones(n_clutter, dtype=bool)])

    order = np.lexsort((xy[:, 0], xy[:, 1], t_us))
    events = np.empty(len(t_us), dtype=EVENT_DTYPE)
    events["t"] = t_us[order]
    events["x"] = xy[order, 0]
    events["y"] = xy[order, 1]
    events["p"] = pol[order]
    return events, clutter[order]


def _dedupe(points: np.ndarray) -> np.ndarray:
    rounded = np.round(points, 9)
    _, first = np.unique(rounded, axis=0, return_index=True)
    return points[np.sort(first)]


def cube_cloud(side: float = 0.3, spacing: float = 0.006) -> ModelCloud:
    """Surface samples of an origin-centered axis-aligned cube."""
    half = side / 2.0
    n = max(2, int(round(side / spacing)) + 1)
    g = np.linspace(-half, half, n)
    a, b = np.meshgrid(g, g, indexing="ij")
    a, b = a.ravel(), b.ravel()
    faces = []
    for axis in range(3):
        for sign in (-half, half):
            pts = np.empty((len(a), 3))
            pts[:, axis] = sign
            pts[:, (axis + 1) % 3] = a
            pts[:, (axis + 2) % 3] = b
            faces.append(pts)
    return ModelCloud(_dedupe(np.vstack(faces)), "cube")


def capped_prism_cloud(width: float = 0.22, length: float = 0.26,
                       spacing: float = 0.006) -> ModelCloud:
    """Square prism with a hemispherical cap on one end.

    The prism runs along +y from the origin; the cap of radius width / 2
    sits on the far end, giving the silhouette both straight and curved
    stretches.
    """
    half = width / 2.0
    n_w = max(2, int(round(width / spacing)) + 1)
    n_l = max(2, int(round(length / spacing)) + 1)
    gw = np.linspace(-half, half, n_w)
    gl = np.linspace(0.0, length, n_l)
    parts = []
    wa, la = np.meshgrid(gw, gl, indexing="ij")
    wa, la = wa.ravel(), la.ravel()
    for sign in (-half, half):
        side = np.column_stack([np.full(len(wa), sign), la, wa])
        parts.append(side)
        side = np.column_stack([wa, la, np.full(len(wa), sign)])
        parts.append(side)
    ba, bb = np.meshgrid(gw, gw, indexing="ij")
    parts.append(np.column_stack([ba.ravel(),
                                  np.zeros(ba.size), bb.ravel()]))
    # Fibonacci-spaced hemisphere on the +y end
    n_cap = max(16, int(round(2.0 * np.pi * half * half / spacing**2)))
    i = np.arange(n_cap) + 0.5
    cos_t = i / n_cap           # y from just above equator to the pole
    sin_t = np.sqrt(1.0 - cos_t**2)
    golden = np.pi * (3.0 - np.sqrt(5.0))
    ang = golden * np.arange(n_cap)
    cap = np.column_stack([half * sin_t * np.cos(ang),
                           length + half * cos_t,
                           half * sin_t * np.sin(ang)])
    parts.append(cap)
    return ModelCloud(_dedupe(np.vstack(parts)), "capped_prism")
