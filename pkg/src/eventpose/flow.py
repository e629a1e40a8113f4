"""Per-corner optical flow from raw events, robustified by reweighting.

The estimator fits a constant-velocity line through the corner: an event at
relative time tau should sit at s + u * tau. Off-track events are pushed out
by bisquare weights, and the velocity has a closed-form weighted solution
per axis, so each pass is a single division.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateTime, NoInliers, TooFewEvents
from .events import EventWindow
from .features import Corner

DENOM_FLOOR = 1e-12
MASS_FLOOR = 1e-6


@dataclass
class FlowParams:
    spatial_radius: int = 5
    b: float = 4.685
    max_iters: int = 10
    tol: float = 0.01
    min_events: int = 12
    scale_mode: str = "mad"
    scale_floor: float = 0.5


@dataclass(frozen=True)
class FlowEstimate:
    """Velocity in px/ms plus diagnostics of the reweighting loop."""

    u: np.ndarray
    iterations: int
    inlier_mass: float
    converged: bool
    weights: np.ndarray | None = None


def bisquare_weight(r, b: float, scale: float = 1.0):
    """Tukey bisquare weight (1 - (r/scale)^2 / b^2)^2, zero past b * scale."""
    rn = np.abs(np.asarray(r, dtype=float)) / scale
    w = np.where(rn < b, (1.0 - (rn / b) ** 2) ** 2, 0.0)
    if np.isscalar(r):
        return float(w)
    return w


def gather_window(corner: Corner, window: EventWindow, radius: int,
                  min_events: int = 12):
    """Events within Chebyshev radius of the corner.

    Returns (positions (m, 2), times (m,) in ms relative to window start,
    indices into window.events). Raises TooFewEvents below min_events.
    """
    ev = window.events
    x = ev["x"].astype(np.float64)
    y = ev["y"].astype(np.float64)
    sx, sy = corner.position
    mask = (np.abs(x - sx) <= radius) & (np.abs(y - sy) <= radius)
    idx = np.nonzero(mask)[0]
    if len(idx) < min_events:
        raise TooFewEvents(f"{len(idx)} events in radius, need {min_events}")
    pos = np.column_stack([x[idx], y[idx]])
    t_ms = (ev["t"][idx].astype(np.float64) - float(window.t_start)) / 1000.0
    return pos, t_ms, idx


def flow_ls_step(s, positions, times_ms, weights) -> np.ndarray:
    """Closed-form weighted velocity: sum w (x - s) tau / sum w tau^2 per axis."""
    s = np.asarray(s, dtype=float)
    denom = float(np.sum(weights * times_ms * times_ms))
    if denom <= DENOM_FLOOR:
        raise DegenerateTime(f"time mass {denom:.3e} too small")
    return (weights * times_ms) @ (positions - s) / denom


def _residual_scale(r, params: FlowParams) -> float:
    if params.scale_mode == "fixed":
        return 1.0
    if params.scale_mode == "mad":
        mad = float(np.median(np.abs(r - np.median(r))))
        return max(mad / 0.6745, params.scale_floor)
    raise ValueError(f"unknown scale_mode {params.scale_mode!r}")


def estimate_flow_from_events(s, positions, times_ms,
                              params: FlowParams) -> FlowEstimate:
    """Reweighted fit on pre-gathered events; times relative to the anchor."""
    s = np.asarray(s, dtype=float)
    positions = np.asarray(positions, dtype=float)
    times_ms = np.asarray(times_ms, dtype=float)
    weights = np.ones(len(positions))
    u = np.zeros(2)
    mass = float(weights.sum())
    converged = False
    iterations = 0
    for it in range(1, params.max_iters + 1):
        iterations = it
        u_new = flow_ls_step(s, positions, times_ms, weights)
        r = np.linalg.norm(positions - (s + np.outer(times_ms, u_new)), axis=1)
        scale = _residual_scale(r, params)
        w_new = bisquare_weight(r, params.b, scale)
        if float(w_new.sum()) < MASS_FLOOR:
            # everything rejected: keep the previous iterate rather than
            # dividing by zero next pass
            converged = False
            break
        delta = float(np.linalg.norm(u_new - u))
        u = u_new
        weights = w_new
        mass = float(weights.sum())
        if delta < params.tol:
            converged = True
            break
    if mass < MASS_FLOOR:
        raise NoInliers(f"weight mass {mass:.3e} collapsed")
    return FlowEstimate(u, iterations, mass, converged, weights)


def estimate_flow(corner: Corner, window: EventWindow,
                  params: FlowParams) -> FlowEstimate:
    """Corner velocity over one window.

    Event times are re-referenced to the corner's own timestamp, so the
    fitted track passes through the corner position at the instant it was
    detected; with a corner stamped at the window start this reduces to
    times measured from the window start.
    """
    positions, t_ms, _ = gather_window(corner, window, params.spatial_radius,
                                       params.min_events)
    anchor_ms = (float(corner.t) - float(window.t_start)) / 1000.0
    return estimate_flow_from_events(corner.position, positions,
                                     t_ms - anchor_ms, params)
