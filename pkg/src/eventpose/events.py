"""Event streams, sequential windowing, time surfaces, and edge-preserving filtering."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EndOfStream

# Matches the on-disk binary record layout: packed little-endian, 13 bytes.
EVENT_DTYPE = np.dtype([("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "<i1")])


def make_events(t, x, y, p) -> np.ndarray:
    """Assemble a structured event array from per-field sequences.

    Timestamps are microseconds and must be non-decreasing; polarity is -1
    or +1.
    """
    t = np.asarray(t)
    out = np.empty(len(t), dtype=EVENT_DTYPE)
    out["t"] = t
    out["x"] = x
    out["y"] = y
    out["p"] = p
    if len(out) > 1 and np.any(np.diff(out["t"].astype(np.int64)) < 0):
        raise ValueError("event timestamps must be non-decreasing")
    if not np.all(np.isin(out["p"], (-1, 1))):
        raise ValueError("polarity must be -1 or +1")
    return out


@dataclass
class WindowPolicy:
    """Window close rule: n_events reached, or max span exceeded, whichever first."""

    n_events: int = 15000
    max_span_us: int = 30000
    min_events: int = 500


@dataclass(frozen=True)
class EventWindow:
    events: np.ndarray
    t_start: int
    t_end: int


def make_window(events: np.ndarray, start: int, policy: WindowPolicy):
    """Cut the next window from a sorted stream beginning at index start.

    Returns (window, next_start). Raises EndOfStream once fewer than
    policy.min_events events remain.
    """
    remaining = len(events) - start
    if remaining < policy.min_events:
        raise EndOfStream(f"{remaining} events left, need {policy.min_events}")
    t = events["t"]
    t0 = int(t[start])
    stop_cap = min(start + policy.n_events, len(events))
    # events with t <= t0 + max_span stay inside the window
    within = int(np.searchsorted(t[start:stop_cap], t0 + policy.max_span_us,
                                 side="right"))
    stop = start + max(within, 1)
    chunk = events[start:stop]
    return EventWindow(chunk, t0, int(t[stop - 1])), stop


def iter_windows(events: np.ndarray, policy: WindowPolicy):
    """Yield consecutive non-overlapping windows until the stream runs dry."""
    start = 0
    while True:
        try:
            window, start = make_window(events, start, policy)
        except EndOfStream:
            return
        yield window


@dataclass(frozen=True)
class TimeSurface:
    """Exponentially decayed recency image; zero where a pixel never fired."""

    values: np.ndarray
    t_ref: int
    tau_ms: float


def time_surface(window: EventWindow, tau_ms: float, t_ref: int,
                 width: int, height: int) -> TimeSurface:
    """Decay each pixel's newest event timestamp to t_ref.

    Both polarities update the same surface. t_ref must not precede any
    event in the window.
    """
    if tau_ms <= 0:
        raise ValueError("tau_ms must be positive")
    ev = window.events
    if len(ev) and int(ev["t"].max()) > t_ref:
        raise ValueError("t_ref precedes events in the window")
    last = np.full((height, width), -np.inf)
    if len(ev):
        # newest timestamp per pixel; timestamps are sorted so max == last
        np.maximum.at(last, (ev["y"].astype(np.intp), ev["x"].astype(np.intp)),
                      ev["t"].astype(np.float64))
    tau_us = tau_ms * 1000.0
    values = np.exp(-(float(t_ref) - last) / tau_us)
    return TimeSurface(values, int(t_ref), float(tau_ms))


def _box_sum(img: np.ndarray, radius: int) -> np.ndarray:
    """Sum over a (2r+1)^2 window clipped at the image border."""
    h, w = img.shape
    c = np.cumsum(np.cumsum(img, axis=0), axis=1)
    c = np.pad(c, ((1, 0), (1, 0)))
    y0 = np.clip(np.arange(h) - radius, 0, h)
    y1 = np.clip(np.arange(h) + radius + 1, 0, h)
    x0 = np.clip(np.arange(w) - radius, 0, w)
    x1 = np.clip(np.arange(w) + radius + 1, 0, w)
    return (c[np.ix_(y1, x1)] - c[np.ix_(y0, x1)]
            - c[np.ix_(y1, x0)] + c[np.ix_(y0, x0)])


def guided_filter(ts: TimeSurface, radius: int = 3, eps: float = 1e-4) -> TimeSurface:
    """Edge-preserving smoothing with the surface acting as its own guide.

    Each window fits v ~ a * v + b with a = var / (var + eps); the output is
    the per-pixel average of the covering windows' predictions, clamped back
    to [0, 1].
    """
    if radius < 1:
        raise ValueError("radius must be at least 1")
    if eps <= 0:
        raise ValueError("eps must be positive")
    v = ts.values
    norm = _box_sum(np.ones_like(v), radius)
    mean = _box_sum(v, radius) / norm
    var = _box_sum(v * v, radius) / norm - mean * mean
    var = np.maximum(var, 0.0)
    a = var / (var + eps)
    b = mean - a * mean
    out = (_box_sum(a, radius) / norm) * v + _box_sum(b, radius) / norm
    return TimeSurface(np.clip(out, 0.0, 1.0), ts.t_ref, ts.tau_ms)
