import numpy as np
import pytest

from eventpose.errors import DegenerateTime, TooFewEvents
from eventpose.events import EventWindow
from eventpose.features import Corner
from eventpose.flow import (FlowParams, bisquare_weight, estimate_flow,
                            estimate_flow_from_events, flow_ls_step,
                            gather_window)
from eventpose.simulator import point_track_events


def lattice_track(u, t_c_ms, start=(100.0, 100.0), t0_us=5000,
                  times_ms=None, **kwargs):
    """Track whose positions land exactly on integer pixels.

    Velocity components are multiples of 0.5 and times are even, so
    u * tau is integral and rounding to the pixel grid is lossless.
    """
    if times_ms is None:
        times_ms = np.arange(0, 40, 2, dtype=float)
    events, clutter = point_track_events(start, u, times_ms, t0_us=t0_us,
                                         **kwargs)
    window = EventWindow(events, int(events["t"][0]), int(events["t"][-1]))
    corner_pos = np.asarray(start, dtype=float) + np.asarray(u) * t_c_ms
    corner = Corner(corner_pos, 1.0, t0_us + int(round(t_c_ms * 1000.0)))
    return events, clutter, window, corner


def test_bisquare_hand_values():
    assert bisquare_weight(0.0, 4.685) == 1.0
    assert bisquare_weight(4.685, 4.685) == 0.0
    assert bisquare_weight(10.0, 4.685) == 0.0
    assert bisquare_weight(-10.0, 4.685) == 0.0
    # r at half the cutoff: (1 - 0.25)^2
    assert bisquare_weight(2.3425, 4.685) == pytest.approx(0.5625, abs=1e-12)
    assert bisquare_weight(1.0, 2.0) == pytest.approx(0.5625, abs=1e-12)


def test_bisquare_scale_stretches_cutoff():
    assert bisquare_weight(2.0, 4.685, scale=2.0) == pytest.approx(
        bisquare_weight(1.0, 4.685, scale=1.0), abs=1e-15)
    assert bisquare_weight(9.0, 4.685, scale=2.0) > 0.0
    assert bisquare_weight(9.5, 4.685, scale=2.0) == 0.0


def test_bisquare_vector_matches_scalar():
    r = np.linspace(-6, 6, 25)
    vec = bisquare_weight(r, 4.685, scale=1.3)
    for ri, wi in zip(r, vec):
        assert wi == bisquare_weight(float(ri), 4.685, scale=1.3)


def test_gather_window_matches_loop():
    rng = np.random.default_rng(30)
    n = 400
    t = np.sort(rng.integers(0, 30000, n))
    x = rng.integers(0, 200, n)
    y = rng.integers(0, 150, n)
    p = rng.choice([-1, 1], n)
    from eventpose.events import make_events
    events = make_events(t, x, y, p)
    window = EventWindow(events, int(t[0]), int(t[-1]))
    corner = Corner(np.array([100.3, 75.8]), 1.0, int(t[0]))
    pos, t_ms, idx = gather_window(corner, window, radius=12, min_events=1)
    keep = [i for i in range(n)
            if abs(events["x"][i] - 100.3) <= 12
            and abs(events["y"][i] - 75.8) <= 12]
    assert list(idx) == keep
    for k, i in enumerate(keep):
        assert pos[k, 0] == events["x"][i]
        assert pos[k, 1] == events["y"][i]
        assert t_ms[k] == (float(events["t"][i]) - float(t[0])) / 1000.0


def test_gather_window_too_few():
    from eventpose.events import make_events
    events = make_events([0, 10, 20], [5, 200, 201], [5, 100, 100],
                         [1, 1, -1])
    window = EventWindow(events, 0, 20)
    corner = Corner(np.array([5.0, 5.0]), 1.0, 0)
    with pytest.raises(TooFewEvents):
        gather_window(corner, window, radius=3, min_events=2)


def test_ls_step_matches_lstsq():
    rng = np.random.default_rng(32)
    for _ in range(50):
        m = rng.integers(5, 40)
        s = rng.uniform(0, 100, 2)
        tau = rng.uniform(-10, 10, m)
        pos = rng.uniform(0, 120, (m, 2))
        w = rng.uniform(0.0, 1.0, m)
        w[0] = 1.0     # keep the time mass alive
        u = flow_ls_step(s, pos, tau, w)
        sw = np.sqrt(w)
        a = (sw * tau)[:, None]
        for axis in range(2):
            b = sw * (pos[:, axis] - s[axis])
            ref = np.linalg.lstsq(a, b, rcond=None)[0][0]
            assert u[axis] == pytest.approx(ref, abs=1e-9)


def test_ls_step_degenerate_time():
    pos = np.zeros((6, 2))
    with pytest.raises(DegenerateTime):
        flow_ls_step(np.zeros(2), pos, np.zeros(6), np.ones(6))
    with pytest.raises(DegenerateTime):
        flow_ls_step(np.zeros(2), pos, np.ones(6), np.zeros(6))


def test_noiseless_track_exact():
    u_true = np.array([0.5, -0.5])
    _, _, window, corner = lattice_track(u_true, t_c_ms=19.0)
    est = estimate_flow(corner, window, FlowParams(spatial_radius=10))
    assert est.converged
    assert np.allclose(est.u, u_true, atol=1e-9)


def test_corner_at_window_close_unbiased():
    # corner detected at the end of the span: the fit must anchor there,
    # not at the window start, or the recovered speed halves and flips
    u_true = np.array([0.5, 0.0])
    _, _, window, corner = lattice_track(u_true, t_c_ms=38.0)
    est = estimate_flow(corner, window, FlowParams(spatial_radius=20))
    assert est.converged
    assert np.allclose(est.u, u_true, atol=1e-9)


def test_stationary_track():
    u_true = np.array([0.0, 0.0])
    _, _, window, corner = lattice_track(u_true, t_c_ms=0.0)
    est = estimate_flow(corner, window, FlowParams(spatial_radius=5))
    assert est.converged
    assert np.allclose(est.u, 0.0, atol=1e-12)


def test_cluttered_track_rejects_off_feature_events():
    u_true = np.array([0.5, -0.5])
    times = np.arange(0, 60, 2, dtype=float)
    events, clutter, window, corner = lattice_track(
        u_true, t_c_ms=30.0, times_ms=times, seed=7, clutter_fraction=0.3)
    pos = np.column_stack([events["x"].astype(float),
                           events["y"].astype(float)])
    t_ms = (events["t"].astype(float) - float(window.t_start)) / 1000.0 - 30.0
    est = estimate_flow_from_events(corner.position, pos, t_ms, FlowParams())
    assert est.converged
    assert np.linalg.norm(est.u - u_true) < 0.05
    assert est.weights[clutter].max() < 0.1
    assert est.weights[~clutter].min() > 0.5


def test_translation_equivariance():
    rng = np.random.default_rng(34)
    m = 60
    tau = rng.uniform(-15, 15, m)
    pos = np.array([40.0, 50.0]) + np.outer(tau, [0.4, -0.2])
    pos += rng.normal(0, 0.3, pos.shape)
    s = np.array([40.0, 50.0])
    shift = np.array([37.0, -12.0])
    a = estimate_flow_from_events(s, pos, tau, FlowParams())
    b = estimate_flow_from_events(s + shift, pos + shift, tau, FlowParams())
    assert np.allclose(a.u, b.u, atol=1e-12)
    assert a.iterations == b.iterations


def test_time_rescale_halves_velocity():
    u_true = np.array([1.0, -0.5])
    times = np.arange(0, 40, 2, dtype=float)
    events, _, window, corner = lattice_track(u_true, t_c_ms=0.0,
                                              times_ms=times)
    pos = np.column_stack([events["x"].astype(float),
                           events["y"].astype(float)])
    t_ms = (events["t"].astype(float) - float(window.t_start)) / 1000.0
    a = estimate_flow_from_events(corner.position, pos, t_ms, FlowParams())
    b = estimate_flow_from_events(corner.position, pos, 2.0 * t_ms,
                                  FlowParams())
    assert np.allclose(b.u, a.u / 2.0, atol=1e-12)


def test_single_pass_equals_closed_form():
    rng = np.random.default_rng(36)
    m = 40
    tau = rng.uniform(-10, 10, m)
    s = np.array([50.0, 50.0])
    pos = s + np.outer(tau, [0.7, -0.3]) + rng.normal(0, 0.3, (m, 2))
    params = FlowParams(scale_mode="fixed", max_iters=1)
    est = estimate_flow_from_events(s, pos, tau, params)
    ref = flow_ls_step(s, pos, tau, np.ones(m))
    assert np.array_equal(est.u, ref)
    assert est.iterations == 1


def test_total_rejection_keeps_previous_iterate():
    # contradictory pairs at the same instant: the best line still leaves
    # every residual far past the cutoff, so all weights die at once
    tau = np.array([-1.0, -1.0, 1.0, 1.0])
    pos = np.array([[0.0, 50.0], [0.0, -50.0], [0.0, 50.0], [0.0, -50.0]])
    params = FlowParams(scale_mode="fixed")
    est = estimate_flow_from_events(np.zeros(2), pos, tau, params)
    assert not est.converged
    assert est.iterations == 1
    assert np.array_equal(est.u, np.zeros(2))
