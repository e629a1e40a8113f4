import numpy as np
import pytest

from eventpose.errors import InsufficientMatches
from eventpose.features import Corner, EdgePoint
from eventpose.flow import FlowEstimate
from eventpose.matching import (MatchParams, match_all, match_corner_edge)


def corner_at(x, y, t=0):
    return Corner(np.array([float(x), float(y)]), 1.0, t)


def flow_of(ux, uy, converged=True):
    return FlowEstimate(np.array([float(ux), float(uy)]), 3, 10.0, converged)


def edge_at(x, y, model_index=0, depth=1.0):
    return EdgePoint(np.array([float(x), float(y)]), model_index, depth)


def oracle(corner, flow, edges, params):
    """Re-derivation by plain loops: returns (edge index, score) or None."""
    if not edges:
        return None
    speed = float(np.linalg.norm(flow.u))

    def nearest():
        best = None
        for i, e in enumerate(edges):
            dist = float(np.linalg.norm(e.pixel - corner.position))
            if dist > params.d_max:
                continue
            key = (dist, e.model_index)
            if best is None or key < best[0]:
                best = (key, i, dist)
        if best is None:
            return None
        return best[1], best[2]

    if not flow.converged or speed < params.u_min:
        return nearest()
    sign = -1.0 if params.direction == "reverse" else 1.0
    ray = sign * flow.u / speed
    cos_max = np.cos(np.deg2rad(params.theta_max_deg))
    best = None
    for i, e in enumerate(edges):
        d = e.pixel - corner.position
        dist = float(np.linalg.norm(d))
        if dist > params.d_max:
            continue
        along = float(d @ ray)
        cos_angle = along / dist if dist > 0 else 1.0
        if cos_angle < cos_max:
            continue
        perp = float(np.sqrt(max(dist * dist - along * along, 0.0)))
        key = (perp, dist, e.model_index)
        if best is None or key < best[0]:
            best = (key, i, perp)
    if best is None:
        return nearest()
    return best[1], best[2]


def test_matches_oracle_on_random_scenes():
    rng = np.random.default_rng(40)
    params = MatchParams()
    for trial in range(40):
        edges = [edge_at(rng.uniform(0, 200), rng.uniform(0, 150),
                         int(rng.integers(0, 500)))
                 for _ in range(60)]
        corner = corner_at(rng.uniform(50, 150), rng.uniform(40, 110))
        u = rng.uniform(-1.5, 1.5, 2)
        flow = FlowEstimate(u, 3, 10.0, bool(rng.uniform() < 0.8))
        got = match_corner_edge(corner, flow, edges, params)
        want = oracle(corner, flow, edges, params)
        if want is None:
            assert got is None
        else:
            assert got is not None
            assert got.edge is edges[want[0]]
            assert got.score == pytest.approx(want[1], abs=1e-9)


def test_edge_on_reverse_ray_scores_zero():
    corner = corner_at(100, 100)
    flow = flow_of(1.0, 0.0)     # moving right, so look left
    edges = [edge_at(90, 100, 0), edge_at(110, 100, 1)]
    m = match_corner_edge(corner, flow, edges, MatchParams())
    assert m.edge is edges[0]
    assert m.score == pytest.approx(0.0, abs=1e-12)


def test_cone_prefers_small_perpendicular_over_small_distance():
    corner = corner_at(100, 100)
    flow = flow_of(1.0, 0.0)
    near_off_axis = edge_at(96, 101.5, 0)    # dist ~4.3, perp 1.5
    far_on_axis = edge_at(88, 100.2, 1)      # dist ~12, perp 0.2
    m = match_corner_edge(corner, flow, [near_off_axis, far_on_axis],
                          MatchParams())
    assert m.edge is far_on_axis


def test_empty_cone_falls_back_to_nearest():
    corner = corner_at(100, 100)
    flow = flow_of(1.0, 0.0)
    behind = edge_at(104, 100, 0)    # opposite the reverse ray
    m = match_corner_edge(corner, flow, [behind], MatchParams())
    assert m.edge is behind
    assert m.score == pytest.approx(4.0, abs=1e-12)


def test_unconverged_flow_uses_nearest():
    corner = corner_at(100, 100)
    flow = flow_of(1.0, 0.0, converged=False)
    ahead = edge_at(103, 100, 0)
    on_ray = edge_at(92, 100, 1)
    m = match_corner_edge(corner, flow, [ahead, on_ray], MatchParams())
    assert m.edge is ahead


def test_slow_flow_uses_nearest():
    corner = corner_at(100, 100)
    flow = flow_of(0.04, 0.0)    # below the speed gate
    ahead = edge_at(103, 100, 0)
    on_ray = edge_at(92, 100, 1)
    m = match_corner_edge(corner, flow, [ahead, on_ray], MatchParams())
    assert m.edge is ahead
    flow = flow_of(0.05, 0.0)    # at the gate: directional again
    m = match_corner_edge(corner, flow, [ahead, on_ray], MatchParams())
    assert m.edge is on_ray


def test_out_of_reach_gives_none():
    corner = corner_at(100, 100)
    m = match_corner_edge(corner, flow_of(1.0, 0.0),
                          [edge_at(150, 100, 0)], MatchParams())
    assert m is None
    assert match_corner_edge(corner, flow_of(1, 0), [], MatchParams()) is None


def test_coincident_edge_wins_with_zero_score():
    corner = corner_at(100, 100)
    edges = [edge_at(100, 100, 4), edge_at(95, 100, 1)]
    m = match_corner_edge(corner, flow_of(1.0, 0.0), edges, MatchParams())
    assert m.edge is edges[0]
    assert m.score == 0.0


def test_direction_validated():
    with pytest.raises(ValueError):
        match_corner_edge(corner_at(0, 0), flow_of(1, 0),
                          [edge_at(1, 1)], MatchParams(direction="sideways"))


def test_quarter_turn_equivariance():
    rng = np.random.default_rng(42)
    params = MatchParams()
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    center = np.array([100.0, 100.0])
    for _ in range(20):
        edges = [edge_at(rng.uniform(60, 140), rng.uniform(60, 140), i)
                 for i in range(30)]
        corner = corner_at(rng.uniform(80, 120), rng.uniform(80, 120))
        u = rng.uniform(-1, 1, 2)
        flow = FlowEstimate(u, 3, 10.0, True)
        m0 = match_corner_edge(corner, flow, edges, params)
        edges_r = [EdgePoint(center + rot @ (e.pixel - center),
                             e.model_index, e.depth) for e in edges]
        corner_r = Corner(center + rot @ (corner.position - center), 1.0, 0)
        flow_r = FlowEstimate(rot @ u, 3, 10.0, True)
        m1 = match_corner_edge(corner_r, flow_r, edges_r, params)
        if m0 is None:
            assert m1 is None
        else:
            assert m1.edge.model_index == m0.edge.model_index
            assert m1.score == pytest.approx(m0.score, abs=1e-9)


def test_match_all_one_to_one_keeps_better_score():
    # ten corners each sitting 1 px from a private edge, all flows slow so
    # the nearest-neighbor path is used throughout
    corners = [corner_at(20 * i + 10, 50) for i in range(10)]
    flows = [flow_of(0, 0, converged=False)] * 10
    edges = [edge_at(20 * i + 11, 50, i) for i in range(10)]
    out = match_all(corners, flows, edges, MatchParams())
    assert len(out) == 10
    keys = {tuple(m.edge.pixel) for m in out}
    assert len(keys) == 10
    # a contender two px from corner 3's edge loses it and drops out
    contender = corner_at(73, 50)
    out = match_all(corners + [contender], flows + [flows[0]], edges,
                    MatchParams())
    assert len(out) == 10
    winner = [m for m in out if m.edge.model_index == 3]
    assert len(winner) == 1
    assert winner[0].corner is corners[3]


def test_match_all_too_few_raises():
    corners = [corner_at(20 * i + 10, 50) for i in range(5)]
    flows = [flow_of(0, 0, converged=False)] * 5
    edges = [edge_at(20 * i + 11, 50, i) for i in range(5)]
    with pytest.raises(InsufficientMatches):
        match_all(corners, flows, edges, MatchParams())


def test_match_all_length_mismatch():
    with pytest.raises(ValueError):
        match_all([corner_at(0, 0)], [], [edge_at(1, 1)], MatchParams())
