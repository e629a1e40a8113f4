"""Flow-guided association of corners with silhouette edge points.

Edges come from the silhouette at the previous pose, corners from the
current window, so the search ray leaves each corner against its flow:
that is where the same physical feature sat when the edges were drawn.
Corners whose flow is too slow or never converged fall back to a plain
nearest-neighbor pick.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientMatches
from .features import Corner, EdgePoint
from .flow import FlowEstimate

MIN_MATCHES = 6


@dataclass
class MatchParams:
    theta_max_deg: float = 25.0
    d_max: float = 20.0
    u_min: float = 0.05
    direction: str = "reverse"


@dataclass(frozen=True)
class Correspondence:
    corner: Corner
    edge: EdgePoint
    flow: np.ndarray
    score: float


def _edge_arrays(edges: list[EdgePoint]):
    pix = np.array([e.pixel for e in edges], dtype=float)
    model = np.array([e.model_index for e in edges], dtype=np.int64)
    return pix, model


def _nearest(corner: Corner, flow_u, edges, pix, model,
             params: MatchParams):
    d = pix - corner.position
    dist = np.linalg.norm(d, axis=1)
    ok = dist <= params.d_max
    if not ok.any():
        return None
    cand = np.nonzero(ok)[0]
    order = np.lexsort((model[cand], dist[cand]))
    best = cand[order[0]]
    return Correspondence(corner, edges[best], np.asarray(flow_u, dtype=float),
                          float(dist[best]))


def match_corner_edge(corner: Corner, flow: FlowEstimate,
                      edges: list[EdgePoint],
                      params: MatchParams):
    """Best edge for one corner, or None when nothing lies within reach.

    With usable flow the search runs inside a cone of half-angle
    theta_max_deg around the ray; the winner minimizes perpendicular
    distance to the ray, with ties broken by Euclidean distance and then by
    model index. An empty cone, slow flow, or unconverged flow degrades to
    the nearest edge within d_max.
    """
    if params.direction not in ("reverse", "forward"):
        raise ValueError(f"unknown direction {params.direction!r}")
    if not edges:
        return None
    pix, model = _edge_arrays(edges)
    speed = float(np.linalg.norm(flow.u))
    if not flow.converged or speed < params.u_min:
        return _nearest(corner, flow.u, edges, pix, model, params)

    ray = -flow.u / speed if params.direction == "reverse" else flow.u / speed
    d = pix - corner.position
    dist = np.linalg.norm(d, axis=1)
    along = d @ ray
    with np.errstate(invalid="ignore", divide="ignore"):
        cos_angle = np.where(dist > 0, along / dist, 1.0)
    cos_max = np.cos(np.deg2rad(params.theta_max_deg))
    in_cone = (dist <= params.d_max) & (cos_angle >= cos_max)
    if not in_cone.any():
        return _nearest(corner, flow.u, edges, pix, model, params)
    perp = np.sqrt(np.maximum(dist * dist - along * along, 0.0))
    cand = np.nonzero(in_cone)[0]
    order = np.lexsort((model[cand], dist[cand], perp[cand]))
    best = cand[order[0]]
    return Correspondence(corner, edges[best], flow.u.astype(float),
                          float(perp[best]))


def match_all(corners: list[Corner], flows: list[FlowEstimate],
              edges: list[EdgePoint],
              params: MatchParams) -> list[Correspondence]:
    """One-to-one matching, greedy over ascending score.

    Raises InsufficientMatches when fewer than MIN_MATCHES survive.
    """
    if len(corners) != len(flows):
        raise ValueError("corners and flows must align")
    scored = []
    for i, (corner, flow) in enumerate(zip(corners, flows)):
        m = match_corner_edge(corner, flow, edges, params)
        if m is not None:
            scored.append((m.score, i, m))
    scored.sort(key=lambda item: (item[0], item[1]))
    taken = set()
    out = []
    for _, _, m in scored:
        key = (float(m.edge.pixel[0]), float(m.edge.pixel[1]))
        if key in taken:
            continue
        taken.add(key)
        out.append(m)
    if len(out) < MIN_MATCHES:
        raise InsufficientMatches(f"{len(out)} matches, need {MIN_MATCHES}")
    return out
