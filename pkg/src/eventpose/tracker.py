"""Damped least-squares pose refinement and the window-by-window loop.

Each window turns into a set of corner-to-model-point correspondences; the
optimizer then pulls the reprojected model points onto the corner pixels
with a Huber-weighted Levenberg-Marquardt scheme. Windows that fail
anywhere along the pipeline coast on the previous pose, and the track is
declared lost after too many consecutive coasts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (AllPointsCulled, BehindCamera, DegenerateSilhouette,
                     DegenerateTime, Diverged, InsufficientMatches, NoCorners,
                     NoInliers, SolveFailure, TooFewEvents)
from .events import WindowPolicy, guided_filter, iter_windows, time_surface
from .features import (HarrisParams, detect_corners, extract_boundary,
                       project_cloud, select_uniform, ModelCloud)
from .flow import FlowEstimate, FlowParams, estimate_flow
from .geometry import (CameraIntrinsics, Pose, Twist, exp_se3, log_se3,
                       project, projection_jacobian)
from .matching import (Correspondence, MatchParams, match_all, MIN_MATCHES)

LAMBDA_MIN = 1e-9
LAMBDA_MAX = 1e6


@dataclass
class SurfaceParams:
    tau_ms: float = 30.0
    filter_radius: int = 3
    filter_eps: float = 1e-4


@dataclass
class SelectParams:
    cell: int = 32
    max_corners: int = 80


@dataclass
class LMParams:
    lambda0: float = 1e-3
    up: float = 10.0
    down: float = 0.1
    max_iters: int = 50
    step_tol: float = 1e-6
    cost_tol: float = 1e-8
    max_reject: int = 5


@dataclass
class TrackerConfig:
    window: WindowPolicy = field(default_factory=WindowPolicy)
    surface: SurfaceParams = field(default_factory=SurfaceParams)
    harris: HarrisParams = field(default_factory=HarrisParams)
    select: SelectParams = field(default_factory=SelectParams)
    flow: FlowParams = field(default_factory=FlowParams)
    matching: MatchParams = field(default_factory=MatchParams)
    lm: LMParams = field(default_factory=LMParams)
    huber_delta: float = 3.0
    max_coast: int = 5
    match_rounds: int = 1
    predict: bool = False


@dataclass(frozen=True)
class LMState:
    lam: float
    cost: float
    iterations: int
    accepted: int
    cost_history: tuple


@dataclass(frozen=True)
class TrackedPose:
    t: int
    pose: Pose
    n_matches: int
    final_cost: float
    status: str


def _match_residuals(matches, pose, cloud, cam):
    """Per-match pixel residuals (m, 2) and the mask of usable matches."""
    res = np.zeros((len(matches), 2))
    used = np.zeros(len(matches), dtype=bool)
    for i, m in enumerate(matches):
        try:
            pix = project(cam, pose, cloud.points[m.edge.model_index])
        except BehindCamera:
            continue
        res[i] = pix - m.corner.position
        used[i] = True
    return res, used


def _huber_weights(norms, delta):
    return np.where(norms <= delta, 1.0,
                    delta / np.maximum(norms, 1e-300))


def _huber_cost(norms, delta):
    quad = norms <= delta
    return float(np.sum(np.where(quad, 0.5 * norms**2,
                                 delta * (norms - 0.5 * delta))))


def residual_vector(matches, pose: Pose, cloud: ModelCloud,
                    cam: CameraIntrinsics, huber_delta: float = 3.0):
    """Stacked (2m,) residuals and weights for the usable matches.

    Matches whose model point falls behind the camera are dropped and
    flagged false in the returned mask.
    """
    res, used = _match_residuals(matches, pose, cloud, cam)
    r = res[used].reshape(-1)
    norms = np.linalg.norm(res[used], axis=1)
    w = np.repeat(_huber_weights(norms, huber_delta), 2)
    return r, w, used


def lm_step(jac, r, weights, lam) -> Twist:
    """Solve (J^T W J + lam I) dxi = -J^T W r for the twist increment."""
    jw = jac * weights[:, None]
    h = jac.T @ jw
    g = jw.T @ r
    try:
        dxi = np.linalg.solve(h + lam * np.eye(6), -g)
    except np.linalg.LinAlgError as e:
        raise SolveFailure(str(e)) from None
    if not np.all(np.isfinite(dxi)):
        raise SolveFailure("non-finite step")
    return Twist.from_vector(dxi)


def optimize_pose(matches, pose0: Pose, cloud: ModelCloud,
                  cam: CameraIntrinsics, cfg: TrackerConfig):
    """Refine a pose against matched corners; returns (pose, LMState).

    Steps are left-multiplied twist increments; a step is accepted only
    when it strictly lowers the robust cost, so the accepted-cost sequence
    never increases. Raises Diverged after max_reject consecutive
    rejections at the damping ceiling.
    """
    if len(matches) < MIN_MATCHES:
        raise InsufficientMatches(f"{len(matches)} matches, need {MIN_MATCHES}")
    delta = cfg.huber_delta
    p = cfg.lm

    def evaluate(pose):
        res, used = _match_residuals(matches, pose, cloud, cam)
        if used.sum() < MIN_MATCHES:
            raise InsufficientMatches(
                f"only {int(used.sum())} matches project in front of the camera")
        norms = np.linalg.norm(res[used], axis=1)
        return res, used, norms, _huber_cost(norms, delta)

    pose = pose0
    res, used, norms, cost = evaluate(pose)
    lam = p.lambda0
    history = [cost]
    accepted = 0
    iterations = 0
    ceiling_rejects = 0
    for _ in range(p.max_iters):
        iterations += 1
        rows = np.repeat(_huber_weights(norms, delta), 2)
        r = res[used].reshape(-1)
        live = [m for m, u in zip(matches, used) if u]
        jac = np.empty((2 * len(live), 6))
        for j, m in enumerate(live):
            jac[2 * j:2 * j + 2] = projection_jacobian(
                cam, pose, cloud.points[m.edge.model_index])
        step = lm_step(jac, r, rows, lam)
        if float(np.linalg.norm(step.as_vector())) < p.step_tol:
            break
        candidate = exp_se3(step).compose(pose)
        try:
            c_res, c_used, c_norms, c_cost = evaluate(candidate)
        except InsufficientMatches:
            c_cost = np.inf
        if c_cost < cost:
            rel_drop = (cost - c_cost) / max(cost, 1e-300)
            pose, res, used, norms, cost = candidate, c_res, c_used, c_norms, c_cost
            history.append(cost)
            accepted += 1
            ceiling_rejects = 0
            lam = max(lam * p.down, LAMBDA_MIN)
            if rel_drop < p.cost_tol:
                break
        else:
            if lam >= LAMBDA_MAX:
                ceiling_rejects += 1
                if ceiling_rejects >= p.max_reject:
                    raise Diverged(
                        f"{ceiling_rejects} rejections at damping ceiling")
            lam = min(lam * p.up, LAMBDA_MAX)
    return pose, LMState(lam, cost, iterations, accepted, tuple(history))


def _process_window(window, pose, cloud, cam, cfg: TrackerConfig):
    sp = cfg.surface
    ts = time_surface(window, sp.tau_ms, window.t_end, cam.width, cam.height)
    ts = guided_filter(ts, sp.filter_radius, sp.filter_eps)
    corners = select_uniform(detect_corners(ts, cfg.harris),
                             cfg.select.cell, cfg.select.max_corners)
    if not corners:
        raise NoCorners("window produced no corners")
    flows = []
    for c in corners:
        try:
            flows.append(estimate_flow(c, window, cfg.flow))
        except (TooFewEvents, DegenerateTime, NoInliers):
            # unusable flow still lets the corner match as nearest-neighbor
            flows.append(FlowEstimate(np.zeros(2), 0, 0.0, False))
    projected = project_cloud(cloud, pose, cam)
    edges = extract_boundary(projected, cam.width, cam.height)
    matches = match_all(corners, flows, edges, cfg.matching)
    new_pose, state = optimize_pose(matches, pose, cloud, cam, cfg)
    for _ in range(cfg.match_rounds - 1):
        # corners sit at the window's close; edges rendered at the stale
        # prior bind a step behind. Re-rendering at the fresh estimate and
        # matching again shrinks that gap geometrically per round.
        try:
            projected = project_cloud(cloud, new_pose, cam)
            edges = extract_boundary(projected, cam.width, cam.height)
            matches = match_all(corners, flows, edges, cfg.matching)
            new_pose, state = optimize_pose(matches, new_pose, cloud, cam, cfg)
        except (AllPointsCulled, DegenerateSilhouette, InsufficientMatches,
                Diverged, SolveFailure):
            break
    return new_pose, len(matches), state.cost


def track(events: np.ndarray, cloud: ModelCloud, pose0: Pose,
          cam: CameraIntrinsics, cfg: TrackerConfig):
    """Track through a sorted event stream; yields one TrackedPose per window.

    Failed windows re-emit the held pose with status "coasted"; after
    cfg.max_coast consecutive failures a final "lost" row is emitted and
    tracking stops.
    """
    pose = pose0
    coasts = 0
    vel = None
    prior = pose
    for window in iter_windows(events, cfg.window):
        if cfg.predict and vel is not None:
            # advance the render prior by the smoothed per-window velocity
            # so edges land where the object should be now, not a window
            # behind; slight under-prediction keeps the loop stable
            prior = exp_se3(Twist.from_vector(0.8 * vel)).compose(prior)
        try:
            new_pose, n_matches, cost = _process_window(window, prior, cloud,
                                                        cam, cfg)
        except (NoCorners, AllPointsCulled, DegenerateSilhouette,
                InsufficientMatches, Diverged, SolveFailure):
            coasts += 1
            if coasts > cfg.max_coast:
                yield TrackedPose(window.t_end, pose, 0, float("nan"), "lost")
                return
            if cfg.predict and vel is not None:
                vel = 0.7 * vel
            yield TrackedPose(window.t_end, pose, 0, float("nan"), "coasted")
            continue
        if cfg.predict and coasts == 0:
            inc = log_se3(new_pose.compose(pose.inverse())).as_vector()
            vel = inc if vel is None else 0.5 * inc + 0.5 * vel
        elif cfg.predict:
            # the increment across a coast gap spans several windows;
            # relearn the velocity from scratch instead
            vel = None
        coasts = 0
        pose = new_pose
        prior = new_pose
        yield TrackedPose(window.t_end, pose, n_matches, cost, "ok")
