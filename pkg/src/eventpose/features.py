"""Corner detection on time surfaces and model silhouette boundaries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage as ndi

from .errors import AllPointsCulled, DegenerateSilhouette
from .events import TimeSurface
from .geometry import CameraIntrinsics, MIN_DEPTH, Pose, project_points

_CLOSE_STRUCT = np.ones((3, 3), dtype=bool)


@dataclass
class HarrisParams:
    k: float = 0.04
    sigma: float = 1.5
    rel_threshold: float = 0.01
    nms_radius: int = 5
    border: int = 2


@dataclass(frozen=True)
class Corner:
    """Subpixel corner on a time surface; position is (x, y)."""

    position: np.ndarray
    response: float
    t: int


def harris_response(values: np.ndarray, params: HarrisParams) -> np.ndarray:
    """Corner response map: det(M) - k * trace(M)^2 over smoothed gradients."""
    gx = ndi.sobel(values, axis=1, mode="nearest")
    gy = ndi.sobel(values, axis=0, mode="nearest")
    sxx = ndi.gaussian_filter(gx * gx, params.sigma, mode="nearest")
    syy = ndi.gaussian_filter(gy * gy, params.sigma, mode="nearest")
    sxy = ndi.gaussian_filter(gx * gy, params.sigma, mode="nearest")
    return sxx * syy - sxy * sxy - params.k * (sxx + syy) ** 2


def _subpixel_offset(patch: np.ndarray) -> np.ndarray:
    gx = (patch[1, 2] - patch[1, 0]) / 2.0
    gy = (patch[2, 1] - patch[0, 1]) / 2.0
    hxx = patch[1, 2] - 2.0 * patch[1, 1] + patch[1, 0]
    hyy = patch[2, 1] - 2.0 * patch[1, 1] + patch[0, 1]
    hxy = (patch[2, 2] - patch[2, 0] - patch[0, 2] + patch[0, 0]) / 4.0
    det = hxx * hyy - hxy * hxy
    if abs(det) < 1e-12:
        return np.zeros(2)
    off = -np.array([hyy * gx - hxy * gy, hxx * gy - hxy * gx]) / det
    if not np.all(np.isfinite(off)) or np.max(np.abs(off)) > 1.0:
        return np.zeros(2)
    return off


def detect_corners(ts: TimeSurface, params: HarrisParams) -> list[Corner]:
    """Harris corners with non-maximum suppression and quadratic refinement.

    Returns an empty list when nothing rises above the relative threshold.
    """
    resp = harris_response(ts.values, params)
    peak_resp = float(resp.max()) if resp.size else 0.0
    if peak_resp <= 0.0:
        return []
    thr = params.rel_threshold * peak_resp
    size = 2 * params.nms_radius + 1
    local_max = resp == ndi.maximum_filter(resp, size=size, mode="nearest")
    keep = local_max & (resp > thr)
    b = max(params.border, 1)
    keep[:b, :] = False
    keep[-b:, :] = False
    keep[:, :b] = False
    keep[:, -b:] = False
    corners = []
    for r, c in zip(*np.nonzero(keep)):
        off = _subpixel_offset(resp[r - 1:r + 2, c - 1:c + 2])
        corners.append(Corner(np.array([c + off[0], r + off[1]]),
                              float(resp[r, c]), ts.t_ref))
    return corners


def select_uniform(corners: list[Corner], cell: int = 32,
                   max_corners: int = 80) -> list[Corner]:
    """Strongest corner per grid cell, then the global top max_corners.

    Ties resolve toward earlier list position; output keeps input order.
    """
    if cell < 1:
        raise ValueError("cell must be at least 1")
    best: dict[tuple[int, int], int] = {}
    for i, c in enumerate(corners):
        key = (int(c.position[0] // cell), int(c.position[1] // cell))
        j = best.get(key)
        if j is None or c.response > corners[j].response:
            best[key] = i
    survivors = sorted(best.values())
    survivors.sort(key=lambda i: -corners[i].response)
    survivors = sorted(survivors[:max_corners])
    return [corners[i] for i in survivors]


@dataclass(frozen=True)
class ModelCloud:
    """Object-frame surface samples in meters."""

    points: np.ndarray
    source: str = ""

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) == 0:
            raise ValueError("points must be a non-empty (N, 3) array")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        object.__setattr__(self, "points", pts)


def downsample_cloud(cloud: ModelCloud, max_points: int = 5000) -> ModelCloud:
    """Voxel-grid thinning toward max_points, keeping first-seen points.

    The voxel edge is found by bisection, so the result lands at or just
    under the cap. Deterministic for a fixed input order.
    """
    pts = cloud.points
    if len(pts) <= max_points:
        return cloud
    lo_pt = pts.min(axis=0)
    span = float(np.max(pts.max(axis=0) - lo_pt))
    lo, hi = span * 1e-6, span

    def count(edge):
        keys = np.floor((pts - lo_pt) / edge).astype(np.int64)
        return len(np.unique(keys, axis=0))

    for _ in range(48):
        mid = 0.5 * (lo + hi)
        if count(mid) > max_points:
            lo = mid
        else:
            hi = mid
    keys = np.floor((pts - lo_pt) / hi).astype(np.int64)
    _, first = np.unique(keys, axis=0, return_index=True)
    return ModelCloud(pts[np.sort(first)], cloud.source)


@dataclass(frozen=True)
class ProjectedCloud:
    """In-frame projections: continuous pixels, source indices, depths."""

    pixels: np.ndarray
    indices: np.ndarray
    depths: np.ndarray


def project_cloud(cloud: ModelCloud, pose: Pose,
                  cam: CameraIntrinsics) -> ProjectedCloud:
    """Project the cloud, dropping points behind the camera or out of frame."""
    pixels, depths = project_points(cam, pose, cloud.points)
    valid = depths > MIN_DEPTH
    cols = np.full(len(depths), -1, dtype=np.int64)
    rows = np.full(len(depths), -1, dtype=np.int64)
    cols[valid] = np.rint(pixels[valid, 0]).astype(np.int64)
    rows[valid] = np.rint(pixels[valid, 1]).astype(np.int64)
    valid &= (cols >= 0) & (cols < cam.width) & (rows >= 0) & (rows < cam.height)
    if not valid.any():
        raise AllPointsCulled("no model point projects into the image")
    idx = np.nonzero(valid)[0]
    return ProjectedCloud(pixels[idx], idx, depths[idx])


@dataclass(frozen=True)
class EdgePoint:
    """Silhouette boundary pixel tied to its minimum-depth model point."""

    pixel: np.ndarray
    model_index: int
    depth: float


def extract_boundary(projected: ProjectedCloud, width: int,
                     height: int) -> list[EdgePoint]:
    """Boundary of the rasterized silhouette after gap closing.

    A pixel is boundary when occupied with at least one empty 4-neighbor.
    Only pixels that actually received a projected point emit an edge point;
    each carries the model index of its closest-in-depth occupant.
    """
    cols = np.rint(projected.pixels[:, 0]).astype(np.int64)
    rows = np.rint(projected.pixels[:, 1]).astype(np.int64)
    occ = np.zeros((height, width), dtype=bool)
    occ[rows, cols] = True
    closed = ndi.binary_closing(occ, structure=_CLOSE_STRUCT) | occ
    padded = np.pad(closed, 1)
    full4 = (padded[:-2, 1:-1] & padded[2:, 1:-1]
             & padded[1:-1, :-2] & padded[1:-1, 2:])
    boundary = closed & ~full4

    # minimum-depth occupant per raster pixel
    flat = rows * width + cols
    order = np.lexsort((projected.depths, flat))
    fs = flat[order]
    first = np.ones(len(fs), dtype=bool)
    first[1:] = fs[1:] != fs[:-1]
    win_flat = fs[first]
    win_model = projected.indices[order[first]]
    win_depth = projected.depths[order[first]]

    brow, bcol = np.nonzero(boundary)
    bflat = brow * width + bcol
    pos = np.searchsorted(win_flat, bflat)
    has_point = (pos < len(win_flat))
    has_point[has_point] = win_flat[pos[has_point]] == bflat[has_point]

    edges = [EdgePoint(np.array([float(c), float(r)]),
                       int(win_model[p]), float(win_depth[p]))
             for r, c, p, ok in zip(brow, bcol, pos, has_point) if ok]
    if len(edges) < 8:
        raise DegenerateSilhouette(f"only {len(edges)} boundary pixels")
    return edges
