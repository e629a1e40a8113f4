"""Event-camera 6DoF object pose tracking.

Events are windowed into decayed time surfaces; corners detected on the
filtered surface are pushed along their estimated image velocity toward the
model silhouette drawn at the previous pose, and the matched pairs drive a
robust pose refinement. A contrast-threshold simulator generates labeled
synthetic streams for testing and evaluation.
"""

from .config import PipelineConfig, dump_config, parse_config, read_config
from .errors import EventPoseError
from .events import (EVENT_DTYPE, EventWindow, TimeSurface, WindowPolicy,
                     guided_filter, iter_windows, make_events, make_window,
                     time_surface)
from .features import (Corner, EdgePoint, HarrisParams, ModelCloud,
                       ProjectedCloud, detect_corners, downsample_cloud,
                       extract_boundary, harris_response, project_cloud,
                       select_uniform)
from .flow import (FlowEstimate, FlowParams, bisquare_weight, estimate_flow,
                   estimate_flow_from_events, flow_ls_step, gather_window)
from .geometry import (CameraIntrinsics, Pose, Twist, compose, exp_se3,
                       exp_so3, invert, log_se3, log_so3, project,
                       project_points, projection_jacobian, skew)
from .matching import (Correspondence, MatchParams, match_all,
                       match_corner_edge)
from .metrics import (EvalReport, evaluate, export_plots, rotation_error,
                      translation_error)
from .simulator import (SimConfig, SimResult, Trajectory, capped_prism_cloud,
                        cube_cloud, drop_time_range, point_track_events,
                        pose_at, simulate)
from .tracker import (LMParams, LMState, SelectParams, SurfaceParams,
                      TrackedPose, TrackerConfig, lm_step, optimize_pose,
                      residual_vector, track)

__version__ = "0.1.0"
