#=========================================================================
# matching_modes.py
#=========================================================================
# Corner-to-edge matching can walk along the corner's flow line or just
# grab the nearest boundary pixel. On cluttered streams with a stale
# render the flow direction carries real information; this script runs
# both modes over the same cluttered sequence and prints the tallies.

import dataclasses

import numpy as np

from eventpose.geometry import CameraIntrinsics, Pose, exp_so3
from eventpose.matching import MatchParams
from eventpose.metrics import rotation_error, translation_error
from eventpose.simulator import SimConfig, Trajectory, capped_prism_cloud, \
    pose_at, simulate
from eventpose.tracker import TrackerConfig, track

cam = CameraIntrinsics(500.0, 500.0, 320.0, 240.0, 640, 480)
axis = np.array([0.25, 0.45, 0.85])
axis /= np.linalg.norm(axis)
tilt = exp_so3(np.deg2rad(-35.0) * np.array([1.0, 0.0, 0.0]))

#-------------------------------------------------------------------------
# Curved-edge object with 30% clutter events sprinkled in.
#-------------------------------------------------------------------------

duration_s = 1.5
keys = []
for i in range(10):
    s = i / 9.0
    ang = np.deg2rad(40.0) * duration_s * s
    keys.append((int(round(s * duration_s * 1e6)),
                 Pose(exp_so3(axis * ang) @ tilt,
                      np.array([0.0, 0.0, 1.0])
                      + np.array([0.06, 0.04, -0.05]) * s)))
traj = Trajectory.from_keyframes(keys)
cloud = capped_prism_cloud()

print("simulating a cluttered sequence of the sphere-capped prism ...")
res = simulate(cloud, traj, cam,
               SimConfig(threshold=0.08, clutter_fraction=0.3, seed=7))
events = res.events[np.searchsorted(res.events["t"], 100_000):]
pose0 = pose_at(traj, int(events["t"][0]))
print(f"  {len(events)} events")

#-------------------------------------------------------------------------
# Same stream, same settings, one knob: the slow-flow gate u_min. Set
# impossibly high it disables the guided search in favor of the plain
# nearest-edge fallback.
#-------------------------------------------------------------------------

def run(matching):
    cfg = dataclasses.replace(TrackerConfig(), matching=matching)
    rows = list(track(events, cloud, pose0, cam, cfg))
    rot = np.mean([rotation_error(r.pose.rotation,
                                  pose_at(traj, r.t).rotation) for r in rows])
    trn = np.mean([translation_error(r.pose.translation,
                                     pose_at(traj, r.t).translation)
                   for r in rows])
    return rot, trn, len(rows)

for label, params in (("flow-guided", MatchParams()),
                      ("nearest-edge", MatchParams(u_min=1e9))):
    rot, trn, n = run(params)
    print(f"  {label:13s} {n} windows  mean dR {rot:6.2f} deg  "
          f"mean dT {trn:5.2f} cm")

print("\nWith the default single-pass chain the stale render lags the")
print("corners, and searching along the flow line is what keeps matches")
print("on the right stretch of boundary.")
