"""Exception types shared across the tracking pipeline."""


class EventPoseError(Exception):
    """Base class for every library-specific failure."""


class AngleNearPi(EventPoseError):
    """Rotation angle too close to pi for a stable logarithm."""


class BehindCamera(EventPoseError):
    """Point has non-positive depth in the camera frame."""


class EndOfStream(EventPoseError):
    """Too few events remain to open another window."""


class NoCorners(EventPoseError):
    """A window produced no usable corners."""


class AllPointsCulled(EventPoseError):
    """No model point projects into the image."""


class DegenerateSilhouette(EventPoseError):
    """Projected silhouette boundary is too small to use."""


class TooFewEvents(EventPoseError):
    """Spatio-temporal neighborhood holds fewer events than required."""


class DegenerateTime(EventPoseError):
    """Gathered events carry no usable time spread."""


class NoInliers(EventPoseError):
    """Robust weights collapsed to zero total mass."""


class InsufficientMatches(EventPoseError):
    """Fewer correspondences than a pose update needs."""


class Diverged(EventPoseError):
    """Optimizer kept rejecting steps at the damping ceiling."""


class SolveFailure(EventPoseError):
    """Normal equations produced non-finite values."""


class OutOfRange(EventPoseError):
    """Query time lies outside the keyframe span."""


class NoOverlap(EventPoseError):
    """Two trajectories share no alignable timestamps."""
