"""Exception types raised across the package."""


class InvalidDepthError(ValueError):
    """Depth value is non-positive or non-finite where a valid depth is required."""


class BehindCameraError(ValueError):
    """A 3D point with Z <= 0 cannot be projected onto the image plane."""


class PoseError(ValueError):
    """Rotation matrix is not orthonormal within tolerance, or pose data is malformed."""


class ShapeMismatchError(ValueError):
    """Operands have incompatible dimensions; inputs are never silently resized."""


class FileFormatError(ValueError):
    """A dataset file (depth PNG, pose text, calibration text) violates its documented format."""
