"""Frame-pair dataset ingestion.

Two directory profiles are supported, selected explicitly because their unit
conventions conflict:

* ``piv3cams``: depth PNG values are millimeters, pose translations are
  millimeters.
* ``kitti``: depth PNG values are 1/256 meter per unit (the odometry
  depth-completion convention), pose translations are meters.

A scene directory holds::

    scene/
      color/NNNNNN.png      8-bit RGB (PNG or JPEG)
      depth/NNNNNN.png      16-bit single-channel, units per profile, 0 = missing
      pose.txt              one line per frame: 12 values, row-major 3x4 [R | t]
      calib.txt             line "K: fx fy cx cy" (pixels)

Poses are world-frame (camera-to-world, anchored at the first tracked frame).
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .camera import (
    ROTATION_REPAIR_TOL,
    ROTATION_TOL,
    Intrinsics,
    Pose,
    compose,
    invert,
    nearest_rotation,
    rotation_defect,
)
from .errors import FileFormatError, PoseError, ShapeMismatchError

_DEPTH_MODES = ("I;16", "I;16B", "I;16L", "I")
_COLOR_SUFFIXES = (".png", ".jpg", ".jpeg")


@dataclass(frozen=True)
class Profile:
    name: str
    depth_mm_per_unit: float
    translation_mm_per_unit: float


PROFILES = {
    "piv3cams": Profile("piv3cams", 1.0, 1.0),
    "kitti": Profile("kitti", 1000.0 / 256.0, 1000.0),
}


def get_profile(profile) -> Profile:
    if isinstance(profile, Profile):
        return profile
    try:
        return PROFILES[profile]
    except KeyError:
        raise ValueError(f"unknown profile {profile!r}, expected one of {sorted(PROFILES)}") from None


def load_depth_png(path, profile="piv3cams") -> np.ndarray:
    """Read a 16-bit single-channel depth PNG into millimeters (float, 0 = missing)."""
    prof = get_profile(profile)
    img = PILImage.open(path)
    if img.mode not in _DEPTH_MODES:
        raise FileFormatError(f"{path}: expected 16-bit single-channel PNG, got mode {img.mode!r}")
    raw = np.asarray(img)
    if raw.ndim != 2:
        raise FileFormatError(f"{path}: depth image must be single-channel")
    if raw.min() < 0 or raw.max() > 65535:
        raise FileFormatError(f"{path}: values outside the 16-bit range")
    return raw.astype(float) * prof.depth_mm_per_unit


def save_depth_png(path, depth_mm: np.ndarray, profile="piv3cams"):
    """Write a depth map (mm) as a 16-bit PNG, rounding to the profile's storage unit."""
    prof = get_profile(profile)
    depth_mm = np.asarray(depth_mm, dtype=float)
    if depth_mm.ndim != 2:
        raise ShapeMismatchError("depth map must be 2-D")
    if not np.isfinite(depth_mm).all() or depth_mm.min() < 0:
        raise ValueError("depth values must be finite and >= 0")
    units = np.round(depth_mm / prof.depth_mm_per_unit)
    if units.max() > 65535:
        raise ValueError(f"depth {depth_mm.max():.0f} mm does not fit 16 bits under profile {prof.name}")
    PILImage.fromarray(units.astype(np.uint16)).save(path)


def load_image(path) -> np.ndarray:
    """Read a color image as float RGB in [0, 1], shape (H, W, 3)."""
    img = PILImage.open(path).convert("RGB")
    return np.asarray(img).astype(float) / 255.0


def save_image(path, image: np.ndarray):
    """Write a [0, 1] image (grayscale or RGB) as 8-bit PNG."""
    arr = np.asarray(image, dtype=float)
    if arr.min() < 0 or arr.max() > 1:
        raise ValueError("image values must lie in [0, 1]")
    data = np.round(arr * 255.0).astype(np.uint8)
    PILImage.fromarray(data).save(path)


def load_pose_file(path, profile="piv3cams"):
    """Parse world-frame poses, one 3x4 row-major line per frame.

    Rotations off orthonormal by more than the repair tolerance are rejected;
    smaller defects (text files carry limited digits) are repaired by
    nearest-rotation projection and reported. Returns (poses, warnings).
    """
    prof = get_profile(profile)
    poses = []
    warnings = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 12:
                raise FileFormatError(f"{path}:{lineno}: expected 12 values, got {len(parts)}")
            try:
                vals = np.array([float(p) for p in parts]).reshape(3, 4)
            except ValueError:
                raise FileFormatError(f"{path}:{lineno}: non-numeric pose entry") from None
            r = vals[:, :3]
            t = vals[:, 3] * prof.translation_mm_per_unit
            defect = rotation_defect(r)
            if defect > ROTATION_REPAIR_TOL:
                raise PoseError(f"{path}:{lineno}: rotation defect {defect:.3g} exceeds {ROTATION_REPAIR_TOL:g}")
            if defect > ROTATION_TOL:
                r = nearest_rotation(r)
                warnings.append(f"{path}:{lineno}: rotation re-orthonormalized (defect {defect:.3g})")
            poses.append(Pose(r, t))
    return poses, warnings


def save_pose_file(path, poses, profile="piv3cams"):
    prof = get_profile(profile)
    with open(path, "w") as f:
        for pose in poses:
            row = np.hstack([pose.rotation, (pose.translation / prof.translation_mm_per_unit)[:, None]])
            f.write(" ".join(f"{v:.17g}" for v in row.reshape(-1)) + "\n")


def load_calib(path) -> Intrinsics:
    """Parse the calibration file: exactly one line "K: fx fy cx cy"."""
    k_lines = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line.startswith("K:"):
                k_lines.append(line)
    if len(k_lines) != 1:
        raise FileFormatError(f"{path}: expected exactly one 'K:' line, found {len(k_lines)}")
    parts = k_lines[0][2:].split()
    if len(parts) != 4:
        raise FileFormatError(f"{path}: 'K:' line must carry 4 values (fx fy cx cy)")
    try:
        fx, fy, cx, cy = (float(p) for p in parts)
    except ValueError:
        raise FileFormatError(f"{path}: non-numeric intrinsics") from None
    try:
        return Intrinsics(fx, fy, cx, cy)
    except ValueError as e:
        raise FileFormatError(f"{path}: {e}") from None


def save_calib(path, intrinsics: Intrinsics):
    with open(path, "w") as f:
        f.write(f"K: {intrinsics.fx:.17g} {intrinsics.fy:.17g} {intrinsics.cx:.17g} {intrinsics.cy:.17g}\n")


def center_crop(grid: np.ndarray, side: int, intrinsics: Intrinsics):
    """Crop a centered side x side square and shift the principal point accordingly.

    The crop origin is (floor((W-side)/2), floor((H-side)/2)); a pixel (u, v)
    of the crop back-projects along the same ray as pixel (u+ox, v+oy) of the
    original frame.
    """
    grid = np.asarray(grid)
    h, w = grid.shape[:2]
    if h < side or w < side:
        raise ShapeMismatchError(f"cannot crop {side}x{side} from {h}x{w}")
    ox = (w - side) // 2
    oy = (h - side) // 2
    return grid[oy : oy + side, ox : ox + side].copy(), intrinsics.shifted(ox, oy)


@dataclass(frozen=True)
class FrameRecord:
    index: int
    image_path: Path
    depth_path: Path
    pose: Pose


@dataclass(frozen=True)
class SceneIndex:
    scene_id: str
    frames: list
    intrinsics: Intrinsics
    profile: Profile
    warnings: list = field(default_factory=list)

    def __len__(self):
        return len(self.frames)


def load_scene(scene_dir, profile="piv3cams") -> SceneIndex:
    """Index a scene directory; image/depth/pose counts must agree."""
    prof = get_profile(profile)
    scene_dir = Path(scene_dir)
    color_dir = scene_dir / "color"
    depth_dir = scene_dir / "depth"
    for d in (color_dir, depth_dir):
        if not d.is_dir():
            raise FileFormatError(f"{scene_dir}: missing directory {d.name}/")
    images = sorted(p for p in color_dir.iterdir() if p.suffix.lower() in _COLOR_SUFFIXES)
    depths = sorted(depth_dir.glob("*.png"))
    poses, warnings = load_pose_file(scene_dir / "pose.txt", prof)
    if not (len(images) == len(depths) == len(poses)):
        raise FileFormatError(
            f"{scene_dir}: {len(images)} images, {len(depths)} depths, {len(poses)} poses do not agree"
        )
    intrinsics = load_calib(scene_dir / "calib.txt")
    frames = [FrameRecord(i, img, dep, pose) for i, (img, dep, pose) in enumerate(zip(images, depths, poses))]
    return SceneIndex(scene_dir.name, frames, intrinsics, prof, warnings)


@dataclass(frozen=True)
class FramePair:
    """A source/target frame pair with world poses and their relative pose.

    relative_pose = invert(src_pose) o tgt_pose: the target camera's pose
    expressed in the source camera frame. Acting on points it maps
    target-frame coordinates into the source frame, which is exactly what
    inverse warping consumes; the forward-warp direction is its inverse.
    """

    src_image: np.ndarray
    src_depth: np.ndarray
    src_pose: Pose
    tgt_image: np.ndarray
    tgt_depth: np.ndarray | None
    tgt_pose: Pose
    relative_pose: Pose
    frame_distance: int
    intrinsics: Intrinsics
    scene_id: str = "scene"
    src_index: int = 0
    tgt_index: int = 1

    def __post_init__(self):
        if abs(self.frame_distance) < 1:
            raise ValueError("frame_distance must be a nonzero frame count")


def relative_pose_from_world(src_pose: Pose, tgt_pose: Pose) -> Pose:
    return compose(invert(src_pose), tgt_pose)


def load_pair(scene: SceneIndex, src_index: int, tgt_index: int) -> FramePair:
    src = scene.frames[src_index]
    tgt = scene.frames[tgt_index]
    return FramePair(
        src_image=load_image(src.image_path),
        src_depth=load_depth_png(src.depth_path, scene.profile),
        src_pose=src.pose,
        tgt_image=load_image(tgt.image_path),
        tgt_depth=load_depth_png(tgt.depth_path, scene.profile),
        tgt_pose=tgt.pose,
        relative_pose=relative_pose_from_world(src.pose, tgt.pose),
        frame_distance=tgt_index - src_index,
        intrinsics=scene.intrinsics,
        scene_id=scene.scene_id,
        src_index=src_index,
        tgt_index=tgt_index,
    )


def sample_pair_indices(n_frames: int, max_distance: int, count: int, seed: int):
    """Draw (src, tgt) index pairs with uniform signed frame distance.

    Deterministic for a given seed. Distances are uniform over
    {-max_distance..-1, 1..max_distance}; the source index is uniform over
    the positions that keep the target in range.
    """
    if max_distance < 1:
        raise ValueError("max_distance must be >= 1")
    if n_frames <= max_distance:
        raise ValueError(f"scene with {n_frames} frames is too short for max_distance {max_distance}")
    distances = [d for d in range(-max_distance, max_distance + 1) if d != 0]
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(count):
        d = distances[int(rng.integers(len(distances)))]
        lo = max(0, -d)
        hi = n_frames - 1 - max(0, d)
        src = int(rng.integers(lo, hi + 1))
        pairs.append((src, src + d))
    return pairs


def sample_pairs(scene: SceneIndex, max_distance: int, count: int, seed: int):
    """Sample frame pairs from a scene; see sample_pair_indices for the distribution."""
    return [load_pair(scene, i, j) for i, j in sample_pair_indices(len(scene), max_distance, count, seed)]
