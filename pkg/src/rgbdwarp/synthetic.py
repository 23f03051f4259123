"""Analytic RGB-D scene rendering for tests, fixtures, and benchmarks.

Scenes are checkerboard-textured planes or spheres with closed-form ray
intersections, so rendered depth is exact and warping error measured against
a rendered target isolates resampling error. Rays are cast through pixel
centers (integer pixel (i, j) has continuous coordinates u = i, v = j),
matching the projection convention of the camera module.
"""

import json
from dataclasses import dataclass

import numpy as np

from .camera import Intrinsics, Pose, compose
from .dataset import FramePair, relative_pose_from_world

_DEFAULT_A = (0.9, 0.55, 0.2)
_DEFAULT_B = (0.1, 0.35, 0.75)


@dataclass(frozen=True)
class CheckerPlane:
    """Infinite plane through `point` with `normal`, checkered with the given period (mm)."""

    point: tuple
    normal: tuple
    period: float
    color_a: tuple = _DEFAULT_A
    color_b: tuple = _DEFAULT_B

    def __post_init__(self):
        if np.linalg.norm(self.normal) == 0:
            raise ValueError("plane normal must be nonzero")
        if self.period <= 0:
            raise ValueError("checker period must be positive")


@dataclass(frozen=True)
class CheckerSphere:
    center: tuple
    radius: float
    period: float
    color_a: tuple = _DEFAULT_A
    color_b: tuple = _DEFAULT_B

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.period <= 0:
            raise ValueError("checker period must be positive")


AnalyticScene = CheckerPlane | CheckerSphere


def _plane_basis(normal: np.ndarray):
    """Deterministic orthonormal in-plane basis for texture coordinates."""
    n = normal / np.linalg.norm(normal)
    seed = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(n, seed)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    return e1, e2


def _checker(idx_a: np.ndarray, idx_b: np.ndarray, color_a, color_b) -> np.ndarray:
    parity = (np.floor(idx_a).astype(np.int64) + np.floor(idx_b).astype(np.int64)) % 2
    a = np.asarray(color_a, dtype=float)
    b = np.asarray(color_b, dtype=float)
    return np.where(parity[..., None] == 0, a, b)


def render(scene: AnalyticScene, pose: Pose, intrinsics: Intrinsics, width: int, height: int):
    """Ray-cast the scene from a camera with the given world pose.

    Returns (image, depth): image is (H, W, 3) in [0, 1]; depth is (H, W) in
    millimeters with 0 where the ray misses the scene. Depth is the hit
    point's z in the camera frame, exact up to floating point.
    """
    uu, vv = np.meshgrid(np.arange(width, dtype=float), np.arange(height, dtype=float))
    dirs_cam = np.stack(
        [(uu - intrinsics.cx) / intrinsics.fx, (vv - intrinsics.cy) / intrinsics.fy, np.ones_like(uu)],
        axis=-1,
    )
    # dir z-component is 1 in the camera frame, so the ray parameter s at the
    # hit point equals the camera-frame depth directly.
    dirs = dirs_cam @ pose.rotation.T
    origin = pose.translation

    if isinstance(scene, CheckerPlane):
        n = np.asarray(scene.normal, dtype=float)
        p0 = np.asarray(scene.point, dtype=float)
        denom = dirs @ n
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(denom != 0, (p0 - origin) @ n / denom, -1.0)
        valid = (denom != 0) & (s > 0)
        hit = origin + s[..., None] * dirs
        e1, e2 = _plane_basis(n)
        rel = hit - p0
        colors = _checker((rel @ e1) / scene.period, (rel @ e2) / scene.period, scene.color_a, scene.color_b)
    else:
        c = np.asarray(scene.center, dtype=float)
        oc = origin - c
        a = np.einsum("...k,...k->...", dirs, dirs)
        b = 2.0 * (dirs @ oc)
        c0 = oc @ oc - scene.radius**2
        disc = b * b - 4.0 * a * c0
        sq = np.sqrt(np.maximum(disc, 0.0))
        s_near = (-b - sq) / (2.0 * a)
        s_far = (-b + sq) / (2.0 * a)
        s = np.where(s_near > 0, s_near, s_far)
        valid = (disc >= 0) & (s > 0)
        hit = origin + s[..., None] * dirs
        m = (hit - c) / scene.radius
        theta = np.arccos(np.clip(m[..., 1], -1.0, 1.0))
        phi = np.arctan2(m[..., 2], m[..., 0])
        arc = scene.period / scene.radius
        colors = _checker(theta / arc, phi / arc, scene.color_a, scene.color_b)

    depth = np.where(valid, s, 0.0)
    image = np.where(valid[..., None], colors, 0.0)
    return image, depth


def make_pair(
    scene: AnalyticScene,
    pose_src: Pose,
    pose_tgt: Pose,
    intrinsics: Intrinsics,
    width: int,
    height: int,
    frame_distance: int = 1,
) -> FramePair:
    """Render a source/target pair with exact ground truth for both views."""
    src_image, src_depth = render(scene, pose_src, intrinsics, width, height)
    tgt_image, tgt_depth = render(scene, pose_tgt, intrinsics, width, height)
    return FramePair(
        src_image=src_image,
        src_depth=src_depth,
        src_pose=pose_src,
        tgt_image=tgt_image,
        tgt_depth=tgt_depth,
        tgt_pose=pose_tgt,
        relative_pose=relative_pose_from_world(pose_src, pose_tgt),
        frame_distance=frame_distance,
        intrinsics=intrinsics,
        scene_id="synthetic",
        src_index=0,
        tgt_index=frame_distance,
    )


def rotation_about_y(degrees: float) -> np.ndarray:
    t = np.deg2rad(degrees)
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def generate_trajectory(n_frames: int, translation_step, yaw_step_deg: float = 0.0):
    """World poses for a camera moving by a fixed step in its own frame each frame."""
    if n_frames < 1:
        raise ValueError("need at least one frame")
    step = Pose(rotation_about_y(yaw_step_deg), np.asarray(translation_step, dtype=float))
    poses = [Pose.identity()]
    for _ in range(n_frames - 1):
        poses.append(compose(poses[-1], step))
    return poses


def scene_from_config(cfg: dict) -> AnalyticScene:
    """Build a scene from the documented JSON schema (see README)."""
    geometry = cfg.get("geometry")
    common = {k: tuple(v) if isinstance(v, list) else v for k, v in cfg.items() if k in ("color_a", "color_b")}
    if geometry == "plane":
        return CheckerPlane(tuple(cfg["point"]), tuple(cfg["normal"]), float(cfg["period"]), **common)
    if geometry == "sphere":
        return CheckerSphere(tuple(cfg["center"]), float(cfg["radius"]), float(cfg["period"]), **common)
    raise ValueError(f"unknown geometry {geometry!r}, expected 'plane' or 'sphere'")


def load_synth_config(path):
    """Parse a full synthesis config: scene + camera + trajectory.

    Returns (scene, intrinsics, width, height, poses).
    """
    with open(path) as f:
        cfg = json.load(f)
    scene = scene_from_config(cfg["scene"])
    cam = cfg["camera"]
    intrinsics = Intrinsics(float(cam["fx"]), float(cam["fy"]), float(cam["cx"]), float(cam["cy"]))
    width, height = int(cam["width"]), int(cam["height"])
    traj = cfg["trajectory"]
    poses = generate_trajectory(
        int(traj["frames"]),
        traj.get("translation_step", [0.0, 0.0, 0.0]),
        float(traj.get("yaw_step_deg", 0.0)),
    )
    return scene, intrinsics, width, height, poses
