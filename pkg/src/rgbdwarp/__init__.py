"""Deterministic geometric core for depth-based novel view synthesis.

Back-projection and pose transforms, inverse/forward warping with bilinear
resampling, visibility masks, fusion rules, and L1/SSIM evaluation over RGB-D
frame pairs.
"""

from .camera import (
    Intrinsics,
    Pose,
    backproject,
    compose,
    invert,
    nearest_rotation,
    project,
    rotation_defect,
    transform_latent,
    transform_point,
)
from .dataset import (
    PROFILES,
    FramePair,
    SceneIndex,
    center_crop,
    load_calib,
    load_depth_png,
    load_image,
    load_pair,
    load_pose_file,
    load_scene,
    relative_pose_from_world,
    sample_pairs,
    save_calib,
    save_depth_png,
    save_image,
    save_pose_file,
)
from .errors import (
    BehindCameraError,
    FileFormatError,
    InvalidDepthError,
    PoseError,
    ShapeMismatchError,
)
from .fusion import fuse_average, fuse_predicted_mask, fuse_visibility
from .metrics import (
    LossWeights,
    SsimParams,
    l1_error,
    lsgan_loss,
    perceptual_loss,
    recon_loss,
    ssim,
    total_loss,
)
from .synthetic import (
    CheckerPlane,
    CheckerSphere,
    generate_trajectory,
    make_pair,
    render,
    rotation_about_y,
)
from .warping import (
    bilinear_sample,
    bilinear_sample_grad,
    densify_mask,
    forward_warp_depth,
    inverse_warp,
    warp_from_source_depth,
)

__version__ = "0.1.0"
