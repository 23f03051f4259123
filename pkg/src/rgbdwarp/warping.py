"""Inverse and forward warping of RGB-D frames.

Inverse warping computes each target pixel by lifting it through the target
depth, moving it into the source camera, projecting, and bilinearly sampling
the source image. Forward warping splats source depths into the target grid
with a z-buffer, producing a sparse depth map and a visibility mask.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .camera import Intrinsics, Pose, backproject, invert
from .errors import ShapeMismatchError


def _gather(image: np.ndarray, xi: np.ndarray, yi: np.ndarray) -> np.ndarray:
    """Pixel values at integer coordinates; anything outside the image reads as 0."""
    h, w = image.shape[:2]
    inb = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
    vals = image[np.clip(yi, 0, h - 1), np.clip(xi, 0, w - 1)]
    if image.ndim == 3:
        return vals * inb[..., None]
    return vals * inb


def bilinear_sample(image: np.ndarray, u, v) -> np.ndarray:
    """Sample an image at continuous coordinates with four-neighbor bilinear weights.

    Each source pixel (xs, ys) contributes with weight
    max(0, 1 - |xs - u|) * max(0, 1 - |ys - v|), which is nonzero only for the
    four pixels surrounding (u, v). Samples falling fully outside the image
    return 0 in all channels. u and v broadcast; multichannel images yield a
    trailing channel axis.
    """
    image = np.asarray(image, dtype=float)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    x0 = np.floor(u).astype(int)
    y0 = np.floor(v).astype(int)
    fu = u - x0
    fv = v - y0
    w00 = (1.0 - fu) * (1.0 - fv)
    w10 = fu * (1.0 - fv)
    w01 = (1.0 - fu) * fv
    w11 = fu * fv
    if image.ndim == 3:
        w00, w10, w01, w11 = (w[..., None] for w in (w00, w10, w01, w11))
    return (
        w00 * _gather(image, x0, y0)
        + w10 * _gather(image, x0 + 1, y0)
        + w01 * _gather(image, x0, y0 + 1)
        + w11 * _gather(image, x0 + 1, y0 + 1)
    )


def bilinear_sample_grad(image: np.ndarray, u, v):
    """Analytic spatial derivative (d/du, d/dv) of bilinear_sample.

    The sampling kernel is piecewise linear, so inside a grid cell the
    derivative is constant; values at integer coordinates are one-sided.
    """
    image = np.asarray(image, dtype=float)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    x0 = np.floor(u).astype(int)
    y0 = np.floor(v).astype(int)
    fu = u - x0
    fv = v - y0
    v00 = _gather(image, x0, y0)
    v10 = _gather(image, x0 + 1, y0)
    v01 = _gather(image, x0, y0 + 1)
    v11 = _gather(image, x0 + 1, y0 + 1)
    if image.ndim == 3:
        fu = fu[..., None]
        fv = fv[..., None]
    d_du = (1.0 - fv) * (v10 - v00) + fv * (v11 - v01)
    d_dv = (1.0 - fu) * (v01 - v00) + fu * (v11 - v10)
    return d_du, d_dv


def inverse_warp(src: np.ndarray, tgt_depth: np.ndarray, t_tgt_to_src: Pose, intrinsics: Intrinsics):
    """Warp a source image into the target view using the target depth map.

    For every target pixel with depth > 0 the pixel is back-projected,
    transformed into the source camera, projected, and the source image is
    bilinearly sampled there. Returns the warped image and a mask that is 1
    where the depth is valid, the transformed point lies in front of the
    source camera, and the sampling footprint intersects the source image;
    everywhere else the output is 0 with mask 0.
    """
    src = np.asarray(src, dtype=float)
    depth = np.asarray(tgt_depth, dtype=float)
    if src.shape[:2] != depth.shape:
        raise ShapeMismatchError(f"source {src.shape[:2]} and target depth {depth.shape} differ")
    h, w = depth.shape
    warped = np.zeros_like(src)
    mask = np.zeros((h, w))

    rows, cols = np.nonzero(depth > 0)
    if rows.size == 0:
        return warped, mask

    points = backproject(cols.astype(float), rows.astype(float), depth[rows, cols], intrinsics)
    cam = t_tgt_to_src.apply(points)
    z = cam[:, 2]
    front = z > 0
    us = np.empty_like(z)
    vs = np.empty_like(z)
    us[front] = intrinsics.fx * cam[front, 0] / z[front] + intrinsics.cx
    vs[front] = intrinsics.fy * cam[front, 1] / z[front] + intrinsics.cy
    # Footprint test: a bilinear weight is nonzero iff the coordinate lies
    # strictly within one pixel of some in-image integer position.
    hit = front.copy()
    hit[front] &= (us[front] > -1) & (us[front] < w) & (vs[front] > -1) & (vs[front] < h)

    warped[rows[hit], cols[hit]] = bilinear_sample(src, us[hit], vs[hit])
    mask[rows[hit], cols[hit]] = 1.0
    return warped, mask


def forward_warp_depth(src_depth: np.ndarray, t_src_to_tgt: Pose, intrinsics: Intrinsics):
    """Splat valid source depths into the target grid; z-buffer keeps the nearest.

    Every source pixel with depth > 0 is back-projected, moved into the
    target camera, projected, and written to the nearest integer target pixel
    as the transformed point's z. Collisions keep the smallest z. Returns the
    sparse warped depth (0 where nothing landed) and the visibility mask
    (exactly 1 where at least one source pixel landed).
    """
    depth = np.asarray(src_depth, dtype=float)
    h, w = depth.shape
    zbuf = np.full((h, w), np.inf)

    rows, cols = np.nonzero(depth > 0)
    if rows.size:
        points = backproject(cols.astype(float), rows.astype(float), depth[rows, cols], intrinsics)
        cam = t_src_to_tgt.apply(points)
        z = cam[:, 2]
        front = z > 0
        cam, z = cam[front], z[front]
        u = intrinsics.fx * cam[:, 0] / z + intrinsics.cx
        v = intrinsics.fy * cam[:, 1] / z + intrinsics.cy
        # round half up so splat targets do not depend on banker's rounding
        ui = np.floor(u + 0.5).astype(int)
        vi = np.floor(v + 0.5).astype(int)
        inb = (ui >= 0) & (ui < w) & (vi >= 0) & (vi < h)
        np.minimum.at(zbuf, (vi[inb], ui[inb]), z[inb])

    landed = np.isfinite(zbuf)
    return np.where(landed, zbuf, 0.0), landed.astype(float)


def warp_from_source_depth(src: np.ndarray, src_depth: np.ndarray, t_src_to_tgt: Pose, intrinsics: Intrinsics):
    """Warp using only a source RGB-D frame: forward-warp the depth, then inverse-warp.

    Returns (warped image, warped sparse target depth, forward-warp visibility mask).
    """
    src = np.asarray(src, dtype=float)
    depth = np.asarray(src_depth, dtype=float)
    if src.shape[:2] != depth.shape:
        raise ShapeMismatchError(f"source {src.shape[:2]} and source depth {depth.shape} differ")
    warped_depth, visibility = forward_warp_depth(depth, t_src_to_tgt, intrinsics)
    warped, _ = inverse_warp(src, warped_depth, invert(t_src_to_tgt), intrinsics)
    return warped, warped_depth, visibility


def densify_mask(mask: np.ndarray, radius: int) -> np.ndarray:
    """Binary morphological closing with a square element of side 2*radius + 1.

    Dilation then erosion, computed as if the mask continued as zeros beyond
    its borders (plane closing), which keeps the operation extensive
    (output >= input) and idempotent. Fills holes up to roughly the element
    size in a sparse visibility mask.
    """
    m = np.asarray(mask, dtype=float)
    if not np.all((m == 0.0) | (m == 1.0)):
        raise ValueError("densify_mask requires a binary mask")
    radius = int(radius)
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if radius == 0:
        return m.copy()
    side = 2 * radius + 1
    padded = np.pad(m > 0.5, 2 * radius)
    dilated = sliding_window_view(padded, (side, side)).any(axis=(-2, -1))
    closed = sliding_window_view(dilated, (side, side)).all(axis=(-2, -1))
    return closed.astype(float)
