"""Pixelwise fusion of the warped image with a pixel-branch image.

Three rules are provided. Note the mask polarity: the predicted-mask rule
selects the pixel-branch image where the mask is 1, while the visibility rule
selects the warped image where the mask is 1. Both are kept as-is rather than
unified; they are duals under mask inversion.
"""

import numpy as np

from .errors import ShapeMismatchError


def _check_pair(warped: np.ndarray, pixel: np.ndarray):
    warped = np.asarray(warped, dtype=float)
    pixel = np.asarray(pixel, dtype=float)
    if warped.shape != pixel.shape:
        raise ShapeMismatchError(f"warped {warped.shape} and pixel {pixel.shape} differ")
    return warped, pixel


def _check_mask(mask: np.ndarray, spatial_shape) -> np.ndarray:
    m = np.asarray(mask, dtype=float)
    if m.shape != spatial_shape:
        raise ShapeMismatchError(f"mask {m.shape} does not match image grid {spatial_shape}")
    if m.min() < 0.0 or m.max() > 1.0:
        raise ValueError("mask values must lie in [0, 1]")
    return m


def fuse_predicted_mask(warped: np.ndarray, pixel: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """(1 - mask) * warped + mask * pixel, elementwise; mask=1 selects the pixel branch."""
    warped, pixel = _check_pair(warped, pixel)
    m = _check_mask(mask, warped.shape[:2])
    if warped.ndim == 3:
        m = m[..., None]
    return (1.0 - m) * warped + m * pixel


def fuse_average(warped: np.ndarray, pixel: np.ndarray) -> np.ndarray:
    """Plain 50/50 average of the two branches."""
    warped, pixel = _check_pair(warped, pixel)
    return 0.5 * warped + 0.5 * pixel


def fuse_visibility(warped: np.ndarray, pixel: np.ndarray, visibility: np.ndarray) -> np.ndarray:
    """visibility * warped + (1 - visibility) * pixel; mask=1 selects the warped image."""
    warped, pixel = _check_pair(warped, pixel)
    m = _check_mask(visibility, warped.shape[:2])
    if warped.ndim == 3:
        m = m[..., None]
    return m * warped + (1.0 - m) * pixel
