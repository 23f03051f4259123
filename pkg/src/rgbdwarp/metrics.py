"""Image metrics and loss formulas over [0, 1]-normalized images.

L1 is the per-pixel mean absolute difference. SSIM slides an NxN window with
stride 1 over valid positions only and averages the per-window index; the
stabilization constants assume unit dynamic range. The loss functions are
pure formulas over already-computed values (discriminator scores and feature
vectors are produced elsewhere and passed in).
"""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ShapeMismatchError


@dataclass(frozen=True)
class SsimParams:
    window: int = 11
    c1: float = 0.01**2
    c2: float = 0.03**2
    weighting: str = "uniform"  # "uniform" or "gaussian"
    sigma: float = 1.5

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError(f"window must be odd and >= 3, got {self.window}")
        if self.c1 <= 0 or self.c2 <= 0:
            raise ValueError("stabilization constants must be positive")
        if self.weighting not in ("uniform", "gaussian"):
            raise ValueError(f"unknown weighting {self.weighting!r}")
        if self.weighting == "gaussian" and self.sigma <= 0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class LossWeights:
    lambda_l1: float = 10.0
    lambda_gan: float = 2.0
    lambda_vgg: float = 0.5

    def __post_init__(self):
        if min(self.lambda_l1, self.lambda_gan, self.lambda_vgg) < 0:
            raise ValueError("loss weights must be nonnegative")


def l1_error(x: np.ndarray, y: np.ndarray, mask: np.ndarray | None = None) -> float:
    """Mean absolute difference per pixel (channels averaged).

    With a mask, the mean is taken over mask-weighted pixels only, which is
    what sparse-depth evaluation needs; the default is the full frame.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ShapeMismatchError(f"images {x.shape} and {y.shape} differ")
    diff = np.abs(x - y)
    if diff.ndim == 3:
        diff = diff.mean(axis=2)
    if mask is None:
        return float(diff.mean())
    m = np.asarray(mask, dtype=float)
    if m.shape != diff.shape:
        raise ShapeMismatchError(f"mask {m.shape} does not match image grid {diff.shape}")
    total = m.sum()
    if total == 0:
        raise ValueError("mask selects no pixels")
    return float((diff * m).sum() / total)


def _window_kernel(params: SsimParams) -> np.ndarray | None:
    if params.weighting == "uniform":
        return None
    n = params.window
    ax = np.arange(n) - (n - 1) / 2.0
    g = np.exp(-(ax**2) / (2.0 * params.sigma**2))
    k = np.outer(g, g)
    return k / k.sum()


def _ssim_plane(x: np.ndarray, y: np.ndarray, params: SsimParams) -> float:
    n = params.window
    wx = sliding_window_view(x, (n, n))
    wy = sliding_window_view(y, (n, n))
    kernel = _window_kernel(params)
    if kernel is None:
        mu_x = wx.mean(axis=(-2, -1))
        mu_y = wy.mean(axis=(-2, -1))
        xx = (wx * wx).mean(axis=(-2, -1))
        yy = (wy * wy).mean(axis=(-2, -1))
        xy = (wx * wy).mean(axis=(-2, -1))
    else:
        mu_x = np.einsum("ijkl,kl->ij", wx, kernel)
        mu_y = np.einsum("ijkl,kl->ij", wy, kernel)
        xx = np.einsum("ijkl,kl->ij", wx * wx, kernel)
        yy = np.einsum("ijkl,kl->ij", wy * wy, kernel)
        xy = np.einsum("ijkl,kl->ij", wx * wy, kernel)
    var_x = xx - mu_x * mu_x
    var_y = yy - mu_y * mu_y
    cov = xy - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + params.c1) * (2.0 * cov + params.c2)
    den = (mu_x * mu_x + mu_y * mu_y + params.c1) * (var_x + var_y + params.c2)
    return float((num / den).mean())


def ssim(x: np.ndarray, y: np.ndarray, params: SsimParams | None = None) -> float:
    """Mean SSIM over all valid window positions; multichannel images average per-channel scores."""
    if params is None:
        params = SsimParams()
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ShapeMismatchError(f"images {x.shape} and {y.shape} differ")
    h, w = x.shape[:2]
    if h < params.window or w < params.window:
        raise ShapeMismatchError(f"image {h}x{w} is smaller than the {params.window}x{params.window} window")
    if x.ndim == 2:
        return _ssim_plane(x, y, params)
    return float(np.mean([_ssim_plane(x[..., c], y[..., c], params) for c in range(x.shape[2])]))


def recon_loss(pred: np.ndarray, warped: np.ndarray, pixel: np.ndarray, tgt: np.ndarray) -> float:
    """Sum of the L1 errors of the fused, warped, and pixel-branch images against the target."""
    return l1_error(pred, tgt) + l1_error(warped, tgt) + l1_error(pixel, tgt)


def lsgan_loss(score: float) -> float:
    """Least-squares adversarial term (1 - score)^2 for a discriminator score on the pixel branch."""
    score = float(score)
    if not np.isfinite(score):
        raise ValueError("discriminator score must be finite")
    return (1.0 - score) ** 2


def perceptual_loss(f_tgt: np.ndarray, f_pixel: np.ndarray) -> float:
    """Euclidean distance between two externally-extracted feature vectors."""
    a = np.asarray(f_tgt, dtype=float).reshape(-1)
    b = np.asarray(f_pixel, dtype=float).reshape(-1)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"feature lengths {a.size} and {b.size} differ")
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise ValueError("feature vectors must be finite")
    return float(np.linalg.norm(a - b))


def total_loss(recon: float, lsgan: float, vgg: float, weights: LossWeights | None = None) -> float:
    """Weighted sum of the three loss terms."""
    if weights is None:
        weights = LossWeights()
    terms = (float(recon), float(lsgan), float(vgg))
    if not all(np.isfinite(t) for t in terms):
        raise ValueError("loss terms must be finite")
    return weights.lambda_l1 * terms[0] + weights.lambda_gan * terms[1] + weights.lambda_vgg * terms[2]
