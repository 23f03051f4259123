"""Shared test utilities: random rigid transforms and a reference box blur."""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from rgbdwarp.camera import Pose, nearest_rotation


def random_rotation(rng):
    return nearest_rotation(rng.normal(size=(3, 3)))


def random_pose(rng, translation_scale=1000.0):
    return Pose(random_rotation(rng), rng.uniform(-translation_scale, translation_scale, size=3))


def small_motion_pose(rng, angle_deg=3.0, translation=50.0):
    """A pose near identity, for warps that should keep most pixels in frame."""
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = np.deg2rad(rng.uniform(-angle_deg, angle_deg))
    k = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    rot = np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * (k @ k)
    return Pose(nearest_rotation(rot), rng.uniform(-translation, translation, size=3))


def box_blur(image, radius):
    pad = np.pad(image, ((radius, radius), (radius, radius), (0, 0)), mode="edge")
    win = sliding_window_view(pad, (2 * radius + 1, 2 * radius + 1), axis=(0, 1))
    return win.mean(axis=(-2, -1))
