from collections import Counter

import numpy as np
import pytest
from PIL import Image as PILImage

from helpers import random_pose
from rgbdwarp.camera import Intrinsics, Pose, backproject, compose
from rgbdwarp.dataset import (
    FramePair,
    center_crop,
    load_calib,
    load_depth_png,
    load_image,
    load_pair,
    load_pose_file,
    load_scene,
    relative_pose_from_world,
    sample_pair_indices,
    sample_pairs,
    save_calib,
    save_depth_png,
    save_image,
    save_pose_file,
)
from rgbdwarp.errors import FileFormatError, PoseError, ShapeMismatchError
from rgbdwarp.synthetic import CheckerPlane, generate_trajectory, render


class TestDepthPng:
    def test_roundtrip_bit_identical(self, tmp_path):
        rng = np.random.default_rng(0)
        depth = rng.integers(0, 65536, size=(24, 32)).astype(float)
        path = tmp_path / "d.png"
        save_depth_png(path, depth)
        assert np.array_equal(load_depth_png(path), depth)

    def test_zero_means_missing(self, tmp_path):
        depth = np.zeros((4, 4))
        depth[1, 1] = 1500.0
        path = tmp_path / "d.png"
        save_depth_png(path, depth)
        loaded = load_depth_png(path)
        assert loaded[0, 0] == 0.0
        assert loaded[1, 1] == 1500.0  # millimeters stored as-is

    def test_kitti_scaling(self, tmp_path):
        path = tmp_path / "d.png"
        PILImage.fromarray(np.full((2, 2), 25600, dtype=np.uint16)).save(path)
        loaded = load_depth_png(path, "kitti")
        # 25600 / 256 m = 100 m = 100000 mm
        assert loaded[0, 0] == 100000.0
        roundtrip = tmp_path / "d2.png"
        save_depth_png(roundtrip, loaded, "kitti")
        assert np.array_equal(np.asarray(PILImage.open(roundtrip)), np.full((2, 2), 25600))

    def test_rejects_8bit(self, tmp_path):
        path = tmp_path / "bad.png"
        PILImage.fromarray(np.zeros((4, 4), dtype=np.uint8)).save(path)
        with pytest.raises(FileFormatError):
            load_depth_png(path)

    def test_rejects_multichannel(self, tmp_path):
        path = tmp_path / "bad.png"
        PILImage.fromarray(np.zeros((4, 4, 3), dtype=np.uint8)).save(path)
        with pytest.raises(FileFormatError):
            load_depth_png(path)

    def test_save_rejects_out_of_range(self, tmp_path):
        with pytest.raises(ValueError):
            save_depth_png(tmp_path / "d.png", np.full((2, 2), 70000.0))
        with pytest.raises(ValueError):
            save_depth_png(tmp_path / "d.png", np.full((2, 2), -1.0))

    def test_unknown_profile(self, tmp_path):
        with pytest.raises(ValueError):
            load_depth_png(tmp_path / "d.png", "nyuv2")


class TestImagePng:
    def test_roundtrip_through_8bit(self, tmp_path):
        rng = np.random.default_rng(1)
        img = rng.integers(0, 256, size=(8, 8, 3)).astype(float) / 255.0
        path = tmp_path / "i.png"
        save_image(path, img)
        assert np.abs(load_image(path) - img).max() < 1e-12

    def test_range_enforced(self, tmp_path):
        with pytest.raises(ValueError):
            save_image(tmp_path / "i.png", np.full((4, 4), 1.5))


class TestPoseFile:
    def test_identity_line(self, tmp_path):
        path = tmp_path / "pose.txt"
        path.write_text("1 0 0 0 0 1 0 0 0 0 1 0\n")
        poses, warnings = load_pose_file(path)
        assert warnings == []
        assert np.array_equal(poses[0].rotation, np.eye(3))
        assert np.array_equal(poses[0].translation, np.zeros(3))

    def test_pure_translation_with_unit_conversion(self, tmp_path):
        path = tmp_path / "pose.txt"
        path.write_text("1 0 0 1.5 0 1 0 -2.0 0 0 1 3.25\n")
        (pose,), _ = load_pose_file(path, "kitti")
        assert np.array_equal(pose.translation, [1500.0, -2000.0, 3250.0])
        (pose,), _ = load_pose_file(path, "piv3cams")
        assert np.array_equal(pose.translation, [1.5, -2.0, 3.25])

    @pytest.mark.parametrize("profile", ["piv3cams", "kitti"])
    def test_serialize_parse_roundtrip(self, tmp_path, profile):
        rng = np.random.default_rng(3)
        poses = [random_pose(rng) for _ in range(5)]
        path = tmp_path / "pose.txt"
        save_pose_file(path, poses, profile)
        loaded, warnings = load_pose_file(path, profile)
        assert warnings == []
        for a, b in zip(poses, loaded):
            assert np.abs(a.rotation - b.rotation).max() < 1e-9
            assert np.abs(a.translation - b.translation).max() < 1e-9

    def test_reorthonormalizes_small_defects(self, tmp_path):
        rng = np.random.default_rng(4)
        r = random_pose(rng).rotation + rng.normal(scale=3e-8, size=(3, 3))
        line = " ".join(str(v) for v in np.hstack([r, np.zeros((3, 1))]).reshape(-1))
        path = tmp_path / "pose.txt"
        path.write_text(line + "\n")
        poses, warnings = load_pose_file(path)
        assert len(warnings) == 1 and "re-orthonormalized" in warnings[0]
        assert np.abs(poses[0].rotation.T @ poses[0].rotation - np.eye(3)).max() < 1e-12

    def test_rejects_large_defects(self, tmp_path):
        path = tmp_path / "pose.txt"
        path.write_text("1 0.1 0 0 0 1 0 0 0 0 1 0\n")
        with pytest.raises(PoseError):
            load_pose_file(path)

    def test_rejects_malformed_lines(self, tmp_path):
        path = tmp_path / "pose.txt"
        path.write_text("1 0 0 0 0 1 0 0 0 0 1\n")
        with pytest.raises(FileFormatError):
            load_pose_file(path)
        path.write_text("1 0 0 zero 0 1 0 0 0 0 1 0\n")
        with pytest.raises(FileFormatError):
            load_pose_file(path)


class TestCalib:
    def test_roundtrip(self, tmp_path):
        k = Intrinsics(721.5377, 721.5377, 609.5593, 172.854)
        path = tmp_path / "calib.txt"
        save_calib(path, k)
        loaded = load_calib(path)
        assert (loaded.fx, loaded.fy, loaded.cx, loaded.cy) == (k.fx, k.fy, k.cx, k.cy)

    @pytest.mark.parametrize(
        "content",
        ["", "K: 1 2 3\n", "K: a b c d\n", "K: 1 1 0 0\nK: 2 2 0 0\n", "K: -5 1 0 0\n"],
    )
    def test_rejects_malformed(self, tmp_path, content):
        path = tmp_path / "calib.txt"
        path.write_text(content)
        with pytest.raises(FileFormatError):
            load_calib(path)


class TestCenterCrop:
    def test_crop_to_own_size_is_identity(self):
        k = Intrinsics(100.0, 100.0, 32.0, 24.0)
        grid = np.random.default_rng(5).uniform(size=(48, 64, 3))
        out, k2 = center_crop(grid, 48, k)
        assert out.shape[0] == 48
        assert (k2.cx, k2.cy) == (32.0 - 8.0, 24.0)  # only width shrinks

    def test_kitti_frame_offsets(self):
        k = Intrinsics(721.5, 721.5, 609.6, 172.9)
        grid = np.zeros((375, 1242))
        _, k2 = center_crop(grid, 256, k)
        # offsets floor((1242-256)/2) = 493 and floor((375-256)/2) = 59
        assert k2.cx == k.cx - 493
        assert k2.cy == k.cy - 59

    def test_odd_remainder_uses_floor(self):
        k = Intrinsics(10.0, 10.0, 0.0, 0.0)
        out, k2 = center_crop(np.zeros((257, 257)), 256, k)
        assert out.shape == (256, 256)
        assert (k2.cx, k2.cy) == (0.0, 0.0)

    def test_too_small_raises(self):
        with pytest.raises(ShapeMismatchError):
            center_crop(np.zeros((100, 100)), 256, Intrinsics(1, 1, 0, 0))

    def test_backprojection_consistent_after_crop(self):
        k = Intrinsics(200.0, 210.0, 70.0, 50.0)
        grid = np.zeros((96, 128))
        _, k2 = center_crop(grid, 64, k)
        ox, oy = (128 - 64) // 2, (96 - 64) // 2
        rng = np.random.default_rng(6)
        for _ in range(20):
            u, v, d = rng.uniform(0, 63), rng.uniform(0, 63), rng.uniform(100, 5000)
            assert np.abs(backproject(u, v, d, k2) - backproject(u + ox, v + oy, d, k)).max() < 1e-9


def write_scene(tmp_path, name="scene0", n_frames=8, size=32):
    scene_dir = tmp_path / name
    (scene_dir / "color").mkdir(parents=True)
    (scene_dir / "depth").mkdir()
    k = Intrinsics(40.0, 40.0, (size - 1) / 2, (size - 1) / 2)
    plane = CheckerPlane((0.0, 0.0, 2000.0), (0.05, -0.02, -1.0), 300.0)
    poses = generate_trajectory(n_frames, (25.0, 0.0, 10.0), yaw_step_deg=1.0)
    for i, pose in enumerate(poses):
        image, depth = render(plane, pose, k, size, size)
        save_image(scene_dir / "color" / f"{i:06d}.png", image)
        save_depth_png(scene_dir / "depth" / f"{i:06d}.png", np.round(depth))
    save_pose_file(scene_dir / "pose.txt", poses)
    save_calib(scene_dir / "calib.txt", k)
    return scene_dir


class TestSceneIndex:
    def test_load_scene_counts_and_warnings(self, tmp_path):
        scene = load_scene(write_scene(tmp_path))
        assert len(scene) == 8
        assert scene.warnings == []
        assert scene.scene_id == "scene0"

    def test_count_mismatch_rejected(self, tmp_path):
        scene_dir = write_scene(tmp_path)
        (scene_dir / "color" / "000007.png").unlink()
        with pytest.raises(FileFormatError):
            load_scene(scene_dir)

    def test_load_pair_relative_pose(self, tmp_path):
        scene = load_scene(write_scene(tmp_path))
        pair = load_pair(scene, 2, 5)
        assert pair.frame_distance == 3
        reconstructed = compose(pair.src_pose, pair.relative_pose)
        assert np.abs(reconstructed.rotation - pair.tgt_pose.rotation).max() < 1e-9
        assert np.abs(reconstructed.translation - pair.tgt_pose.translation).max() < 1e-6

    def test_relative_pose_consistency_random(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            src, tgt = random_pose(rng), random_pose(rng)
            rel = relative_pose_from_world(src, tgt)
            back = compose(src, rel)
            assert np.abs(back.rotation - tgt.rotation).max() < 1e-9
            assert np.abs(back.translation - tgt.translation).max() < 1e-6

    def test_frame_pair_requires_nonzero_distance(self):
        k = Intrinsics(1.0, 1.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            FramePair(
                src_image=np.zeros((2, 2, 3)),
                src_depth=np.zeros((2, 2)),
                src_pose=Pose.identity(),
                tgt_image=np.zeros((2, 2, 3)),
                tgt_depth=None,
                tgt_pose=Pose.identity(),
                relative_pose=Pose.identity(),
                frame_distance=0,
                intrinsics=k,
            )


class TestSamplePairs:
    def test_two_frame_scene_exhaustive(self):
        pairs = sample_pair_indices(2, 1, 200, seed=0)
        assert set(pairs) == {(0, 1), (1, 0)}

    def test_deterministic_for_seed(self, tmp_path):
        scene = load_scene(write_scene(tmp_path))
        a = sample_pairs(scene, 3, 12, seed=99)
        b = sample_pairs(scene, 3, 12, seed=99)
        assert [(p.src_index, p.tgt_index) for p in a] == [(p.src_index, p.tgt_index) for p in b]

    def test_distance_distribution_uniform(self):
        counts = Counter(j - i for i, j in sample_pair_indices(40, 3, 10000, seed=123))
        assert set(counts) == {-3, -2, -1, 1, 2, 3}
        expected = 10000 / 6
        for d, c in counts.items():
            assert abs(c - expected) / expected < 0.05, f"distance {d} count {c}"

    def test_targets_stay_in_range(self):
        for i, j in sample_pair_indices(10, 3, 2000, seed=5):
            assert 0 <= i < 10 and 0 <= j < 10 and 1 <= abs(j - i) <= 3

    def test_scene_too_short(self):
        with pytest.raises(ValueError):
            sample_pair_indices(3, 3, 10, seed=0)
