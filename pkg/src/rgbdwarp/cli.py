"""Batch command-line front-end.

Verbs:
  warp      forward-warp sampled frame pairs from source RGB-D, writing the
            warped image, warped depth, and sparse/dense visibility masks
  evaluate  warp pairs and score them against ground-truth targets (L1/SSIM),
            with per-frame-distance mean L1 curve data
  synth     render a synthetic checkerboard scene into a loadable dataset
  densify   morphologically close a binary mask PNG

Flags can also be supplied through a plain-text config file of KEY = VALUE
lines (--config); command-line flags win. The environment variable
RGBDWARP_OUT_ROOT, when set, re-roots every output directory under it.
"""

import argparse
import csv
import dataclasses
import os
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .camera import invert
from .dataset import (
    center_crop,
    load_image,
    load_pair,
    load_scene,
    sample_pair_indices,
    save_calib,
    save_depth_png,
    save_image,
    save_pose_file,
)
from .fusion import fuse_average, fuse_predicted_mask, fuse_visibility
from .metrics import SsimParams, l1_error, ssim
from .synthetic import load_synth_config, render
from .warping import densify_mask, forward_warp_depth, inverse_warp, warp_from_source_depth

ENV_OUT_ROOT = "RGBDWARP_OUT_ROOT"


def _resolve_out(out) -> Path:
    root = os.environ.get(ENV_OUT_ROOT)
    path = Path(root) / out if root else Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _fmt(value: float) -> str:
    return f"{value:.10g}"


def _pair_stem(pair) -> str:
    return f"{pair.scene_id}_{pair.src_index:06d}_{pair.tgt_index:06d}"


def _crop_pair(pair, side: int):
    src_image, cropped_k = center_crop(pair.src_image, side, pair.intrinsics)
    src_depth, _ = center_crop(pair.src_depth, side, pair.intrinsics)
    tgt_image, _ = center_crop(pair.tgt_image, side, pair.intrinsics)
    tgt_depth = None
    if pair.tgt_depth is not None:
        tgt_depth, _ = center_crop(pair.tgt_depth, side, pair.intrinsics)
    return dataclasses.replace(
        pair,
        src_image=src_image,
        src_depth=src_depth,
        tgt_image=tgt_image,
        tgt_depth=tgt_depth,
        intrinsics=cropped_k,
    )


def _iter_pair_refs(args):
    """(scene, src, tgt) descriptors for every sampled pair, in a fixed order."""
    for scene_dir in args.scene:
        scene = load_scene(scene_dir, args.profile)
        for line in scene.warnings:
            print(f"warning: {line}", file=sys.stderr)
        for i, j in sample_pair_indices(len(scene), args.max_distance, args.pairs, args.seed):
            yield scene, i, j


def _load_pair(scene, i, j, args):
    pair = load_pair(scene, i, j)
    if args.crop:
        pair = _crop_pair(pair, args.crop)
    return pair


def _save_mask(path, mask):
    PILImage.fromarray((np.asarray(mask) > 0.5).astype(np.uint8) * 255).save(path)


def _load_mask(path):
    img = PILImage.open(path)
    if img.mode != "L":
        raise ValueError(f"{path}: expected 8-bit grayscale mask, got mode {img.mode!r}")
    return (np.asarray(img) > 127).astype(float)


def cmd_warp(args) -> int:
    out = _resolve_out(args.out)
    rows = []
    failures = []
    for scene, i, j in _iter_pair_refs(args):
        stem = f"{scene.scene_id}_{i:06d}_{j:06d}"
        row = {"scene": scene.scene_id, "src": i, "tgt": j, "distance": j - i, "status": "ok"}
        try:
            pair = _load_pair(scene, i, j, args)
            warped, warped_depth, vis = warp_from_source_depth(
                pair.src_image, pair.src_depth, invert(pair.relative_pose), pair.intrinsics
            )
            dense = densify_mask(vis, args.radius)
            save_image(out / f"{stem}_warped.png", np.clip(warped, 0.0, 1.0))
            save_depth_png(out / f"{stem}_depth.png", warped_depth, args.profile)
            _save_mask(out / f"{stem}_mask_sparse.png", vis)
            _save_mask(out / f"{stem}_mask_dense.png", dense)
        except Exception as e:  # any per-pair failure is recorded; the run continues
            row["status"] = f"error: {e}"
            failures.append(stem)
        rows.append(row)

    with open(out / "manifest.csv", "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=["scene", "src", "tgt", "distance", "status"])
        writer.writeheader()
        writer.writerows(rows)

    if failures:
        print(f"{len(failures)} pair(s) failed: {', '.join(failures)}", file=sys.stderr)
        return 1
    return 0


def _evaluate_one(pair, args, ssim_params):
    """Warp one pair, fuse if configured, and score against the target."""
    rel = pair.relative_pose
    if args.path == "target":
        if pair.tgt_depth is None:
            raise ValueError("target path requires a ground-truth target depth")
        warped, mask = inverse_warp(pair.src_image, pair.tgt_depth, rel, pair.intrinsics)
        visibility = None
        if args.fusion == "visibility":
            _, visibility = forward_warp_depth(pair.src_depth, invert(rel), pair.intrinsics)
    else:
        warped, _, visibility = warp_from_source_depth(
            pair.src_image, pair.src_depth, invert(rel), pair.intrinsics
        )
        mask = visibility

    evaluated = warped
    if args.fusion != "none":
        pixel = load_image(Path(args.pixel_dir) / f"{_pair_stem(pair)}.png")
        if args.fusion == "average":
            evaluated = fuse_average(warped, pixel)
        elif args.fusion == "visibility":
            if args.mask_density == "dense":
                visibility = densify_mask(visibility, args.radius)
            evaluated = fuse_visibility(warped, pixel, visibility)
        else:
            pred_mask = _load_mask(Path(args.mask_dir) / f"{_pair_stem(pair)}.png")
            evaluated = fuse_predicted_mask(warped, pixel, pred_mask)

    evaluated = np.clip(evaluated, 0.0, 1.0)
    return {
        "l1": l1_error(evaluated, pair.tgt_image),
        "l1_masked": l1_error(evaluated, pair.tgt_image, mask),
        "ssim": ssim(evaluated, pair.tgt_image, ssim_params),
        "coverage": float(np.mean(mask)),
    }


def cmd_evaluate(args) -> int:
    if args.fusion != "none" and not args.pixel_dir:
        print("error: --fusion requires --pixel-dir", file=sys.stderr)
        return 2
    if args.fusion == "predicted" and not args.mask_dir:
        print("error: --fusion predicted requires --mask-dir", file=sys.stderr)
        return 2
    out = _resolve_out(args.out)
    ssim_params = SsimParams(window=args.ssim_window, weighting=args.ssim_weighting, sigma=args.ssim_sigma)

    rows = []
    failures = []
    by_distance = defaultdict(list)
    for scene, i, j in _iter_pair_refs(args):
        row = {"scene": scene.scene_id, "src": i, "tgt": j, "distance": j - i,
               "l1": "", "l1_masked": "", "ssim": "", "coverage": "", "status": "ok"}
        try:
            pair = _load_pair(scene, i, j, args)
            scores = _evaluate_one(pair, args, ssim_params)
        except Exception as e:  # pair is skipped with a warning row; the run continues
            row["status"] = f"skipped: {e}"
            failures.append(f"{scene.scene_id}_{i:06d}_{j:06d}")
        else:
            row.update({k: _fmt(v) for k, v in scores.items()})
            by_distance[pair.frame_distance].append(scores["l1"])
        rows.append(row)

    fields = ["scene", "src", "tgt", "distance", "l1", "l1_masked", "ssim", "coverage", "status"]
    with open(out / "metrics.csv", "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)

    scored = [r for r in rows if r["status"] == "ok"]
    with open(out / "summary.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["pairs", "mean_l1", "mean_ssim"])
        if scored:
            writer.writerow([
                len(scored),
                _fmt(float(np.mean([float(r["l1"]) for r in scored]))),
                _fmt(float(np.mean([float(r["ssim"]) for r in scored]))),
            ])
        else:
            writer.writerow([0, "", ""])

    # curve data: mean L1 per signed frame distance
    with open(out / "curve.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["distance", "mean_l1", "pairs"])
        for d in sorted(by_distance):
            writer.writerow([d, _fmt(float(np.mean(by_distance[d]))), len(by_distance[d])])

    if failures:
        print(f"{len(failures)} pair(s) skipped: {', '.join(failures)}", file=sys.stderr)
        return 1
    return 0


def cmd_synth(args) -> int:
    scene, intrinsics, width, height, poses = load_synth_config(args.scene_config)
    out = _resolve_out(args.out)
    (out / "color").mkdir(exist_ok=True)
    (out / "depth").mkdir(exist_ok=True)
    for i, pose in enumerate(poses):
        image, depth = render(scene, pose, intrinsics, width, height)
        save_image(out / "color" / f"{i:06d}.png", image)
        save_depth_png(out / "depth" / f"{i:06d}.png", np.round(depth), args.profile)
    save_pose_file(out / "pose.txt", poses, args.profile)
    save_calib(out / "calib.txt", intrinsics)
    return 0


def cmd_densify(args) -> int:
    mask = _load_mask(args.input)
    closed = densify_mask(mask, args.radius)
    Path(args.output).parent.mkdir(parents=True, exist_ok=True)
    _save_mask(args.output, closed)
    return 0


def _add_pair_flags(sub):
    sub.add_argument("--profile", choices=["piv3cams", "kitti"], default="piv3cams",
                     help="dataset unit conventions")
    sub.add_argument("--scene", action="append", required=True, help="scene directory (repeatable)")
    sub.add_argument("--pairs", type=int, default=10, help="pairs sampled per scene")
    sub.add_argument("--seed", type=int, default=0, help="pair-sampling seed")
    sub.add_argument("--max-distance", type=int, default=3, help="max |frame distance| when sampling")
    sub.add_argument("--crop", type=int, default=0, help="center-crop side in pixels (0 = off)")
    sub.add_argument("--radius", type=int, default=1, help="mask densification radius (pixels)")
    sub.add_argument("--out", required=True, help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(prog="rgbdwarp", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    subs = parser.add_subparsers(dest="command", required=True)
    byname = {}

    warp = subs.add_parser("warp", help="forward-warp sampled pairs to disk")
    _add_pair_flags(warp)
    warp.set_defaults(func=cmd_warp)
    byname["warp"] = warp

    ev = subs.add_parser("evaluate", help="score warped pairs against ground truth")
    _add_pair_flags(ev)
    ev.add_argument("--path", choices=["target", "source"], default="target",
                    help="warp geometry: inverse from target depth, or forward from source depth")
    ev.add_argument("--fusion", choices=["none", "average", "visibility", "predicted"], default="none")
    ev.add_argument("--mask-density", choices=["sparse", "dense"], default="sparse",
                    help="visibility-mask density for --fusion visibility")
    ev.add_argument("--pixel-dir", default=None, help="directory of pixel-branch images named <scene>_<src>_<tgt>.png")
    ev.add_argument("--mask-dir", default=None, help="directory of predicted masks for --fusion predicted")
    ev.add_argument("--ssim-window", type=int, default=11)
    ev.add_argument("--ssim-weighting", choices=["uniform", "gaussian"], default="uniform")
    ev.add_argument("--ssim-sigma", type=float, default=1.5)
    ev.set_defaults(func=cmd_evaluate)
    byname["evaluate"] = ev

    synth = subs.add_parser("synth", help="render a synthetic scene into a dataset directory")
    synth.add_argument("--scene-config", required=True, help="JSON scene/camera/trajectory description")
    synth.add_argument("--profile", choices=["piv3cams", "kitti"], default="piv3cams")
    synth.add_argument("--out", required=True, help="output scene directory")
    synth.set_defaults(func=cmd_synth)
    byname["synth"] = synth

    dens = subs.add_parser("densify", help="morphologically close a binary mask PNG")
    dens.add_argument("--input", required=True)
    dens.add_argument("--output", required=True)
    dens.add_argument("--radius", type=int, default=1)
    dens.set_defaults(func=cmd_densify)
    byname["densify"] = dens

    for sub in byname.values():
        sub.add_argument("--config", default=None, help="plain-text KEY = VALUE config file")
    return parser, byname


def read_config_file(path) -> dict:
    values = {}
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected KEY = VALUE")
            key, val = (part.strip() for part in line.split("=", 1))
            values[key.replace("-", "_")] = val
    return values


def _apply_config(sub, cfg: dict, argv):
    actions = {a.dest: a for a in sub._actions}
    unknown = sorted(set(cfg) - set(actions))
    if unknown:
        raise ValueError(f"unknown config key(s): {', '.join(unknown)}")
    converted = {}
    for key, raw in cfg.items():
        if f"--{key.replace('_', '-')}" in argv:
            continue  # the command line wins outright, even for append flags
        action = actions[key]
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            converted[key] = raw.lower() in ("1", "true", "yes")
        elif isinstance(action, argparse._AppendAction):
            converted[key] = [action.type(raw) if action.type else raw]
        elif action.type:
            converted[key] = action.type(raw)
        else:
            converted[key] = raw
        if action.choices and converted[key] not in action.choices and not isinstance(converted[key], list):
            raise ValueError(f"config key {key}: {raw!r} not in {sorted(action.choices)}")
    sub.set_defaults(**converted)
    # a config-supplied value satisfies "required"
    for action in sub._actions:
        if action.dest in converted:
            action.required = False


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, byname = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    if known.config:
        command = next((a for a in argv if not a.startswith("-")), None)
        if command in byname:
            try:
                _apply_config(byname[command], read_config_file(known.config), argv)
            except ValueError as e:
                print(f"error: {e}", file=sys.stderr)
                return 2
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
