"""Command-line front end: synthesis, estimation, evaluation, benchmarks.

Exit codes: 0 success, 2 usage, 3 invalid configuration or parameters,
4 missing/unreadable files, 5 malformed file content.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import formats
from .adaptive import StarConfig, estimate_normals_adaptive
from .baselines import estimate_normals_cross, estimate_normals_pca
from .bench import run_bench
from .config import load_rig, load_scene
from .evaluation import angular_error_map, compare_table, summarize
from .fields import NormalField, ScalarField
from .formats import FormatError
from .geometry import StereoRig, triangulate_grid
from .kernels import KernelSpec, build_kernels, estimate_normals_fixed, format_kernel_dump
from .parallel import THREADS_ENV
from .synth import add_gaussian_noise, raycast

METHODS = ("affine-fixed", "affine-adaptive-st", "affine-adaptive-cd", "pca", "cross")

EXIT_CONFIG = 3
EXIT_IO = 4
EXIT_FORMAT = 5


def _add_threads_flag(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threads", type=int, default=None,
                   help=f"worker threads (default: ${THREADS_ENV} or CPU count)")


def _add_rig_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--rig", type=Path, help="rig config file (key value lines)")
    for name in ("fx", "fy", "u0", "v0", "baseline"):
        p.add_argument(f"--{name}", type=float, help=f"override rig {name}")


def _resolve_rig(args) -> StereoRig:
    fields = {}
    if args.rig is not None:
        rig = load_rig(args.rig)
        fields = {"fx": rig.fx, "fy": rig.fy, "u0": rig.u0,
                  "v0": rig.v0, "baseline": rig.baseline}
    for name in ("fx", "fy", "u0", "v0", "baseline"):
        val = getattr(args, name)
        if val is not None:
            fields[name] = val
    missing = [k for k in ("fx", "fy", "u0", "v0", "baseline") if k not in fields]
    if missing:
        raise ValueError(f"rig parameters missing: {', '.join(missing)} "
                         "(pass --rig or the individual flags)")
    return StereoRig(**fields)


def _read_disparity(path: Path, png_scale: float, png_invalid: int) -> ScalarField:
    data = path.read_bytes()
    if path.suffix.lower() == ".png":
        return formats.read_disparity_png16(data, scale=png_scale,
                                            invalid_value=png_invalid)
    return formats.read_pfm(data)


def _star_config(args, stop: str) -> StarConfig:
    return StarConfig(directions=args.directions, max_steps=args.max_steps,
                      stop=stop, threshold=args.threshold)


def _run_estimator(args, disparity: ScalarField, rig: StereoRig) -> NormalField:
    if args.method == "affine-fixed":
        return estimate_normals_fixed(disparity, rig, args.kernel, threads=args.threads)
    if args.method == "affine-adaptive-st":
        return estimate_normals_adaptive(disparity, rig, _star_config(args, "st"),
                                         threads=args.threads)
    if args.method == "affine-adaptive-cd":
        return estimate_normals_adaptive(disparity, rig, _star_config(args, "cd"),
                                         threads=args.threads)
    if args.method == "pca":
        return estimate_normals_pca(disparity, rig, args.kernel, threads=args.threads)
    return estimate_normals_cross(disparity, rig)


def _cmd_synth(args) -> int:
    scene = load_scene(args.scene)
    gt = raycast(scene)
    noisy = add_gaussian_noise(gt.disparity, args.sigma, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "depth.pfm").write_bytes(formats.write_pfm(gt.depth))
    (out / "disparity.pfm").write_bytes(formats.write_pfm(noisy))
    (out / "normals.pfm").write_bytes(formats.write_pfm_normals(gt.normals))
    (out / "normals.png").write_bytes(formats.write_normal_png(gt.normals))
    mask_png = formats.write_disparity_png16(
        ScalarField(np.where(gt.mask, 1.0, np.nan), gt.mask), scale=1.0)
    (out / "mask.png").write_bytes(mask_png)
    n_valid = int(gt.mask.sum())
    print(f"synth: {scene.width}x{scene.height}, {len(scene.primitives)} primitives, "
          f"{n_valid} hit pixels, sigma={args.sigma}, seed={args.seed} -> {out}")
    return 0


def _cmd_estimate(args) -> int:
    rig = _resolve_rig(args)
    disparity = _read_disparity(Path(args.disparity), args.png_scale, args.png_invalid)
    normals = _run_estimator(args, disparity, rig)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(formats.write_pfm_normals(normals))
    if args.normal_png:
        Path(args.normal_png).write_bytes(formats.write_normal_png(normals))
    if args.ply:
        pts = triangulate_grid(disparity, rig)
        keep = normals.mask & np.isfinite(pts).all(axis=-1)
        cloud = formats.write_ply_oriented(pts[keep], normals.vectors[keep],
                                           binary=not args.ascii_ply)
        Path(args.ply).write_bytes(cloud)
    print(f"estimate: {args.method} on {disparity.width}x{disparity.height}, "
          f"{int(normals.mask.sum())} valid normals -> {out}")
    return 0


def _cmd_eval(args) -> int:
    est = formats.read_pfm_normals(Path(args.est).read_bytes())
    gt = formats.read_pfm_normals(Path(args.gt).read_bytes())
    errors = angular_error_map(est, gt)
    stats = summarize(errors)
    print(compare_table([(args.label, stats)]), end="")
    if args.json:
        config = {"est": str(args.est), "gt": str(args.gt)}
        Path(args.json).write_bytes(formats.write_stats_json(stats, args.label, config))
    return 0


def _cmd_bench(args) -> int:
    star = None
    if args.method in ("affine-adaptive-st", "affine-adaptive-cd"):
        star = _star_config(args, args.method.rsplit("-", 1)[1])
    stats = run_bench(args.method, args.width, args.height, repeats=args.repeats,
                      kernel_size=args.kernel, star=star, threads=args.threads)
    print(f"bench: {args.method} {args.width}x{args.height} "
          f"threads={args.threads or 'auto'}: {stats}")
    return 0


def _cmd_kernel(args) -> int:
    dump = format_kernel_dump(build_kernels(KernelSpec.square(args.size)))
    if args.out:
        Path(args.out).write_text(dump, encoding="utf-8")
    else:
        print(dump, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stereonorm",
        description="Surface normal estimation from rectified stereo disparity maps")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="raycast a scene file into ground-truth maps")
    p.add_argument("--scene", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--sigma", type=float, default=0.0,
                   help="stddev of Gaussian disparity noise (pixels)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("estimate", help="estimate normals from a disparity map")
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--disparity", type=Path, required=True,
                   help="input map (.pfm or 16-bit .png)")
    p.add_argument("--out", type=Path, required=True, help="output normals (.pfm)")
    p.add_argument("--normal-png", type=Path, help="optional RGB normal map")
    p.add_argument("--ply", type=Path, help="optional oriented point cloud")
    p.add_argument("--ascii-ply", action="store_true")
    p.add_argument("--kernel", type=int, default=9,
                   help="square kernel/window width (affine-fixed, pca)")
    p.add_argument("--directions", type=int, default=8)
    p.add_argument("--max-steps", type=int, default=10)
    p.add_argument("--threshold", type=float, default=0.1,
                   help="edge threshold t (st) or depth ratio k (cd)")
    p.add_argument("--png-scale", type=float, default=256.0)
    p.add_argument("--png-invalid", type=int, default=0)
    _add_rig_flags(p)
    _add_threads_flag(p)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("eval", help="angular error of estimated vs ground-truth normals")
    p.add_argument("--est", type=Path, required=True)
    p.add_argument("--gt", type=Path, required=True)
    p.add_argument("--json", type=Path, help="write stats record")
    p.add_argument("--label", default="run")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("bench", help="time repeated estimation runs (no file I/O)")
    p.add_argument("--method", choices=METHODS, default="affine-fixed")
    p.add_argument("--width", type=int, default=640)
    p.add_argument("--height", type=int, default=480)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--kernel", type=int, default=9)
    p.add_argument("--directions", type=int, default=8)
    p.add_argument("--max-steps", type=int, default=10)
    p.add_argument("--threshold", type=float, default=0.1)
    _add_threads_flag(p)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("kernel", help="dump precomputed kernel weights")
    p.add_argument("--size", type=int, default=9)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=_cmd_kernel)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
