"""Batch command-line front end.

Subcommands: d2n, stats, eval, pcd, synth, loss. Numeric results are JSON
(stdout or --out); human-readable progress goes to stderr. Outputs are
byte-identical for fixed inputs and flags regardless of the thread count:
workers only compute per-sample results, which are reduced in input order.

Exit codes: 0 success, 2 usage, 3 I/O failure, 4 bad data.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from functools import reduce
from pathlib import Path
from typing import Callable, Iterable, Sequence

from . import camera, d2n, formats, losses, metrics, pointcloud, scene, stats

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_DATA = 4

THREADS_ENV_VAR = "STEREOLAB_THREADS"


def _default_threads() -> int:
    raw = os.environ.get(THREADS_ENV_VAR, "")
    try:
        value = int(raw)
    except ValueError:
        return 1
    return max(value, 1)


def _info(message: str) -> None:
    print(message, file=sys.stderr)


def _fmt9(value: float) -> float:
    """Round to 9 significant digits so JSON output is short and stable."""
    return float(f"{value:.9g}")


def _emit_json(doc: dict, out: str | None) -> None:
    text = json.dumps(doc, sort_keys=True) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _parallel_map(fn: Callable, items: Sequence, threads: int) -> list:
    """Apply fn to items, preserving input order in the result list."""
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _listdir(path: str, pattern: str) -> list[Path]:
    root = Path(path)
    if not root.is_dir():
        raise FileNotFoundError(f"input directory not found: {path}")
    files = sorted(root.glob(pattern))
    if not files:
        raise ValueError(f"no files matching {pattern} in {path}")
    return files


def _paired_stems(named_dirs: dict[str, list[Path]]) -> list[str]:
    """Samples pair by shared filename stem; any mismatch is a hard error."""
    stem_sets = {name: {p.stem for p in files} for name, files in named_dirs.items()}
    names = list(stem_sets)
    reference = stem_sets[names[0]]
    for name in names[1:]:
        if stem_sets[name] != reference:
            missing = sorted(reference ^ stem_sets[name])
            raise ValueError(
                f"sample stems differ between --{names[0]} and --{name}: "
                f"unmatched {missing[:5]}{'...' if len(missing) > 5 else ''}")
    return sorted(reference)


def _write_histogram(hist, out: str | None, csv: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(hist.to_json_dict(), sort_keys=True) + "\n")
    if csv:
        with open(csv, "w", encoding="utf-8") as fh:
            fh.write(hist.to_csv())
    if not out and not csv:
        sys.stdout.write(json.dumps(hist.to_json_dict(), sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_d2n(args: argparse.Namespace) -> int:
    rig = camera.load_rig(args.rig)
    dm = formats.disparity_from_pfm(formats.read_pfm_file(args.disp))
    cfg = d2n.D2NConfig(slope_epsilon=args.slope_epsilon)
    nm = d2n.d2n_transform(dm, rig, cfg)
    formats.write_pfm_file(formats.normal_to_pfm(nm), args.out)
    _info(f"d2n: {nm.valid_count}/{nm.width * nm.height} valid normals -> {args.out}")
    return EXIT_OK


def _cmd_stats_disparity(args: argparse.Namespace) -> int:
    files = _listdir(args.disp, "*.pfm")

    def worker(path: Path):
        return stats.disparity_histogram_single(
            formats.disparity_from_pfm(formats.read_pfm_file(path)), bins=args.bins)

    hists = _parallel_map(worker, files, args.threads)
    hist = reduce(stats.merge_histograms, hists)
    if hist.total == 0:
        raise ValueError("no valid pixels in any disparity map; histogram would be empty")
    _write_histogram(hist, args.out, args.csv)
    _info(f"stats disparity: {len(files)} maps, {hist.total:.0f} pixels")
    return EXIT_OK


def _cmd_stats_normal(args: argparse.Namespace) -> int:
    files = _listdir(args.normal, "*.pfm")

    def worker(path: Path):
        return stats.normal_angle_histogram_single(
            formats.normal_from_pfm(formats.read_pfm_file(path)), bin_deg=args.bin_deg)

    hists = _parallel_map(worker, files, args.threads)
    hist = reduce(stats.merge_histograms, hists)
    _write_histogram(hist, args.out, args.csv)
    _info(f"stats normal: {len(files)} maps averaged")
    return EXIT_OK


def _cmd_stats_brightness(args: argparse.Namespace) -> int:
    lefts = _listdir(args.left, "*.png")
    rights = _listdir(args.right, "*.png")
    disps = _listdir(args.disp, "*.pfm")
    stems = _paired_stems({"left": lefts, "right": rights, "disp": disps})
    left_dir, right_dir, disp_dir = Path(args.left), Path(args.right), Path(args.disp)

    def worker(stem: str):
        left = formats.read_png_rgb8(left_dir / f"{stem}.png")
        right = formats.read_png_rgb8(right_dir / f"{stem}.png")
        gt = formats.disparity_from_pfm(formats.read_pfm_file(disp_dir / f"{stem}.pfm"))
        return stats.brightness_joint_histogram(left, right, gt)

    hists = _parallel_map(worker, stems, args.threads)
    hist = reduce(stats.merge_histograms, hists)
    _write_histogram(hist, args.out, args.csv)
    over = stats.overexposure_stats(hist)
    _info(f"stats brightness: {len(stems)} pairs, "
          f"both-overexposed fraction {over.fraction_both_255:.4f}")
    return EXIT_OK


def _cmd_eval_disparity(args: argparse.Namespace) -> int:
    pred = formats.disparity_from_pfm(formats.read_pfm_file(args.pred))
    gt = formats.disparity_from_pfm(formats.read_pfm_file(args.gt))
    value = metrics.epe(pred, gt)
    if args.error_map:
        import numpy as np

        formats.write_pfm_file(
            formats.PfmImage(metrics.disparity_error_map(pred, gt).astype(np.float32)),
            args.error_map)
    _emit_json({"epe": _fmt9(value)}, args.out)
    _info(f"eval disparity: EPE {value:.4f} px")
    return EXIT_OK


def _cmd_eval_normal(args: argparse.Namespace) -> int:
    pred = formats.normal_from_pfm(formats.read_pfm_file(args.pred))
    gt = formats.normal_from_pfm(formats.read_pfm_file(args.gt))
    result = metrics.normal_angle_errors(pred, gt)
    if args.error_map:
        import numpy as np

        formats.write_pfm_file(
            formats.PfmImage(metrics.angle_error_map(pred, gt).astype(np.float32)),
            args.error_map)
    _emit_json({
        "mean_deg": _fmt9(result.mean_deg),
        "median_deg": _fmt9(result.median_deg),
        "frac_11_25": _fmt9(result.frac_11_25),
        "frac_22_5": _fmt9(result.frac_22_5),
        "frac_30": _fmt9(result.frac_30),
    }, args.out)
    _info(f"eval normal: mean {result.mean_deg:.3f} deg, "
          f"<11.25 deg {result.frac_11_25:.1%}")
    return EXIT_OK


def _cmd_pcd(args: argparse.Namespace) -> int:
    rig = camera.load_rig(args.rig)
    dm = formats.disparity_from_pfm(formats.read_pfm_file(args.disp))
    rgb = formats.read_png_rgb8(args.left) if args.left else None
    nm = formats.normal_from_pfm(formats.read_pfm_file(args.normal)) if args.normal else None
    cloud = pointcloud.reconstruct(dm, rgb, nm, rig)
    pointcloud.export_ply_file(cloud, args.out, format=args.format)
    _info(f"pcd: {len(cloud)} points -> {args.out}")
    return EXIT_OK


def _cmd_synth(args: argparse.Namespace) -> int:
    rig = camera.load_rig(args.rig)
    spec = scene.load_scene(args.scene)
    render = scene.render_stereo(spec, rig, args.width, args.height)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    formats.write_png_rgb8(render.left_rgb, out / "left.png")
    formats.write_png_rgb8(render.right_rgb, out / "right.png")
    formats.write_pfm_file(formats.disparity_to_pfm(render.gt_disparity), out / "disp.pfm")
    formats.write_pfm_file(formats.normal_to_pfm(render.gt_normal), out / "normal.pfm")
    formats.write_pfm_file(formats.depth_to_pfm(render.gt_depth), out / "depth.pfm")
    _info(f"synth: {args.width}x{args.height}, "
          f"{render.gt_disparity.valid_count} hit pixels -> {out}")
    return EXIT_OK


def _cmd_loss(args: argparse.Namespace) -> int:
    gt = formats.disparity_from_pfm(formats.read_pfm_file(args.gt))
    levels = tuple(formats.disparity_from_pfm(formats.read_pfm_file(p))
                   for p in args.pred)
    weights = tuple(args.weights) if args.weights else losses.DEFAULT_LOSS_WEIGHTS
    pyramid = losses.LossPyramid(levels, weights)
    l_d = losses.multiscale_disparity_loss(pyramid, gt)
    gt_levels = losses.build_gt_pyramid(gt)
    per_scale = [
        _fmt9(losses.scale_loss(pyramid.levels[s], gt_levels[s]))
        if weights[s] != 0.0 else None
        for s in range(losses.PYRAMID_LEVELS)
    ]
    doc = {
        "l_d": _fmt9(l_d),
        "weights": [_fmt9(w) for w in weights],
        "scale_losses": per_scale,
        "total": _fmt9(l_d),
    }
    if args.pred_normal and args.gt_normal:
        pred_nm = formats.normal_from_pfm(formats.read_pfm_file(args.pred_normal))
        gt_nm = formats.normal_from_pfm(formats.read_pfm_file(args.gt_normal))
        l_n = losses.normal_loss(pred_nm, gt_nm)
        doc["l_n"] = _fmt9(l_n)
        doc["total"] = _fmt9(l_d + l_n)
    _emit_json(doc, args.out)
    _info(f"loss: L_d {l_d:.6f}" + (f", total {doc['total']}" if "l_n" in doc else ""))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stereolab",
        description="Stereo geometry toolkit: normals from disparity, dataset "
                    "statistics, metrics, synthetic ground truth and point clouds.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", "-j", type=int, default=_default_threads(),
                        metavar="N",
                        help=f"worker threads (default from ${THREADS_ENV_VAR} or 1)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("d2n", parents=[common],
                       help="estimate surface normals from a disparity map")
    p.add_argument("--disp", required=True, help="input disparity PFM")
    p.add_argument("--rig", required=True, help="rig JSON (fx, fy, cx, cy, baseline)")
    p.add_argument("--out", required=True, help="output 3-channel normal PFM")
    p.add_argument("--slope-epsilon", type=float, default=1e-9,
                   help="minimum 3D coordinate difference for slope estimates (m)")
    p.set_defaults(handler=_cmd_d2n)

    p = sub.add_parser("stats", help="dataset distribution statistics")
    stats_sub = p.add_subparsers(dest="stats_command", required=True)

    q = stats_sub.add_parser("disparity", parents=[common],
                             help="width-normalized disparity histogram")
    q.add_argument("--disp", required=True, help="directory of disparity PFMs")
    q.add_argument("--bins", type=int, default=stats.DEFAULT_DISPARITY_BINS)
    q.add_argument("--out", help="output histogram JSON")
    q.add_argument("--csv", help="optional CSV export")
    q.set_defaults(handler=_cmd_stats_disparity)

    q = stats_sub.add_parser("normal", parents=[common],
                             help="per-sample averaged normal angle histogram")
    q.add_argument("--normal", required=True, help="directory of normal PFMs")
    q.add_argument("--bin-deg", type=float, default=stats.DEFAULT_ANGLE_BIN_DEG)
    q.add_argument("--out", help="output histogram JSON")
    q.add_argument("--csv", help="optional CSV export")
    q.set_defaults(handler=_cmd_stats_normal)

    q = stats_sub.add_parser("brightness", parents=[common],
                             help="left/right brightness joint histogram")
    q.add_argument("--left", required=True, help="directory of left PNGs")
    q.add_argument("--right", required=True, help="directory of right PNGs")
    q.add_argument("--disp", required=True, help="directory of ground-truth PFMs")
    q.add_argument("--out", help="output histogram JSON")
    q.add_argument("--csv", help="optional CSV export")
    q.set_defaults(handler=_cmd_stats_brightness)

    p = sub.add_parser("eval", help="evaluate predictions against ground truth")
    eval_sub = p.add_subparsers(dest="eval_command", required=True)

    q = eval_sub.add_parser("disparity", parents=[common], help="endpoint error")
    q.add_argument("--pred", required=True)
    q.add_argument("--gt", required=True)
    q.add_argument("--out", help="write the JSON result here instead of stdout")
    q.add_argument("--error-map", help="optional per-pixel |pred-gt| PFM")
    q.set_defaults(handler=_cmd_eval_disparity)

    q = eval_sub.add_parser("normal", parents=[common], help="normal angle errors")
    q.add_argument("--pred", required=True)
    q.add_argument("--gt", required=True)
    q.add_argument("--out", help="write the JSON result here instead of stdout")
    q.add_argument("--error-map", help="optional per-pixel angle error PFM (deg)")
    q.set_defaults(handler=_cmd_eval_normal)

    p = sub.add_parser("pcd", parents=[common],
                       help="reconstruct a point cloud from a disparity map")
    p.add_argument("--disp", required=True, help="input disparity PFM")
    p.add_argument("--rig", required=True)
    p.add_argument("--left", help="optional left RGB PNG for point colors")
    p.add_argument("--normal", help="optional normal PFM for point normals")
    p.add_argument("--out", required=True, help="output PLY path")
    p.add_argument("--format", choices=("ascii", "binary_little_endian"),
                   default="binary_little_endian")
    p.set_defaults(handler=_cmd_pcd)

    p = sub.add_parser("synth", parents=[common],
                       help="render a stereo pair with exact ground truth")
    p.add_argument("--scene", required=True, help="scene JSON")
    p.add_argument("--rig", required=True)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--out", required=True,
                   help="output directory (left.png right.png disp.pfm "
                        "normal.pfm depth.pfm)")
    p.set_defaults(handler=_cmd_synth)

    p = sub.add_parser("loss", parents=[common],
                       help="multi-scale disparity loss (optionally plus normal loss)")
    p.add_argument("--gt", required=True, help="full-resolution ground-truth PFM")
    p.add_argument("--pred", required=True, nargs=losses.PYRAMID_LEVELS,
                   metavar="PFM",
                   help=f"{losses.PYRAMID_LEVELS} predicted maps, full "
                        "resolution first, each level halving both dimensions")
    p.add_argument("--weights", type=float, nargs=losses.PYRAMID_LEVELS,
                   help="per-scale loss weights (default "
                        f"{' '.join(str(w) for w in losses.DEFAULT_LOSS_WEIGHTS)})")
    p.add_argument("--pred-normal", help="optional predicted normal PFM")
    p.add_argument("--gt-normal", help="optional ground-truth normal PFM")
    p.add_argument("--out", help="write the JSON result here instead of stdout")
    p.set_defaults(handler=_cmd_loss)

    return parser


def run(argv: Iterable[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv) if argv is not None else None)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    if getattr(args, "threads", 1) < 1:
        _info("error: --threads must be >= 1")
        return EXIT_USAGE
    try:
        return args.handler(args)
    except OSError as exc:
        _info(f"error: {exc}")
        return EXIT_IO
    except ValueError as exc:
        _info(f"error: {exc}")
        return EXIT_DATA


def main() -> None:
    sys.exit(run())
