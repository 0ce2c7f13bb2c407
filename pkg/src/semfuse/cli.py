"""``semfuse`` command line: probabilize, fuse, evaluate, synth, ablate.

Exit codes: 0 ok, 2 configuration error, 3 malformed input, 4 a pipeline
stage failed (the message is prefixed with the stage name).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .errors import ConfigError, FormatError, SemFuseError, StageError
from .geometry import INTERP_MODES
from .occlusion import GapSpec
from .pipeline import STAGES, CameraFrame, PipelineConfig, SlicParams, load_probability_image, run_pipeline


def _gaps(args) -> GapSpec:
    try:
        return GapSpec(args.theta_v, args.theta_h)
    except SemFuseError as exc:
        raise ConfigError(str(exc)) from None


def _slic(args) -> SlicParams:
    return SlicParams(args.segments, args.compactness, args.slic_iterations)


def _add_slic(p: argparse.ArgumentParser) -> None:
    p.add_argument("--segments", type=int, default=None, help="SLIC target segment count (default: image-size heuristic)")
    p.add_argument("--compactness", type=float, default=10.0)
    p.add_argument("--slic-iterations", type=int, default=10)


def cmd_probabilize(args) -> int:
    from .formats import write_probability_image

    if (args.superpixels is None) == (args.image is None):
        raise ConfigError("give exactly one of --superpixels or --image")
    cf = CameraFrame(scores=Path(args.scores), superpixels=args.superpixels and Path(args.superpixels),
                     image=args.image and Path(args.image))
    img = load_probability_image(cf, _slic(args))
    write_probability_image(args.output, img)
    return 0


def cmd_fuse(args) -> int:
    cfg = PipelineConfig(
        calibration=Path(args.calib),
        odometry=Path(args.odometry),
        scans=Path(args.scans),
        frames=Path(args.frames),
        out_dir=Path(args.out),
        gaps=_gaps(args),
        mode=args.mode,
        merge=Path(args.merge) if args.merge else None,
        slic=_slic(args),
        jobs=args.jobs,
        seed=args.seed,
        dump_stages=tuple(args.dump_stage),
        masking=not args.no_mask,
    )
    for r in run_pipeline(cfg):
        print(f"{r.scan_id}: {r.labelled}/{r.points} points labelled (t_ref={r.t_ref:.9g}) -> {r.csv}")
    return 0


def cmd_evaluate(args) -> int:
    from .evaluation import evaluate, format_report, pool, read_truth_csv, write_report_json
    from .fusion import ClassMergeSpec, read_cloud

    if not Path(args.truth).is_file():
        raise ConfigError(f"truth file not found: {args.truth}")
    merge = None
    if args.merge:
        if not Path(args.merge).is_file():
            raise ConfigError(f"merge spec not found: {args.merge}")
        merge = ClassMergeSpec.load(args.merge)
    truth = read_truth_csv(args.truth)
    reports = []
    for path in args.cloud:
        if not Path(path).is_file():
            raise ConfigError(f"cloud not found: {path}")
        cloud = read_cloud(path)
        if cloud.scan_id not in truth:
            raise FormatError(f"{args.truth}: no labels for scan {cloud.scan_id!r}")
        try:
            reports.append(evaluate(cloud, truth[cloud.scan_id], merge, method=args.method))
        except SemFuseError as exc:
            raise StageError("evaluation", f"{path}: {exc}") from exc
    report = pool(reports)
    write_report_json(args.report, report)
    print(format_report(report))
    return 0


def cmd_synth(args) -> int:
    from dataclasses import replace

    from .synthscene import export_dataset, scene_by_name, scene_gaps

    spec = scene_by_name(args.scene, args.seed)
    if args.speed is not None:
        spec = replace(spec, trajectory=replace(spec.trajectory, speed=args.speed))
    paths = export_dataset(spec, args.out, sweeps=args.sweeps)
    g = scene_gaps(spec)
    for key in sorted(paths):
        print(f"{key}: {paths[key]}")
    print(f"lidar resolution: --theta-v {g.theta_v:.9g} --theta-h {g.theta_h:.9g}")
    return 0


def cmd_ablate(args) -> int:
    from .evaluation import format_ablation, write_report_json
    from .synthscene import ablate_scene, scene_by_name

    spec = scene_by_name(args.scene, args.seed)
    try:
        reports = ablate_scene(spec, args.mode)
    except SemFuseError as exc:
        raise StageError("ablation", str(exc)) from exc
    if args.report:
        write_report_json(args.report, reports)
    print(format_ablation(reports))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semfuse", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for every random choice (default 0)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("probabilize", parents=[common], help="score map + superpixels (or image) -> probability image")
    p.add_argument("--scores", required=True, help="SFSM score map")
    p.add_argument("--superpixels", help="SFSP superpixel map")
    p.add_argument("--image", help="RGB image to segment with SLIC")
    p.add_argument("-o", "--output", required=True, help="SFPB output path")
    _add_slic(p)
    p.set_defaults(func=cmd_probabilize)

    p = sub.add_parser("fuse", parents=[common], help="run the full pipeline over a scan file")
    p.add_argument("--calib", required=True)
    p.add_argument("--odometry", required=True)
    p.add_argument("--scans", required=True)
    p.add_argument("--frames", required=True, help="frames manifest JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--merge", help="class merge spec JSON (output in merged classes)")
    p.add_argument("--mode", choices=INTERP_MODES, default="nearest")
    p.add_argument("--theta-v", type=float, default=2.0, help="lidar vertical resolution, degrees")
    p.add_argument("--theta-h", type=float, default=0.1, help="lidar horizontal resolution, degrees")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--dump-stage", action="append", default=[], choices=STAGES)
    p.add_argument("--no-mask", action="store_true", help="skip occlusion masking")
    _add_slic(p)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("evaluate", parents=[common], help="per-class recall / precision / F1")
    p.add_argument("--cloud", required=True, nargs="+", help="semantic-cloud CSV(s), sidecar next to each")
    p.add_argument("--truth", required=True)
    p.add_argument("--merge")
    p.add_argument("--method", default="motion_mask")
    p.add_argument("--report", default="report.json")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic dataset")
    p.add_argument("--scene", default="street", help="street, occlusion, or a scene JSON path")
    p.add_argument("--sweeps", type=int, default=1)
    p.add_argument("--speed", type=float, default=None, help="override vehicle speed, m/s")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ablate", parents=[common], help="direct vs motion vs motion+mask on a synthetic scene")
    p.add_argument("--scene", default="street")
    p.add_argument("--mode", choices=INTERP_MODES, default="interpolated")
    p.add_argument("--report", help="write the three reports as JSON")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FormatError, StageError) as exc:
        print(f"semfuse {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"semfuse {args.command}: {exc}", file=sys.stderr)
        return ConfigError.exit_code
    except (SemFuseError, json.JSONDecodeError) as exc:
        print(f"semfuse {args.command}: {exc}", file=sys.stderr)
        return FormatError.exit_code


if __name__ == "__main__":
    sys.exit(main())
