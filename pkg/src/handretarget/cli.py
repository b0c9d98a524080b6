"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 input/parse error, 3 numerical
failure.  Outputs are written atomically, so a failing command leaves no
partial files.  Set HANDRETARGET_LOG=DEBUG (or any logging level name) for
verbose logging.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import evaluation as ev
from . import fileio
from . import fixtures as fx
from . import hand_model as hm
from . import mesh as meshio
from . import retarget as rt
from .errors import HandRetargetError, NumericalError, ParseError, RayMissError
from .semantics import extract_asm
from .tbs_frames import annotate_frames

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_NUMERICAL = 3

FIXTURE_PRESETS = ("default", "rest", "curl", "pinch", "bend_sweep")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser():
    parser = _Parser(
        prog="handretarget",
        description="Measure and retarget hand motion semantics between hand models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("annotate", help="derive rest twist-bend-splay frames from a mesh")
    p.add_argument("--skeleton", required=True, help="input skeleton JSON")
    p.add_argument("--mesh", required=True, help="hand mesh (ASCII OBJ, triangles)")
    p.add_argument("--config", help="run config JSON (resolution, overrides)")
    p.add_argument("--out", required=True, help="output skeleton JSON with frames filled in")
    p.add_argument("--threads", type=int, default=1, help="parallel per-joint searches")

    p = sub.add_parser("retarget", help="retarget a motion onto another skeleton")
    p.add_argument("--source-motion", required=True)
    p.add_argument("--source-skeleton", required=True)
    p.add_argument("--target-skeleton", required=True)
    p.add_argument("--config", help="run config JSON")
    p.add_argument("--method", choices=("copy", "tbs_copy", "optimize"), default="optimize")
    p.add_argument("--out", required=True, help="output motion JSON")
    p.add_argument("--report", help="metrics report JSON")
    p.add_argument("--report-csv", help="metrics report CSV")
    p.add_argument("--gt-motion", help="paired ground-truth motion for positional MSE")
    p.add_argument("--init-motion", help="initial motion for init='given'")

    p = sub.add_parser("evaluate", help="compare two motions via their semantic matrices")
    p.add_argument("--motion-a", required=True)
    p.add_argument("--skeleton-a", required=True)
    p.add_argument("--motion-b", required=True)
    p.add_argument("--skeleton-b", required=True)
    p.add_argument("--report", help="metrics report JSON")
    p.add_argument("--report-csv", help="metrics report CSV")

    p = sub.add_parser("extract-asm", help="dump the semantic matrix of a motion")
    p.add_argument("--motion", required=True)
    p.add_argument("--skeleton", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("make-fixture", help="emit synthetic skeleton/mesh/motion files")
    p.add_argument("--preset", default="default")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)

    return parser


def _load_config(path):
    if path is None:
        return fileio.RunConfig()
    return fileio.load_run_config(path)


def _cmd_annotate(args):
    config = _load_config(args.config)
    skeleton = fileio.load_skeleton(args.skeleton)
    mesh = meshio.load_obj(args.mesh)
    frames = annotate_frames(
        skeleton,
        mesh,
        overrides=config.overrides,
        resolution=config.annotation_resolution,
        threads=max(1, args.threads),
    )
    annotated = hm.HandSkeleton(
        offsets=skeleton.offsets,
        rest_tbs=frames,
        shape=skeleton.shape,
        palm_back=skeleton.palm_back,
        joint_names=skeleton.joint_names,
    )
    fileio.save_skeleton(annotated, args.out)
    return EXIT_OK


def _tbs_rotations(motion, skeleton):
    if motion.convention == hm.TBS_LOCAL:
        return motion
    return hm.global_to_tbs(motion, skeleton)


def _same_rest_frames(skel_a, skel_b):
    return np.array_equal(skel_a.rest_tbs, skel_b.rest_tbs)


def _run_retarget(args):
    config = _load_config(args.config)
    skel_a = fileio.load_skeleton(args.source_skeleton)
    skel_b = fileio.load_skeleton(args.target_skeleton)
    source = fileio.load_motion(args.source_motion)

    # the pipeline operates in TBS-local terms; output is returned in the
    # input file's convention
    if args.method == "copy":
        if source.convention == hm.GLOBAL or _same_rest_frames(skel_a, skel_b):
            # copying global rotations is the identity in the file's own
            # convention in both of these cases
            out = source
        else:
            out = hm.global_to_tbs(hm.tbs_to_global(source, skel_a), skel_b)
        reports = None
    elif args.method == "tbs_copy":
        if source.convention == hm.TBS_LOCAL or _same_rest_frames(skel_a, skel_b):
            out = source
        else:
            out = hm.tbs_to_global(hm.global_to_tbs(source, skel_a), skel_b)
        reports = None
    else:
        source_tbs = _tbs_rotations(source, skel_a)
        init_motion = None
        if args.init_motion is not None:
            init_motion = _tbs_rotations(fileio.load_motion(args.init_motion), skel_b)
        if source_tbs.frames <= config.window:
            report = rt.retarget_optimize(
                source_tbs, skel_a, skel_b, config.optimizer, init_motion=init_motion
            )
            out_tbs, reports = report.motion, [report]
        else:
            out_tbs, reports = rt.retarget_sequence_windows(
                source_tbs,
                skel_a,
                skel_b,
                config.optimizer,
                window=config.window,
                overlap=config.overlap,
            )
        out = (
            hm.tbs_to_global(out_tbs, skel_b)
            if source.convention == hm.GLOBAL
            else out_tbs
        )

    d_a = extract_asm(_tbs_rotations(source, skel_a), skel_a)
    out_tbs = _tbs_rotations(out, skel_b)
    d_b = extract_asm(out_tbs, skel_b)

    fk_gt = fk_b = None
    if args.gt_motion is not None:
        gt = _tbs_rotations(fileio.load_motion(args.gt_motion), skel_b)
        fk_gt = hm.forward_kinematics(hm.tbs_to_global(gt, skel_b), skel_b)
        fk_b = hm.forward_kinematics(hm.tbs_to_global(out_tbs, skel_b), skel_b)
    metrics = ev.metrics_report(d_a, d_b, fk_gt=fk_gt, fk_b=fk_b)

    fileio.save_motion(out, args.out)
    if args.report:
        ev.write_report_json(metrics, args.report)
    if args.report_csv:
        ev.write_report_csv(metrics, args.report_csv)
    if reports is not None:
        for i, r in enumerate(reports):
            log.info(
                "window %d: %d iterations, converged=%s, final loss %.6f",
                i,
                r.iterations,
                r.converged,
                r.loss_trace[-1],
            )
    log.info("s_palm=%.6f s_finger=%.6f", metrics.s_palm, metrics.s_finger)
    return EXIT_OK


def _cmd_evaluate(args):
    skel_a = fileio.load_skeleton(args.skeleton_a)
    skel_b = fileio.load_skeleton(args.skeleton_b)
    motion_a = _tbs_rotations(fileio.load_motion(args.motion_a), skel_a)
    motion_b = _tbs_rotations(fileio.load_motion(args.motion_b), skel_b)
    if motion_a.frames != motion_b.frames:
        raise ParseError(
            f"frame counts differ: {motion_a.frames} vs {motion_b.frames}"
        )
    d_a = extract_asm(motion_a, skel_a)
    d_b = extract_asm(motion_b, skel_b)
    metrics = ev.metrics_report(d_a, d_b)
    if args.report:
        ev.write_report_json(metrics, args.report)
    if args.report_csv:
        ev.write_report_csv(metrics, args.report_csv)
    sys.stdout.write(
        f"s_palm={metrics.s_palm!r} s_finger={metrics.s_finger!r} frames={metrics.frames}\n"
    )
    return EXIT_OK


def _cmd_extract_asm(args):
    skeleton = fileio.load_skeleton(args.skeleton)
    motion = _tbs_rotations(fileio.load_motion(args.motion), skeleton)
    fileio.save_asm(extract_asm(motion, skeleton), args.out)
    return EXIT_OK


def _cmd_make_fixture(args):
    if args.preset not in FIXTURE_PRESETS:
        raise _UsageError(
            f"unknown preset {args.preset!r}; available: {', '.join(FIXTURE_PRESETS)}"
        )
    os.makedirs(args.out_dir, exist_ok=True)
    skeleton, mesh = fx.make_synthetic_hand(seed=args.seed)
    fileio.save_skeleton(skeleton, os.path.join(args.out_dir, "skeleton.json"))
    meshio.save_obj(mesh, os.path.join(args.out_dir, "mesh.obj"))

    def emit(name, motion):
        fileio.save_motion(motion, os.path.join(args.out_dir, f"motion_{name}.json"))

    wanted = (
        ("rest", "curl", "pinch", "bend_sweep")
        if args.preset == "default"
        else (args.preset,)
    )
    for name in wanted:
        if name == "pinch":
            emit(name, fx.pinch_motion(skeleton))
        else:
            emit(name, fx.PRESET_MOTIONS[name]())

    if args.preset == "default":
        base = fx.SynthHandSpec()
        for factor, tag in ((0.7, "x0.7"), (1.3, "x1.3")):
            variant, _ = fx.make_synthetic_hand(
                base.finger_lengths_scaled(factor), seed=args.seed
            )
            fileio.save_skeleton(
                variant, os.path.join(args.out_dir, f"skeleton_fingers_{tag}.json")
            )
        fan, _ = fx.make_synthetic_hand(
            base.fanned((-0.15, 0.12, 0.0, -0.12, -0.25)), seed=args.seed
        )
        fileio.save_skeleton(fan, os.path.join(args.out_dir, "skeleton_fan.json"))
    return EXIT_OK


_COMMANDS = {
    "annotate": _cmd_annotate,
    "retarget": _run_retarget,
    "evaluate": _cmd_evaluate,
    "extract-asm": _cmd_extract_asm,
    "make-fixture": _cmd_make_fixture,
}


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("HANDRETARGET_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, FileNotFoundError, IsADirectoryError, PermissionError) as e:
        print(f"input error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, RayMissError) as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except HandRetargetError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as e:
        print(f"input error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
