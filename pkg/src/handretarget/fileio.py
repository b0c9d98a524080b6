"""JSON file formats for skeletons, motions, semantic matrices, and configs.

All writers are atomic (temp file + rename), emit floats with Python's
shortest round-trip repr so files reload value-exactly and rewrite
byte-identically, and canonicalize quaternion signs to w >= 0.  Loaders are
strict: unknown keys are rejected.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from . import hand_model as hm
from . import rotations as rot
from .errors import ParseError
from .objectives import LossWeights
from .retarget import RetargetConfig
from .semantics import ROW_COUNT, SemanticMatrix
from .tbs_frames import DEFAULT_RESOLUTION, FrameOverride

SKELETON_VERSION = 1
MOTION_VERSION = 1
ASM_VERSION = 1


def _f(x):
    """float() with negative zero scrubbed, for stable serialization."""
    return float(x) + 0.0


def atomic_write_text(path, text):
    """Write ``text`` to ``path`` via a temp file in the same directory."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump_json(doc):
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def _load_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: invalid JSON ({e})") from e


def _check_keys(obj, allowed, ctx, strict=True):
    if not isinstance(obj, dict):
        raise ParseError(f"{ctx}: expected an object")
    if strict:
        unknown = set(obj) - set(allowed)
        if unknown:
            raise ParseError(f"{ctx}: unknown keys {sorted(unknown)}")


def _need(obj, key, ctx):
    if key not in obj:
        raise ParseError(f"{ctx}: missing key {key!r}")
    return obj[key]


# ---------------------------------------------------------------------------
# skeleton


def save_skeleton(skeleton: hm.HandSkeleton, path):
    joints = []
    for j in range(hm.JOINT_COUNT):
        joints.append(
            {
                "name": skeleton.joint_names[j],
                "parent": hm.PARENTS[j],
                "offset": [_f(v) for v in skeleton.offsets[j]],
                "finger": hm.FINGER_OF[j],
                "actuated": hm.ACTUATED[j],
            }
        )
    doc = {
        "version": SKELETON_VERSION,
        "joints": joints,
        "rest_tbs": [
            [_f(v) for v in m.reshape(-1)] for m in skeleton.rest_tbs
        ],
        "shape": {
            "kind": skeleton.shape.kind,
            "values": [_f(v) for v in skeleton.shape.values],
        },
        "palm_back": [_f(v) for v in skeleton.palm_back],
    }
    atomic_write_text(path, _dump_json(doc))


def load_skeleton(path, strict=True) -> hm.HandSkeleton:
    doc = _load_json(path)
    ctx = str(path)
    _check_keys(doc, {"version", "joints", "rest_tbs", "shape", "palm_back"}, ctx, strict)
    if _need(doc, "version", ctx) != SKELETON_VERSION:
        raise ParseError(f"{ctx}: unsupported skeleton version {doc['version']!r}")

    joints = _need(doc, "joints", ctx)
    if not isinstance(joints, list) or len(joints) != hm.JOINT_COUNT:
        raise ParseError(f"{ctx}: need exactly {hm.JOINT_COUNT} joints")
    names = []
    offsets = np.zeros((hm.JOINT_COUNT, 3))
    for j, rec in enumerate(joints):
        jctx = f"{ctx}: joint {j}"
        _check_keys(rec, {"name", "parent", "offset", "finger", "actuated"}, jctx, strict)
        names.append(str(_need(rec, "name", jctx)))
        if _need(rec, "parent", jctx) != hm.PARENTS[j]:
            raise ParseError(f"{jctx}: parent must be {hm.PARENTS[j]} in the fixed layout")
        if _need(rec, "finger", jctx) != hm.FINGER_OF[j]:
            raise ParseError(f"{jctx}: finger must be {hm.FINGER_OF[j]}")
        if bool(_need(rec, "actuated", jctx)) != hm.ACTUATED[j]:
            raise ParseError(f"{jctx}: actuated flag must be {hm.ACTUATED[j]}")
        off = _need(rec, "offset", jctx)
        if not isinstance(off, list) or len(off) != 3:
            raise ParseError(f"{jctx}: offset must be a 3-vector")
        offsets[j] = off
    if len(set(names)) != hm.JOINT_COUNT:
        raise ParseError(f"{ctx}: joint names must be unique")

    mats = _need(doc, "rest_tbs", ctx)
    if not isinstance(mats, list) or len(mats) != hm.ACTUATED_COUNT:
        raise ParseError(f"{ctx}: rest_tbs needs {hm.ACTUATED_COUNT} matrices")
    rest = np.zeros((hm.ACTUATED_COUNT, 3, 3))
    for i, m in enumerate(mats):
        if not isinstance(m, list) or len(m) != 9:
            raise ParseError(f"{ctx}: rest_tbs[{i}] must have 9 row-major entries")
        rest[i] = np.asarray(m, dtype=float).reshape(3, 3)

    shape_doc = _need(doc, "shape", ctx)
    _check_keys(shape_doc, {"kind", "values"}, f"{ctx}: shape", strict)
    shape = hm.ShapeParams(
        str(_need(shape_doc, "kind", ctx)),
        np.asarray(_need(shape_doc, "values", ctx), dtype=float),
    )
    palm_back = np.asarray(_need(doc, "palm_back", ctx), dtype=float)
    try:
        return hm.HandSkeleton(
            offsets=offsets,
            rest_tbs=rest,
            shape=shape,
            palm_back=palm_back,
            joint_names=tuple(names),
        )
    except ValueError as e:
        raise ParseError(f"{ctx}: {e}") from e


# ---------------------------------------------------------------------------
# motion


def save_motion(motion: hm.MotionSequence, path):
    canon = rot.quat_canonical(motion.rotations)
    doc = {
        "version": MOTION_VERSION,
        "fps": float(motion.fps),
        "convention": motion.convention,
        "frames": motion.frames,
        "rotations": [
            [[_f(c) for c in q] for q in frame] for frame in canon
        ],
    }
    atomic_write_text(path, _dump_json(doc))


def load_motion(path, strict=True) -> hm.MotionSequence:
    doc = _load_json(path)
    ctx = str(path)
    _check_keys(doc, {"version", "fps", "convention", "frames", "rotations"}, ctx, strict)
    if _need(doc, "version", ctx) != MOTION_VERSION:
        raise ParseError(f"{ctx}: unsupported motion version {doc['version']!r}")
    rotations = _need(doc, "rotations", ctx)
    frames = _need(doc, "frames", ctx)
    if not isinstance(rotations, list) or len(rotations) != frames:
        raise ParseError(f"{ctx}: frames field does not match rotation count")
    if frames < 1:
        raise ParseError(f"{ctx}: empty sequence")
    arr = np.asarray(rotations, dtype=float)
    if arr.shape != (frames, hm.ACTUATED_COUNT, 4):
        raise ParseError(f"{ctx}: rotations must be {frames}x15x4, got {arr.shape}")
    if np.any(arr[..., 0] < 0):
        raise ParseError(f"{ctx}: stored quaternions must have w >= 0")
    try:
        return hm.MotionSequence(
            arr, str(_need(doc, "convention", ctx)), float(_need(doc, "fps", ctx))
        )
    except (ValueError, KeyError) as e:
        raise ParseError(f"{ctx}: {e}") from e


# ---------------------------------------------------------------------------
# semantic matrix dump


def save_asm(matrix: SemanticMatrix, path):
    doc = {
        "version": ASM_VERSION,
        "layout": "(joint, frame, row, xyz)",
        "joints": hm.JOINT_COUNT,
        "frames": matrix.frames,
        "rows": ROW_COUNT,
        "data": (matrix.data + 0.0).tolist(),
    }
    atomic_write_text(path, _dump_json(doc))


def load_asm(path, strict=True) -> SemanticMatrix:
    doc = _load_json(path)
    ctx = str(path)
    _check_keys(doc, {"version", "layout", "joints", "frames", "rows", "data"}, ctx, strict)
    if _need(doc, "version", ctx) != ASM_VERSION:
        raise ParseError(f"{ctx}: unsupported matrix version {doc['version']!r}")
    data = np.asarray(_need(doc, "data", ctx), dtype=float)
    want = (
        _need(doc, "joints", ctx),
        _need(doc, "frames", ctx),
        _need(doc, "rows", ctx),
        3,
    )
    if data.shape != want:
        raise ParseError(f"{ctx}: data shape {data.shape} does not match header {want}")
    try:
        return SemanticMatrix(data)
    except ValueError as e:
        raise ParseError(f"{ctx}: {e}") from e


# ---------------------------------------------------------------------------
# run config


@dataclass(frozen=True)
class RunConfig:
    """Pipeline settings: loss weights, optimizer, windowing, annotation."""

    optimizer: RetargetConfig = field(default_factory=RetargetConfig)
    window: int = 8
    overlap: int = 0
    annotation_resolution: float = DEFAULT_RESOLUTION
    overrides: tuple = ()

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be at least 1")
        if not 0 <= self.overlap < self.window:
            raise ValueError("overlap must be in [0, window)")
        if not 0.0 < self.annotation_resolution <= np.deg2rad(10.0) + 1e-12:
            raise ValueError("annotation resolution must be in (0, 10 degrees]")


_OPTIMIZER_KEYS = {"max_iters", "step_size", "tol", "init", "seed"}


def load_run_config(path, strict=True) -> RunConfig:
    doc = _load_json(path)
    ctx = str(path)
    _check_keys(
        doc,
        {"lambda_sem", "lambda_ana", "optimizer", "window", "overlap", "annotation"},
        ctx,
        strict,
    )
    weights = LossWeights(
        lambda_sem=float(doc.get("lambda_sem", 1.0)),
        lambda_ana=float(doc.get("lambda_ana", 0.1)),
    )
    opt_doc = doc.get("optimizer", {})
    _check_keys(opt_doc, _OPTIMIZER_KEYS, f"{ctx}: optimizer", strict)
    defaults = RetargetConfig()
    try:
        optimizer = RetargetConfig(
            max_iters=int(opt_doc.get("max_iters", defaults.max_iters)),
            step_size=float(opt_doc.get("step_size", defaults.step_size)),
            tol=float(opt_doc.get("tol", defaults.tol)),
            init=str(opt_doc.get("init", defaults.init)),
            weights=weights,
            seed=int(opt_doc.get("seed", defaults.seed)),
        )
        ann_doc = doc.get("annotation", {})
        _check_keys(ann_doc, {"resolution_rad", "overrides"}, f"{ctx}: annotation", strict)
        overrides = []
        for i, ov in enumerate(ann_doc.get("overrides", [])):
            octx = f"{ctx}: override {i}"
            _check_keys(ov, {"joint", "roll", "bend_axis"}, octx, strict)
            overrides.append(
                FrameOverride(
                    joint=str(_need(ov, "joint", octx)),
                    roll=float(ov["roll"]) if "roll" in ov else None,
                    bend_axis=(
                        np.asarray(ov["bend_axis"], dtype=float)
                        if "bend_axis" in ov
                        else None
                    ),
                )
            )
        return RunConfig(
            optimizer=optimizer,
            window=int(doc.get("window", 8)),
            overlap=int(doc.get("overlap", 0)),
            annotation_resolution=float(
                ann_doc.get("resolution_rad", DEFAULT_RESOLUTION)
            ),
            overrides=tuple(overrides),
        )
    except ValueError as e:
        raise ParseError(f"{ctx}: {e}") from e
