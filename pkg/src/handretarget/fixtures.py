"""Synthetic hands, meshes, and motions for tests and the fixture CLI.

The synthetic hand lies in the palm plane z = 0 with fingers fanned around
+x, the back of the hand toward +z, and the wrist at the origin.  Finger
boxes are wider along the bend axis than along the splay axis, matching real
finger cross-sections, so frame annotation has an unambiguous ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import rotations as rot
from .hand_model import (
    ACTUATED_COUNT,
    ACTUATED_JOINTS,
    ACTUATED_SLOT,
    GLOBAL,
    JOINT_COUNT,
    JOINT_NAMES,
    PARENTS,
    TBS_LOCAL,
    HandSkeleton,
    MotionSequence,
    ShapeParams,
    forward_kinematics,
    tbs_to_global,
)
from .mesh import TriMesh

_DEF_PALM_X = (0.030, 0.077, 0.079, 0.075, 0.067)
_DEF_LATERAL = (0.026, 0.022, 0.000, -0.022, -0.044)
# distal segments nearly as long as proximal ones so a deep curl brings the
# fingertips back to the palm plane, like a closed fist
_DEF_SEGMENTS = (
    (0.042, 0.036, 0.030),  # thumb
    (0.040, 0.033, 0.036),
    (0.043, 0.035, 0.040),
    (0.040, 0.033, 0.037),
    (0.033, 0.028, 0.030),
)
_DEF_WIDTHS = (0.018, 0.016, 0.016, 0.015, 0.013)
_DEF_HEIGHTS = (0.013, 0.011, 0.011, 0.010, 0.009)
_DEF_YAW = (0.45, 0.0, 0.0, 0.0, 0.0)
_DEF_CANT = (-0.65, 0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class SynthHandSpec:
    """Geometric recipe for a synthetic hand.

    palm_x / lateral: wrist→mcp placement per finger (x and y components).
    seg_lengths:      (5, 3) proximal/middle/distal segment lengths.
    widths / heights: finger box extents along the bend / splay axes.
    yaw:              finger direction angle about +z from +x, per finger.
    cant:             roll of the splay axis about the bone, per finger
                      (nonzero for the thumb so it opposes the fingers).
    """

    palm_x: tuple = _DEF_PALM_X
    lateral: tuple = _DEF_LATERAL
    seg_lengths: tuple = _DEF_SEGMENTS
    widths: tuple = _DEF_WIDTHS
    heights: tuple = _DEF_HEIGHTS
    yaw: tuple = _DEF_YAW
    cant: tuple = _DEF_CANT

    def __post_init__(self):
        for name in ("palm_x", "lateral", "widths", "heights", "yaw", "cant"):
            if len(getattr(self, name)) != 5:
                raise ValueError(f"{name} must have 5 entries")
        if len(self.seg_lengths) != 5 or any(len(s) != 3 for s in self.seg_lengths):
            raise ValueError("seg_lengths must be 5x3")
        dims = list(self.palm_x) + list(self.widths) + list(self.heights)
        dims += [v for s in self.seg_lengths for v in s]
        if any(d <= 0 for d in dims):
            raise ValueError("lengths, widths and heights must be positive")

    def scaled(self, s):
        """Uniformly scale all linear dimensions by ``s``."""
        if s <= 0:
            raise ValueError("scale must be positive")
        return replace(
            self,
            palm_x=tuple(v * s for v in self.palm_x),
            lateral=tuple(v * s for v in self.lateral),
            seg_lengths=tuple(tuple(v * s for v in seg) for seg in self.seg_lengths),
            widths=tuple(v * s for v in self.widths),
            heights=tuple(v * s for v in self.heights),
        )

    def finger_lengths_scaled(self, s):
        """Scale only the finger segment lengths (the shape variants used
        when retargeting to shorter/longer-fingered hands)."""
        if s <= 0:
            raise ValueError("scale must be positive")
        return replace(
            self,
            seg_lengths=tuple(tuple(v * s for v in seg) for seg in self.seg_lengths),
        )

    def fanned(self, angles):
        """Add per-finger yaw offsets (radians)."""
        if len(angles) != 5:
            raise ValueError("need 5 fan angles")
        return replace(self, yaw=tuple(y + a for y, a in zip(self.yaw, angles)))


def _finger_frames(spec):
    """(5, 3, 3) ground-truth rest frames, columns (twist, bend, splay)."""
    frames = np.empty((5, 3, 3))
    for f in range(5):
        c, s = np.cos(spec.yaw[f]), np.sin(spec.yaw[f])
        twist = np.array([c, s, 0.0])
        splay = rot.quat_rotate(
            rot.quat_from_axis_angle(twist, spec.cant[f]), np.array([0.0, 0.0, 1.0])
        )
        bend = np.cross(splay, twist)
        frames[f] = np.stack([twist, bend, splay], axis=-1)
    return frames


def _spec_with_seed(spec, seed):
    """Deterministic per-seed proportion jitter (±4%) on segment lengths."""
    rng = np.random.default_rng(seed)
    factors = rng.uniform(0.96, 1.04, size=(5, 3))
    segs = tuple(
        tuple(v * factors[f, i] for i, v in enumerate(spec.seg_lengths[f]))
        for f in range(5)
    )
    return replace(spec, seg_lengths=segs)


def make_synthetic_hand(spec: SynthHandSpec | None = None, seed: int = 0):
    """Build a (HandSkeleton, TriMesh) pair with known rest TBS frames.

    The mesh is one closed box per finger segment, slightly extended past
    both joints so perpendicular rays from every actuated joint hit the
    walls cleanly.  Box faces carry exact face normals (vertices are
    duplicated per face).
    """
    spec = _spec_with_seed(spec or SynthHandSpec(), seed)
    frames = _finger_frames(spec)

    offsets = np.zeros((JOINT_COUNT, 3))
    rest_tbs = np.zeros((ACTUATED_COUNT, 3, 3))
    for f in range(5):
        d = frames[f, :, 0]
        mcp = 4 * f
        offsets[mcp] = np.array([spec.palm_x[f], spec.lateral[f], 0.0])
        for s in range(3):
            offsets[mcp + 1 + s] = spec.seg_lengths[f][s] * d
        for s in range(3):
            rest_tbs[ACTUATED_SLOT[mcp + s]] = frames[f]

    skeleton = HandSkeleton(
        offsets=offsets,
        rest_tbs=rest_tbs,
        shape=_offsets_shape(offsets),
        palm_back=np.array([0.0, 0.0, 1.0]),
    )

    mesh = _hand_mesh(skeleton, spec, frames)
    return skeleton, mesh


def _offsets_shape(offsets):
    act = offsets[list(ACTUATED_JOINTS)]
    scale = np.linalg.norm(act).item() or 1.0
    return ShapeParams("offsets", (act / scale).reshape(-1))


def _hand_mesh(skeleton, spec, frames):
    rest = skeleton.rest_positions()
    verts, norms, tris = [], [], []
    for f in range(5):
        t_ax, b_ax, s_ax = frames[f, :, 0], frames[f, :, 1], frames[f, :, 2]
        w2, h2 = spec.widths[f] / 2.0, spec.heights[f] / 2.0
        margin = 0.4 * min(w2, h2)
        for s in range(3):
            j = 4 * f + s
            p0 = rest[j] - margin * t_ax
            p1 = rest[j + 1] + margin * t_ax
            _append_box(verts, norms, tris, p0, p1, t_ax, b_ax, s_ax, w2, h2)
    return TriMesh(
        vertices=np.array(verts),
        triangles=np.array(tris, dtype=int),
        vertex_normals=np.array(norms),
    )


def _append_box(verts, norms, tris, p0, p1, t_ax, b_ax, s_ax, w2, h2):
    # 6 faces, 4 vertices each; vertices duplicated per face so interpolated
    # normals equal the exact face normal
    corners = {}
    for sb in (-1, 1):
        for ss in (-1, 1):
            corners[(0, sb, ss)] = p0 + sb * w2 * b_ax + ss * h2 * s_ax
            corners[(1, sb, ss)] = p1 + sb * w2 * b_ax + ss * h2 * s_ax

    faces = [
        (b_ax, [(0, 1, -1), (1, 1, -1), (1, 1, 1), (0, 1, 1)]),
        (-b_ax, [(0, -1, 1), (1, -1, 1), (1, -1, -1), (0, -1, -1)]),
        (s_ax, [(0, 1, 1), (1, 1, 1), (1, -1, 1), (0, -1, 1)]),
        (-s_ax, [(0, -1, -1), (1, -1, -1), (1, 1, -1), (0, 1, -1)]),
        (t_ax, [(1, 1, -1), (1, -1, -1), (1, -1, 1), (1, 1, 1)]),
        (-t_ax, [(0, 1, 1), (0, -1, 1), (0, -1, -1), (0, 1, -1)]),
    ]
    for normal, keys in faces:
        base = len(verts)
        for k in keys:
            verts.append(corners[k])
            norms.append(normal)
        tris.append((base, base + 1, base + 2))
        tris.append((base, base + 2, base + 3))


# ---------------------------------------------------------------------------
# preset motions (all tbs_local, in anatomical range)

_DEF_FPS = 5.0


def _identity_rotations(frames):
    q = np.zeros((frames, ACTUATED_COUNT, 4))
    q[..., 0] = 1.0
    return q


def _bend_quats(bend):
    """(...,) bend angles -> (..., 4) pure-bend TBS-local quaternions."""
    bend = np.asarray(bend, dtype=float)
    angles = np.zeros(bend.shape + (3,))
    angles[..., 1] = bend
    return rot.quat_from_tbs_euler(angles)


def rest_motion(frames=1, fps=_DEF_FPS):
    return MotionSequence(_identity_rotations(frames), TBS_LOCAL, fps)


def curl_motion(frames=8, fps=_DEF_FPS, max_bend=1.2):
    """All joints bend together from rest to ``max_bend`` radians."""
    ramp = np.linspace(1.0 / frames, 1.0, frames) * max_bend
    bend = np.repeat(ramp[:, None], ACTUATED_COUNT, axis=1)
    return MotionSequence(_bend_quats(bend), TBS_LOCAL, fps)


def bend_sweep_motion(frames_per_finger=4, fps=_DEF_FPS, max_bend=1.2):
    """Each finger in turn bends from rest to ``max_bend``."""
    frames = 5 * frames_per_finger
    bend = np.zeros((frames, ACTUATED_COUNT))
    ramp = np.linspace(1.0 / frames_per_finger, 1.0, frames_per_finger) * max_bend
    for f in range(5):
        rows = slice(f * frames_per_finger, (f + 1) * frames_per_finger)
        bend[rows, 3 * f : 3 * f + 3] = ramp[:, None]
    return MotionSequence(_bend_quats(bend), TBS_LOCAL, fps)


def pinch_motion(skeleton, frames=8, fps=_DEF_FPS):
    """Thumb and index curl until their tips (nearly) touch at the last frame.

    The six peak bend angles (thumb and index chains) are found by a grid
    search plus coordinate descent through forward kinematics, so the
    fixture adapts to the skeleton it is given.  All angles stay inside the
    anatomical bend range.
    """
    peak = _pinch_peak_angles(skeleton)
    ramp = np.linspace(1.0 / frames, 1.0, frames)
    bend = np.zeros((frames, ACTUATED_COUNT))
    bend[:, 0:6] = ramp[:, None] * peak[None, :]
    # the remaining fingers curl deep into the palm, fist-like
    bend[:, 6:15] = ramp[:, None] * 1.5
    return MotionSequence(_bend_quats(bend), TBS_LOCAL, fps)


def _tip_distance(skeleton, bend):
    motion = MotionSequence(_bend_quats(bend), TBS_LOCAL, _DEF_FPS)
    fk = forward_kinematics(tbs_to_global(motion, skeleton), skeleton)
    thumb_tip = JOINT_NAMES.index("thumb_tip")
    index_tip = JOINT_NAMES.index("index_tip")
    return np.linalg.norm(
        fk.positions[:, thumb_tip] - fk.positions[:, index_tip], axis=-1
    )


def _pinch_peak_angles(skeleton):
    """(6,) bend angles (thumb mcp/pip/dip, index mcp/pip/dip) in [0, pi/2)."""
    hi = 1.55
    ct = np.linspace(0.05, hi, 24)
    tt, ii = np.meshgrid(ct, ct, indexing="ij")
    flat_t, flat_i = tt.ravel(), ii.ravel()
    bend = np.zeros((flat_t.size, ACTUATED_COUNT))
    bend[:, 0:3] = flat_t[:, None]
    bend[:, 3:6] = flat_i[:, None]
    dist = _tip_distance(skeleton, bend)
    k = int(np.argmin(dist))
    angles = np.concatenate([np.full(3, flat_t[k]), np.full(3, flat_i[k])])

    # coordinate descent on the 6 individual joint angles
    for _ in range(4):
        for p in range(6):
            cand = np.linspace(0.0, hi, 32)
            bend = np.zeros((cand.size, ACTUATED_COUNT))
            bend[:, 0:6] = angles[None, :]
            bend[:, p] = cand
            dist = _tip_distance(skeleton, bend)
            angles[p] = cand[int(np.argmin(dist))]
    return angles


PRESET_MOTIONS = {
    "rest": rest_motion,
    "curl": curl_motion,
    "bend_sweep": bend_sweep_motion,
}


# ---------------------------------------------------------------------------
# randomized helpers for property and gradient tests


def random_hand(rng) -> HandSkeleton:
    """A valid skeleton with randomized offsets and rest frames."""
    offsets = np.zeros((JOINT_COUNT, 3))
    for f in range(5):
        mcp = 4 * f
        offsets[mcp] = np.array(
            [rng.uniform(0.05, 0.1), rng.uniform(-0.05, 0.05), rng.uniform(-0.02, 0.02)]
        )
        for s in range(1, 4):
            d = rng.normal(size=3)
            d[0] += 3.0  # bias distally so chains do not fold onto the wrist
            d /= np.linalg.norm(d)
            offsets[mcp + s] = rng.uniform(0.02, 0.05) * d
    rest_tbs = rot.quat_to_matrix(rot.random_unit_quats(rng, (ACTUATED_COUNT,)))
    palm_back = rng.normal(size=3)
    palm_back /= np.linalg.norm(palm_back)
    return HandSkeleton(
        offsets=offsets,
        rest_tbs=rest_tbs,
        shape=_offsets_shape(offsets),
        palm_back=palm_back,
    )


def random_motion(rng, frames=1, convention=TBS_LOCAL, fps=_DEF_FPS) -> MotionSequence:
    return MotionSequence(
        rot.random_unit_quats(rng, (frames, ACTUATED_COUNT)), convention, fps
    )


def random_inrange_motion(rng, frames=1, fps=_DEF_FPS) -> MotionSequence:
    """Random pure-bend motion inside the anatomical limits (zero loss)."""
    bend = rng.uniform(0.0, np.pi / 2, size=(frames, ACTUATED_COUNT))
    return MotionSequence(_bend_quats(bend), TBS_LOCAL, fps)
