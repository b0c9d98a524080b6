"""Hand skeleton, motion sequences, and forward kinematics.

Joint layout is fixed: 5 fingers x 4 joints in thumb→pinky, proximal→distal
order (mcp, pip, dip, tip per finger), 20 joints total.  Tips are dummy
joints; the 15 remaining joints are actuated.  The wrist is a fixed anchor
at the origin and is not part of the joint list.  Units are meters, seconds,
radians.

Rotation conventions for a :class:`MotionSequence`:

* ``tbs_local`` — each joint's rotation about its own twist-bend-splay axes.
* ``global`` — the same physical rotation with its axis expressed in global
  rest coordinates: ``q_global = r ∘ q_tbs ∘ r⁻¹`` with ``r`` the quaternion
  of the joint's rest frame.

Forward kinematics accumulates global-convention rotations down each finger
chain: ``x_j = x_parent + R_parent · offset_j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rotations as rot
from .errors import ConventionError

FINGERS = ("thumb", "index", "middle", "ring", "pinky")
SEGMENTS = ("mcp", "pip", "dip", "tip")

JOINT_NAMES = tuple(f"{f}_{s}" for f in FINGERS for s in SEGMENTS)
JOINT_COUNT = 20
ACTUATED_COUNT = 15

# parent index per joint; -1 means the wrist anchor
PARENTS = tuple(-1 if s == 0 else 4 * f + s - 1 for f in range(5) for s in range(4))
ACTUATED = tuple(s != 3 for f in range(5) for s in range(4))
ACTUATED_JOINTS = tuple(j for j in range(JOINT_COUNT) if ACTUATED[j])
TIP_JOINTS = tuple(j for j in range(JOINT_COUNT) if not ACTUATED[j])
FINGER_OF = tuple(FINGERS[j // 4] for j in range(JOINT_COUNT))

# actuated-array slot per joint (-1 for tips)
ACTUATED_SLOT = tuple(
    ACTUATED_JOINTS.index(j) if ACTUATED[j] else -1 for j in range(JOINT_COUNT)
)
MCP_JOINTS = tuple(4 * f for f in range(5))
# knuckle (mcp) slots within the 15-entry actuated arrays
KNUCKLE_SLOTS = tuple(ACTUATED_SLOT[j] for j in MCP_JOINTS)

TBS_LOCAL = "tbs_local"
GLOBAL = "global"
CONVENTIONS = (TBS_LOCAL, GLOBAL)

_ORTHO_TOL = 1e-9

SHAPE_KINDS = {"mano": 10, "offsets": 45}


def _freeze(a):
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ShapeParams:
    """Opaque shape descriptor: 10 PCA coefficients or 45 normalized offsets."""

    kind: str
    values: np.ndarray

    def __post_init__(self):
        if self.kind not in SHAPE_KINDS:
            raise ValueError(f"unknown shape kind {self.kind!r}")
        object.__setattr__(self, "values", _freeze(self.values))
        want = SHAPE_KINDS[self.kind]
        if self.values.shape != (want,):
            raise ValueError(
                f"shape kind {self.kind!r} requires {want} values, got {self.values.shape}"
            )


@dataclass(frozen=True)
class HandSkeleton:
    """Kinematic tree of 20 joints with rest offsets and rest TBS frames.

    offsets:   (20, 3) rest offset of each joint in its parent frame, meters.
    rest_tbs:  (15, 3, 3) rest orientation of each actuated joint's
               twist-bend-splay frame in global rest coordinates; columns are
               (twist, bend, splay).
    palm_back: unit 3-vector pointing from the palm toward the back of the
               hand in rest coordinates (used to disambiguate splay signs).
    """

    offsets: np.ndarray
    rest_tbs: np.ndarray
    shape: ShapeParams
    palm_back: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    joint_names: tuple = JOINT_NAMES

    def __post_init__(self):
        object.__setattr__(self, "offsets", _freeze(self.offsets))
        object.__setattr__(self, "rest_tbs", _freeze(self.rest_tbs))
        object.__setattr__(self, "palm_back", _freeze(self.palm_back))
        object.__setattr__(self, "joint_names", tuple(self.joint_names))
        if self.offsets.shape != (JOINT_COUNT, 3):
            raise ValueError(f"offsets must be (20, 3), got {self.offsets.shape}")
        if self.rest_tbs.shape != (ACTUATED_COUNT, 3, 3):
            raise ValueError(f"rest_tbs must be (15, 3, 3), got {self.rest_tbs.shape}")
        if len(self.joint_names) != JOINT_COUNT:
            raise ValueError("need 20 joint names")
        if self.palm_back.shape != (3,) or abs(np.linalg.norm(self.palm_back) - 1) > 1e-6:
            raise ValueError("palm_back must be a unit 3-vector")
        nonroot = [j for j in range(JOINT_COUNT) if PARENTS[j] >= 0]
        lens = np.linalg.norm(self.offsets[nonroot], axis=-1)
        if np.any(lens == 0):
            raise ValueError("non-root rest offsets must be nonzero")
        rtr = np.einsum("jab,jac->jbc", self.rest_tbs, self.rest_tbs)
        if not np.allclose(rtr, np.eye(3), atol=_ORTHO_TOL):
            raise ValueError("rest_tbs matrices must be orthonormal")
        if np.any(np.linalg.det(self.rest_tbs) < 1.0 - 1e-9):
            raise ValueError("rest_tbs matrices must be right-handed (det +1)")

    @property
    def rest_tbs_quats(self):
        """(15, 4) quaternions of the rest frames."""
        return rot.quat_from_matrix(self.rest_tbs)

    def rest_positions(self):
        """(20, 3) joint positions in the rest pose (wrist at origin)."""
        pos = np.zeros((JOINT_COUNT, 3))
        for j in range(JOINT_COUNT):
            p = PARENTS[j]
            base = np.zeros(3) if p < 0 else pos[p]
            pos[j] = base + self.offsets[j]
        return pos

    def hand_length(self):
        """Rest distance from the wrist to the middle fingertip."""
        return float(np.linalg.norm(self.rest_positions()[JOINT_NAMES.index("middle_tip")]))

    def child_of(self, joint):
        """Index of the (single) child of an actuated joint."""
        children = [j for j in range(JOINT_COUNT) if PARENTS[j] == joint]
        if not children:
            raise ValueError(f"joint {self.joint_names[joint]} has no child")
        return children[0]


@dataclass(frozen=True)
class MotionSequence:
    """T frames of per-joint rotations for the 15 actuated joints.

    rotations: (T, 15, 4) unit quaternions (w, x, y, z).
    """

    rotations: np.ndarray
    convention: str
    fps: float = 30.0

    def __post_init__(self):
        object.__setattr__(self, "rotations", _freeze(self.rotations))
        if self.convention not in CONVENTIONS:
            raise ConventionError(f"unknown convention {self.convention!r}")
        r = self.rotations
        if r.ndim != 3 or r.shape[1:] != (ACTUATED_COUNT, 4) or r.shape[0] < 1:
            raise ValueError(f"rotations must be (T>=1, 15, 4), got {r.shape}")
        if not rot.quat_is_unit(r):
            raise ValueError("motion rotations must be unit quaternions")
        if self.fps <= 0:
            raise ValueError("fps must be positive")

    @property
    def frames(self):
        return self.rotations.shape[0]

    def require(self, convention):
        if self.convention != convention:
            raise ConventionError(
                f"expected {convention} motion, got {self.convention}"
            )


@dataclass(frozen=True)
class PoseFK:
    """Forward-kinematics result.

    positions:  (T, 20, 3) global joint positions.
    tbs_orient: (T, 20, 3, 3) global orientation of each joint's TBS frame;
                tips carry their parent's frame.
    wrist:      (T, 3) wrist anchor positions (origin unless FK was run with
                a root transform).
    """

    positions: np.ndarray
    tbs_orient: np.ndarray
    wrist: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "positions", _freeze(self.positions))
        object.__setattr__(self, "tbs_orient", _freeze(self.tbs_orient))
        object.__setattr__(self, "wrist", _freeze(self.wrist))
        t = self.positions.shape[0]
        if self.positions.shape != (t, JOINT_COUNT, 3):
            raise ValueError("positions must be (T, 20, 3)")
        if self.tbs_orient.shape != (t, JOINT_COUNT, 3, 3):
            raise ValueError("tbs_orient must be (T, 20, 3, 3)")
        if self.wrist.shape != (t, 3):
            raise ValueError("wrist must be (T, 3)")
        rtr = np.einsum("tjab,tjac->tjbc", self.tbs_orient, self.tbs_orient)
        if not np.allclose(rtr, np.eye(3), atol=1e-8):
            raise ValueError("tbs_orient matrices must be orthonormal")

    @property
    def frames(self):
        return self.positions.shape[0]

    def transformed(self, rotation=None, translation=None):
        """Rigidly transformed copy (rotation 3x3 and/or translation 3)."""
        r = np.eye(3) if rotation is None else np.asarray(rotation, dtype=float)
        t = np.zeros(3) if translation is None else np.asarray(translation, dtype=float)
        return PoseFK(
            positions=self.positions @ r.T + t,
            tbs_orient=np.einsum("ab,tjbc->tjac", r, self.tbs_orient),
            wrist=self.wrist @ r.T + t,
        )


def tbs_to_global(motion: MotionSequence, skeleton: HandSkeleton) -> MotionSequence:
    """Re-express TBS-local joint rotations in global rest coordinates."""
    motion.require(TBS_LOCAL)
    r = skeleton.rest_tbs_quats
    q = rot.quat_multiply(r, rot.quat_multiply(motion.rotations, rot.quat_conjugate(r)))
    return MotionSequence(rot.quat_normalize(q), GLOBAL, motion.fps)


def global_to_tbs(motion: MotionSequence, skeleton: HandSkeleton) -> MotionSequence:
    """Inverse of :func:`tbs_to_global`."""
    motion.require(GLOBAL)
    r = skeleton.rest_tbs_quats
    q = rot.quat_multiply(rot.quat_conjugate(r), rot.quat_multiply(motion.rotations, r))
    return MotionSequence(rot.quat_normalize(q), TBS_LOCAL, motion.fps)


# actuated-array slots per chain level ((mcp, pip, dip) x 5 fingers)
_LEVEL_SLOTS = tuple(
    tuple(ACTUATED_SLOT[4 * f + s] for f in range(5)) for s in range(3)
)


def _fk_kernel(q_global, offsets, rest_tbs, root_quat=None, root_pos=None):
    """Chain accumulation, all five fingers per level at once; dual-safe.

    q_global: (T, 15, 4) global-convention rotations (array or Dual).
    Returns (positions (T, 20, 3), tbs_orient (T, 20, 3, 3)); wrist handled
    by the caller.
    """
    t = q_global.shape[0]
    off_lvl = np.asarray(offsets).reshape(5, 4, 3).transpose(1, 0, 2)  # (4, 5, 3)
    rest_lvl = np.asarray(rest_tbs).reshape(5, 3, 3, 3).transpose(1, 0, 2, 3)

    q0 = q_global[:, _LEVEL_SLOTS[0]]  # (T, 5, 4)
    if root_quat is None:
        acc = [q0]
        pos = [np.broadcast_to(off_lvl[0], (t, 5, 3))]
    else:
        rq = np.asarray(root_quat)[:, None, :]
        acc = [rot.quat_multiply(rq, q0)]
        pos = [np.asarray(root_pos)[:, None, :] + rot.quat_rotate(rq, off_lvl[0])]

    for lvl in (1, 2):
        pos.append(pos[-1] + rot.quat_rotate(acc[-1], off_lvl[lvl]))
        acc.append(rot.quat_multiply(acc[-1], q_global[:, _LEVEL_SLOTS[lvl]]))
    pos.append(pos[-1] + rot.quat_rotate(acc[-1], off_lvl[3]))  # tips

    mats = [_mat33_mul(rot.quat_to_matrix(acc[l]), rest_lvl[l]) for l in range(3)]
    mats.append(mats[2])  # tips carry their parent's frame

    # (T, level, finger, ...) -> (T, finger, level, ...) -> joint-major
    positions = np.moveaxis(np.stack(pos, axis=1), 1, 2).reshape(t, JOINT_COUNT, 3)
    tbs_orient = np.moveaxis(np.stack(mats, axis=1), 1, 2).reshape(
        t, JOINT_COUNT, 3, 3
    )
    return positions, tbs_orient


def _mat33_mul(a, b):
    """3x3 matrix product on trailing dims; dual-safe (b constant or not)."""
    rows = []
    for i in range(3):
        cols = []
        for j in range(3):
            cols.append(
                a[..., i, 0] * b[..., 0, j]
                + a[..., i, 1] * b[..., 1, j]
                + a[..., i, 2] * b[..., 2, j]
            )
        rows.append(np.stack(cols, axis=-1))
    return np.stack(rows, axis=-2)


def forward_kinematics(
    motion: MotionSequence,
    skeleton: HandSkeleton,
    root_rotation=None,
    root_translation=None,
) -> PoseFK:
    """Global joint positions and TBS frame orientations for every frame.

    ``root_rotation`` (3x3) and ``root_translation`` (3,) optionally place
    the wrist anchor; finger motion itself is unaffected.
    """
    motion.require(GLOBAL)
    t = motion.frames
    root_quat = None
    root_pos = None
    if root_rotation is not None:
        root_quat = np.broadcast_to(
            rot.quat_from_matrix(root_rotation), (t, 4)
        )
    if root_translation is not None:
        root_pos = np.broadcast_to(np.asarray(root_translation, dtype=float), (t, 3))

    positions, tbs_orient = _fk_kernel(
        motion.rotations, skeleton.offsets, skeleton.rest_tbs, root_quat, root_pos
    )
    wrist = np.zeros((t, 3)) if root_pos is None else np.array(root_pos)
    return PoseFK(positions=positions, tbs_orient=tbs_orient, wrist=wrist)
