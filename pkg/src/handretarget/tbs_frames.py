"""Semi-automatic twist-bend-splay frame annotation from a skeleton + mesh.

Per actuated joint the twist axis is the rest bone direction (pointing
distally, joint → child, so a positive bend closes the finger).  Bend/splay
candidates are generated by sweeping a roll angle in the plane normal to the
twist axis; each candidate is scored by casting rays from the joint along
its bend and splay axes and combining the mesh-normal alignment with the
splay/bend thickness ratio.  The candidate with the lowest score wins, ties
broken by the smallest roll angle.  Roll zero aligns splay with the
projection of the skeleton's palm-back hint into the normal plane, and
candidates whose splay points against the hint are excluded (fingers are
thinner pulp-to-back than side-to-side, and splay must point at the back).

Declarative :class:`FrameOverride` entries replace interactive adjustment.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import rotations as rot
from .errors import RayMissError
from .hand_model import ACTUATED_JOINTS, ACTUATED_SLOT, HandSkeleton
from .mesh import TriMesh, ray_mesh_intersect

log = logging.getLogger(__name__)

DEFAULT_RESOLUTION = np.deg2rad(1.0)
_MIN_AXIS_ANGLE = np.deg2rad(1.0)


@dataclass(frozen=True)
class FrameCandidate:
    """A right-handed (twist, bend, splay) triple with its annotation score."""

    n_twist: np.ndarray
    n_bend: np.ndarray
    n_splay: np.ndarray
    score: float = float("nan")

    def __post_init__(self):
        for a, b in (
            (self.n_twist, self.n_bend),
            (self.n_twist, self.n_splay),
            (self.n_bend, self.n_splay),
        ):
            if abs(float(np.dot(a, b))) > 1e-6:
                raise ValueError("candidate axes must be mutually orthogonal")
        if float(np.dot(np.cross(self.n_twist, self.n_bend), self.n_splay)) <= 0:
            raise ValueError("candidate axes must be right-handed")

    def matrix(self):
        """Columns (twist, bend, splay)."""
        return np.stack([self.n_twist, self.n_bend, self.n_splay], axis=-1)


@dataclass(frozen=True)
class FrameOverride:
    """Manual adjustment for one joint: a roll about the twist axis, or an
    explicit bend axis (projected into the plane normal to twist)."""

    joint: str
    roll: float | None = None
    bend_axis: np.ndarray | None = None

    def __post_init__(self):
        if (self.roll is None) == (self.bend_axis is None):
            raise ValueError("override needs exactly one of roll or bend_axis")
        if self.bend_axis is not None:
            axis = np.asarray(self.bend_axis, dtype=float)
            if axis.shape != (3,) or np.linalg.norm(axis) == 0:
                raise ValueError("bend_axis must be a nonzero 3-vector")
            object.__setattr__(self, "bend_axis", axis / np.linalg.norm(axis))


def compute_twist_axis(skeleton: HandSkeleton, joint: int) -> np.ndarray:
    """Unit rest-pose bone direction at an actuated joint, pointing distally."""
    if joint not in ACTUATED_JOINTS:
        raise ValueError(f"joint {joint} is not actuated (fingertips have no child)")
    rest = skeleton.rest_positions()
    child = skeleton.child_of(joint)
    bone = rest[child] - rest[joint]
    length = np.linalg.norm(bone)
    if length < 1e-12:
        raise ValueError(f"zero-length bone at joint {skeleton.joint_names[joint]}")
    return bone / length


def annotation_loss(candidate: FrameCandidate, mesh: TriMesh, origin) -> float:
    """Score for one candidate: -n_splay·m_splay - n_bend·m_bend + r_splay/r_bend.

    Rays leave ``origin`` along the candidate's +splay and +bend axes; m_*
    are the interpolated mesh normals at the hits and r_* the hit distances.
    Raises :class:`RayMissError` naming the axis when a ray misses.
    """
    origin = np.asarray(origin, dtype=float)
    hit_splay = ray_mesh_intersect(origin, candidate.n_splay, mesh)
    if hit_splay is None:
        raise RayMissError("splay ray missed the mesh", axis="splay")
    hit_bend = ray_mesh_intersect(origin, candidate.n_bend, mesh)
    if hit_bend is None:
        raise RayMissError("bend ray missed the mesh", axis="bend")
    align = float(
        np.dot(candidate.n_splay, hit_splay.normal)
        + np.dot(candidate.n_bend, hit_bend.normal)
    )
    ratio = hit_splay.t / hit_bend.t
    return -align + ratio


def _roll_base(twist, palm_back):
    """Unit splay direction for roll zero: palm-back projected off the bone."""
    proj = palm_back - np.dot(palm_back, twist) * twist
    n = np.linalg.norm(proj)
    if n < 1e-8:
        # hint parallel to the bone; fall back to the global axis least
        # aligned with it
        fallback = np.eye(3)[int(np.argmin(np.abs(twist)))]
        proj = fallback - np.dot(fallback, twist) * twist
        n = np.linalg.norm(proj)
    return proj / n


def _candidate_at_roll(twist, splay0, roll):
    q = rot.quat_from_axis_angle(twist, roll)
    splay = rot.quat_rotate(q, splay0)
    bend = np.cross(splay, twist)
    return FrameCandidate(n_twist=twist, n_bend=bend, n_splay=splay)


def _annotate_joint(skeleton, mesh, joint, resolution):
    twist = compute_twist_axis(skeleton, joint)
    origin = skeleton.rest_positions()[joint]
    splay0 = _roll_base(twist, skeleton.palm_back)

    rolls = np.arange(0.0, 2.0 * np.pi, resolution)
    best_roll = None
    best = None
    misses = 0
    for roll in rolls:
        cand = _candidate_at_roll(twist, splay0, roll)
        if np.dot(cand.n_splay, skeleton.palm_back) <= 0:
            continue
        try:
            score = annotation_loss(cand, mesh, origin)
        except RayMissError:
            misses += 1
            continue
        if best is None or score < best.score:
            best = FrameCandidate(cand.n_twist, cand.n_bend, cand.n_splay, score)
            best_roll = roll
    if best is None:
        raise RayMissError(
            f"no candidate hit the mesh for joint {skeleton.joint_names[joint]}",
            joint=skeleton.joint_names[joint],
        )
    if misses:
        log.debug(
            "%s: %d/%d candidates missed the mesh",
            skeleton.joint_names[joint],
            misses,
            rolls.size,
        )
    return best, best_roll


def _apply_override(matrix, override):
    twist = matrix[:, 0]
    if override.roll is not None:
        q = rot.quat_from_axis_angle(twist, override.roll)
        bend = rot.quat_rotate(q, matrix[:, 1])
        splay = rot.quat_rotate(q, matrix[:, 2])
    else:
        axis = override.bend_axis
        cos_angle = abs(float(np.dot(axis, twist)))
        if cos_angle > np.cos(_MIN_AXIS_ANGLE):
            raise ValueError(
                f"override bend axis for {override.joint} is within 1 degree of the twist axis"
            )
        bend = axis - np.dot(axis, twist) * twist
        bend = bend / np.linalg.norm(bend)
        splay = np.cross(twist, bend)
    return np.stack([twist, bend, splay], axis=-1)


def annotate_frames(
    skeleton: HandSkeleton,
    mesh: TriMesh,
    overrides=(),
    resolution: float = DEFAULT_RESOLUTION,
    threads: int = 1,
) -> np.ndarray:
    """Derive all 15 rest TBS frames; returns (15, 3, 3) matrices.

    ``resolution`` is the roll sweep step in radians, in (0, 10 degrees].
    Per-joint searches are independent and may run on ``threads`` workers;
    the result does not depend on the schedule.
    """
    if not 0.0 < resolution <= np.deg2rad(10.0) + 1e-12:
        raise ValueError("resolution must be in (0, 10 degrees]")
    by_name = {ov.joint: ov for ov in overrides}
    unknown = set(by_name) - set(skeleton.joint_names)
    if unknown:
        raise ValueError(f"override names unknown joints: {sorted(unknown)}")

    def solve(joint):
        best, _ = _annotate_joint(skeleton, mesh, joint, resolution)
        return best.matrix()

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            mats = list(pool.map(solve, ACTUATED_JOINTS))
    else:
        mats = [solve(j) for j in ACTUATED_JOINTS]

    frames = np.stack(mats)
    for joint, name in enumerate(skeleton.joint_names):
        ov = by_name.get(name)
        if ov is None:
            continue
        slot = ACTUATED_SLOT[joint]
        if slot < 0:
            raise ValueError(f"cannot override fingertip joint {name}")
        frames[slot] = _apply_override(frames[slot], ov)
    return frames
