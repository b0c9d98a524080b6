"""Palm anchors and the per-joint semantic feature matrix.

For every joint k and frame t the matrix row set holds the positions of all
20 joints (rows 0..19) and of 9 palm anchors (rows 20..28), each expressed
in joint k's twist-bend-splay frame: ``row = M_kᵀ (p - x_k)``.  The
resulting tensor is ``(20, T, 29, 3)`` in (joint, frame, row, xyz) order.

Anchor layout (fixed, see README): for each non-thumb finger the points at
parameters 1/2 and 5/6 along the wrist→mcp segment, in finger order
(index, middle, ring, pinky), followed by the wrist itself as anchor 9.
The outer parameter keeps anchors inside the region that curled fingertips
approach while staying clear of the mcp joints themselves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hand_model import (
    GLOBAL,
    JOINT_COUNT,
    TBS_LOCAL,
    HandSkeleton,
    MotionSequence,
    PoseFK,
    forward_kinematics,
    tbs_to_global,
)

ANCHOR_COUNT = 9
ROW_COUNT = JOINT_COUNT + ANCHOR_COUNT  # 29
_ANCHOR_MCPS = (4, 8, 12, 16)  # index..pinky mcp joints
_ANCHOR_PARAMS = (0.5, 5.0 / 6.0)


@dataclass(frozen=True)
class PalmAnchors:
    """(T, 9, 3) global anchor positions; rigid with the wrist→mcp segments."""

    positions: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.positions, dtype=float)
        p.setflags(write=False)
        object.__setattr__(self, "positions", p)
        if p.ndim != 3 or p.shape[1:] != (ANCHOR_COUNT, 3):
            raise ValueError("anchors must be (T, 9, 3)")
        if not np.all(np.isfinite(p)):
            raise ValueError("anchors must be finite")


@dataclass(frozen=True)
class SemanticMatrix:
    """(20, T, 29, 3) relative-position features, meters."""

    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data, dtype=float)
        d.setflags(write=False)
        object.__setattr__(self, "data", d)
        if d.ndim != 4 or d.shape[0] != JOINT_COUNT or d.shape[2:] != (ROW_COUNT, 3):
            raise ValueError(f"semantic matrix must be (20, T, 29, 3), got {d.shape}")
        if not np.all(np.isfinite(d)):
            raise ValueError("semantic matrix must be finite")
        selfrows = d[np.arange(JOINT_COUNT), :, np.arange(JOINT_COUNT), :]
        if np.any(selfrows != 0.0):
            raise ValueError("self-relative rows must be exactly zero")

    @property
    def frames(self):
        return self.data.shape[1]


def _anchor_kernel(positions, wrist):
    """Per-frame anchors; dual-safe.  positions (T, 20, 3), wrist (T, 3)."""
    anchors = []
    for mcp in _ANCHOR_MCPS:
        seg = positions[:, mcp]
        for t in _ANCHOR_PARAMS:
            anchors.append((1.0 - t) * wrist + t * seg)
    anchors.append(wrist)
    return np.stack(anchors, axis=1)


def palm_anchors(fk: PoseFK, skeleton: HandSkeleton) -> PalmAnchors:
    """Nine palm anchors per frame (affine in the wrist and mcp positions)."""
    return PalmAnchors(_anchor_kernel(fk.positions, fk.wrist))


def _assemble_kernel(positions, tbs_orient, anchors):
    """ASM tensor in (T, 20, 29, 3) layout; dual-safe.

    ``row[t, k, m] = tbs_orient[t, k]ᵀ @ (points[t, m] - positions[t, k])``
    with points = joints then anchors.
    """
    points = np.concatenate([positions, anchors], axis=1)  # (T, 29, 3)
    rel = points[:, None, :, :] - positions[:, :, None, :]  # (T, 20, 29, 3)
    cols = []
    for b in range(3):
        col = (
            tbs_orient[:, :, None, 0, b] * rel[..., 0]
            + tbs_orient[:, :, None, 1, b] * rel[..., 1]
            + tbs_orient[:, :, None, 2, b] * rel[..., 2]
        )
        cols.append(col)
    return np.stack(cols, axis=-1)


def asm_from_fk(fk: PoseFK, skeleton: HandSkeleton) -> SemanticMatrix:
    """Assemble the semantic matrix from forward-kinematics results."""
    anchors = _anchor_kernel(fk.positions, fk.wrist)
    data = _assemble_kernel(fk.positions, fk.tbs_orient, anchors)
    data = np.moveaxis(data, 0, 1).copy()  # (20, T, 29, 3)
    # the self row is zero by construction; pin it exactly against roundoff
    data[np.arange(JOINT_COUNT), :, np.arange(JOINT_COUNT), :] = 0.0
    return SemanticMatrix(data)


def inter_feature(fk: PoseFK, k: int, m: int) -> np.ndarray:
    """(T, 3) position of joint m in joint k's frame (0-based indices)."""
    rel = fk.positions[:, m] - fk.positions[:, k]
    return np.einsum("tab,ta->tb", fk.tbs_orient[:, k], rel)


def extract_asm(motion: MotionSequence, skeleton: HandSkeleton) -> SemanticMatrix:
    """Full pipeline: TBS-local motion → global → FK → anchors → matrix."""
    motion.require(TBS_LOCAL)
    fk = forward_kinematics(tbs_to_global(motion, skeleton), skeleton)
    return asm_from_fk(fk, skeleton)
