"""Retargeting losses: weighted-cosine semantics, anatomical limits, total.

The semantic term rewards matching the source and target feature matrices
row-by-row with cosine similarity; inter-joint rows are up-weighted by a
softmax over the source row norms so close-finger interactions dominate.
The anatomical term penalizes twist, out-of-range splay (knuckles get a
10-degree allowance), and bend outside [0, pi/2], all quadratically.  The
total objective optionally adds a quaternion MSE term when source and
target are the same character.

Conventions (fixed, documented in the README):

* weights are recomputed per frame from the source matrix only and carry no
  gradient;
* a row pair that is zero on both sides (the self row) counts as cosine 1
  with zero gradient; a pair with exactly one zero row counts as 0;
* Euler decomposition order is splay ∘ bend ∘ twist (twist applied first);
* "knuckles" are the five mcp joints, thumb included;
* the quaternion MSE canonicalizes each pair to the same hemisphere.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import rotations as rot
from .dual import Dual, value_of
from .errors import NumericalError
from .hand_model import (
    ACTUATED_COUNT,
    KNUCKLE_SLOTS,
    TBS_LOCAL,
    HandSkeleton,
    MotionSequence,
    _fk_kernel,
)
from .semantics import JOINT_COUNT, ROW_COUNT, SemanticMatrix, _anchor_kernel, _assemble_kernel

log = logging.getLogger(__name__)

SPLAY_LIMIT = np.pi / 18.0
BEND_UPPER = np.pi / 2.0

_TINY_NORM = 1e-12

_KNUCKLE_MASK = np.zeros(ACTUATED_COUNT)
_KNUCKLE_MASK[list(KNUCKLE_SLOTS)] = 1.0


@dataclass(frozen=True)
class LossWeights:
    """Hyper-parameters of the total objective."""

    lambda_sem: float = 1.0
    lambda_ana: float = 0.1

    def __post_init__(self):
        if self.lambda_sem < 0 or self.lambda_ana < 0:
            raise ValueError("loss weights must be nonnegative")


@dataclass(frozen=True)
class EulerTBS:
    """Per-joint twist/bend/splay angles, (T, 15) each, radians in (-pi, pi]."""

    twist: np.ndarray
    bend: np.ndarray
    splay: np.ndarray

    def stacked(self):
        return np.stack([self.twist, self.bend, self.splay], axis=-1)


def decompose_tbs_euler(motion: MotionSequence) -> EulerTBS:
    """Euler angles of a TBS-local motion (see :mod:`handretarget.rotations`)."""
    motion.require(TBS_LOCAL)
    angles = rot.tbs_euler_from_quat(motion.rotations)
    return EulerTBS(
        twist=angles[..., 0], bend=angles[..., 1], splay=angles[..., 2]
    )


def recompose_tbs_euler(euler: EulerTBS, fps: float = 30.0) -> MotionSequence:
    quats = rot.quat_from_tbs_euler(euler.stacked())
    return MotionSequence(rot.quat_normalize(quats), TBS_LOCAL, fps)


# ---------------------------------------------------------------------------
# semantic term


def _as_data(d):
    return d.data if isinstance(d, SemanticMatrix) else np.asarray(d, dtype=float)


def semantic_weights(d_a) -> np.ndarray:
    """Row weights (20, T, 29) from the source matrix.

    Inter-joint rows get 1 plus a softmax (over the 20 joint rows, per joint
    and frame) of the negated row norms; palm rows are exactly 1.  The joint
    rows therefore sum to 21 for every (joint, frame).
    """
    d = _as_data(d_a)
    norms = np.linalg.norm(d[:, :, :JOINT_COUNT, :], axis=-1)  # (20, T, 20)
    e = np.exp(-norms)
    soft = e / e.sum(axis=-1, keepdims=True)
    w = np.ones(d.shape[:3])
    w[:, :, :JOINT_COUNT] += soft
    return w


def _cosine_layer(d_a_t, d_b_t, w_t, want_grad=False):
    """Per-frame weighted cosine sums and (optionally) their row gradients.

    Arguments are in (T, 20, 29, ...) layout; returns
    ``(sem (T,), cos (T, 20, 29), du)`` where du is the derivative of the
    per-frame sum against the target rows (no 1/T factor), or None.
    """
    na = np.linalg.norm(d_a_t, axis=-1)
    nb = np.linalg.norm(d_b_t, axis=-1)
    a_zero = na <= _TINY_NORM
    b_zero = nb <= _TINY_NORM
    live = ~(a_zero | b_zero)
    one_sided = a_zero ^ b_zero
    if np.any(one_sided):
        log.warning(
            "%d semantic rows have a zero vector on one side only; counted as 0",
            int(one_sided.sum()),
        )

    den = np.where(live, na * nb, 1.0)
    dots = np.einsum("tjka,tjka->tjk", d_a_t, d_b_t)
    cos = np.where(live, dots / den, np.where(a_zero & b_zero, 1.0, 0.0))
    sem = np.einsum("tjk,tjk->t", w_t, cos)

    du = None
    if want_grad:
        scale = (w_t * live)[..., None]
        du = scale * (
            d_a_t / den[..., None]
            - cos[..., None] * d_b_t / np.where(live, nb * nb, 1.0)[..., None]
        )
    return sem, cos, du


def semantic_similarity(d_a, d_b, weights=None) -> float:
    """Weighted mean-over-frames cosine similarity (higher is better)."""
    da = _as_data(d_a)
    db = _as_data(d_b)
    if da.shape != db.shape:
        raise ValueError(f"semantic matrices differ in shape: {da.shape} vs {db.shape}")
    w = semantic_weights(da) if weights is None else np.asarray(weights, dtype=float)
    sem, _, _ = _cosine_layer(
        np.moveaxis(da, 0, 1), np.moveaxis(db, 0, 1), np.moveaxis(w, 0, 1)
    )
    return float(sem.mean())


# ---------------------------------------------------------------------------
# anatomical term


def _ana_kernel(angles):
    """Per-frame anatomical penalty from (..., 15, 3) angles; dual-safe."""
    twist = angles[..., 0]
    bend = angles[..., 1]
    splay = angles[..., 2]

    non_knuckle = 1.0 - _KNUCKLE_MASK
    t_twist = np.sum(twist * twist, axis=-1)
    t_splay_free = np.sum(splay * splay * non_knuckle, axis=-1)
    over = np.maximum(splay - SPLAY_LIMIT, 0.0)
    under = np.maximum(-splay - SPLAY_LIMIT, 0.0)
    # max(|splay| - limit, 0)^2; at most one side is active since limit > 0
    t_splay_kn = np.sum((over * over + under * under) * _KNUCKLE_MASK, axis=-1)
    hi = np.maximum(bend - BEND_UPPER, 0.0)
    lo = np.minimum(bend, 0.0)
    t_bend = np.sum(hi * hi + lo * lo, axis=-1)
    return t_twist + t_splay_free + t_splay_kn + t_bend


def anatomical_loss(motion: MotionSequence) -> float:
    """Mean per-frame penalty; zero iff every frame is inside the limits."""
    motion.require(TBS_LOCAL)
    angles = rot.tbs_euler_from_quat(motion.rotations)
    return float(np.mean(_ana_kernel(angles)))


# ---------------------------------------------------------------------------
# quaternion mse + total


def _mse_kernel(q_b, q_a):
    """Per-frame mean squared quaternion difference; dual-safe in q_b.

    Each pair is canonicalized to the hemisphere of the reference before
    differencing.
    """
    sign = np.where(np.sum(value_of(q_b) * q_a, axis=-1) < 0.0, -1.0, 1.0)
    diff = q_b * sign[..., None] - q_a
    return np.sum(diff * diff, axis=(-1, -2)) / (ACTUATED_COUNT * 4.0)


def quaternion_mse(motion_a: MotionSequence, motion_b: MotionSequence) -> float:
    if motion_a.frames != motion_b.frames:
        raise ValueError("motions differ in frame count")
    return float(np.mean(_mse_kernel(motion_b.rotations, motion_a.rotations)))


def total_loss(
    motion_a_tbs: MotionSequence,
    motion_b_tbs: MotionSequence,
    d_a,
    d_b,
    same_character: bool,
    weights: LossWeights = LossWeights(),
) -> float:
    """Full objective: [same]·MSE - λ_sem·semantic + λ_ana·anatomical."""
    value = -weights.lambda_sem * semantic_similarity(d_a, d_b)
    value += weights.lambda_ana * anatomical_loss(motion_b_tbs)
    if same_character:
        value += quaternion_mse(motion_a_tbs, motion_b_tbs)
    return float(value)


# ---------------------------------------------------------------------------
# differentiable objective over the target rotations


class TotalLossObjective:
    """Total loss as a function of raw target rotations (T, 15, 4).

    Rotations are normalized inside the objective, so values and gradients
    are well defined for any nonzero raw quaternions.  The gradient is exact
    (forward tangents through normalization, frame conversion, FK, and the
    anatomical/MSE terms; an analytic adjoint over the cosine layer) and is
    validated against central finite differences in the test suite.
    """

    def __init__(
        self,
        skeleton: HandSkeleton,
        d_a,
        weights: LossWeights = LossWeights(),
        q_a_tbs=None,
        same_character: bool = False,
    ):
        self.skeleton = skeleton
        self.d_a_t = np.moveaxis(_as_data(d_a), 0, 1)  # (T, 20, 29, 3)
        self.w_t = np.moveaxis(semantic_weights(d_a), 0, 1)  # (T, 20, 29)
        self.weights = weights
        self.same_character = bool(same_character)
        if self.same_character and q_a_tbs is None:
            raise ValueError("same-character objective needs the source rotations")
        self.q_a = None if q_a_tbs is None else np.asarray(q_a_tbs, dtype=float)
        self.frames = self.d_a_t.shape[0]
        self._rest_quats = skeleton.rest_tbs_quats
        self._rest_conj = rot.quat_conjugate(self._rest_quats)
        self._wrist = np.zeros((self.frames, 3))

    def _frame_terms(self, q):
        """Per-frame (sem, ana, mse) terms; ``q`` may be a Dual."""
        unit = rot.quat_normalize(q)
        qg = rot.quat_multiply(
            self._rest_quats, rot.quat_multiply(unit, self._rest_conj)
        )
        x, m = _fk_kernel(qg, self.skeleton.offsets, self.skeleton.rest_tbs)
        anchors = _anchor_kernel(x, self._wrist)
        return unit, x, m, anchors

    def value(self, raw) -> float:
        raw = np.asarray(raw, dtype=float)
        unit, x, m, anchors = self._frame_terms(raw)
        d_b_t = _assemble_kernel(x, m, anchors)
        sem, _, _ = self._cosine(d_b_t)
        ana = _ana_kernel(rot.tbs_euler_from_quat(unit))
        per_frame = self.weights.lambda_ana * ana - self.weights.lambda_sem * sem
        if self.same_character:
            per_frame = per_frame + _mse_kernel(unit, self.q_a)
        out = float(np.mean(per_frame))
        if not np.isfinite(out):
            raise NumericalError("objective is not finite")
        return out

    def _cosine(self, d_b_t, want_grad=False):
        return _cosine_layer(self.d_a_t, d_b_t, self.w_t, want_grad)

    def value_and_grad(self, raw):
        raw = np.asarray(raw, dtype=float)
        t = raw.shape[0]
        n_dirs = ACTUATED_COUNT * 4
        seed = np.broadcast_to(
            np.eye(n_dirs).reshape(ACTUATED_COUNT, 4, n_dirs),
            (t, ACTUATED_COUNT, 4, n_dirs),
        )
        q = Dual(raw, seed)
        unit, x, m, anchors = self._frame_terms(q)
        points = np.concatenate([x, anchors], axis=1)  # (T, 29, 3) dual

        # semantic term: analytic adjoint over the cosine layer, tangents
        # below it
        rel = points.val[:, None, :, :] - x.val[:, :, None, :]
        d_b_t = _assemble_kernel(x.val, m.val, anchors.val)
        sem_val, _, du = self._cosine(d_b_t, want_grad=True)
        g_mat = np.einsum("tjka,tjkb->tjab", rel, du)
        g_pts = np.einsum("tjbc,tjkc->tkb", m.val, du)
        g_x = -np.einsum("tjbc,tjkc->tjb", m.val, du)
        sem_dot = (
            np.einsum("tjab,tjabp->tp", g_mat, m.dot)
            + np.einsum("tkb,tkbp->tp", g_pts, points.dot)
            + np.einsum("tjb,tjbp->tp", g_x, x.dot)
        )
        sem = Dual(sem_val, sem_dot)

        ana = _ana_kernel(rot.tbs_euler_from_quat(unit))
        per_frame = self.weights.lambda_ana * ana - self.weights.lambda_sem * sem
        if self.same_character:
            per_frame = per_frame + _mse_kernel(unit, self.q_a)

        value = float(np.mean(per_frame.val))
        if not np.isfinite(value):
            raise NumericalError("objective is not finite")
        grad = per_frame.dot.reshape(t, ACTUATED_COUNT, 4) / t
        if not np.all(np.isfinite(grad)):
            raise NumericalError("gradient is not finite")
        return value, grad


def loss_gradient(objective: TotalLossObjective, raw) -> np.ndarray:
    """Gradient of the total loss against the raw target rotations."""
    return objective.value_and_grad(raw)[1]
