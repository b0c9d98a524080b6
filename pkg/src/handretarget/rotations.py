"""Quaternion and rotation-matrix algebra.

Quaternions are ``(..., 4)`` arrays in ``(w, x, y, z)`` component order and
are unit-norm unless stated otherwise.  Twist-bend-splay Euler angles follow
the fixed factorization ``R = Rz(splay) @ Ry(bend) @ Rx(twist)`` with the
local x axis as twist, y as bend, z as splay.

All functions marked "dual-safe" also accept :class:`handretarget.dual.Dual`
operands so tangents propagate through the kinematic chain.
"""

from __future__ import annotations

import numpy as np

from .dual import value_of
from .errors import NumericalError

QUAT_IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])

_NORM_TOL = 1e-9
# trigger the gimbal branch well inside the declared |bend - pi/2| < 1e-6 band
_GIMBAL_EPS = 5e-14


def quat_normalize(q):
    """Scale to unit norm.  Dual-safe.  Raises on (near-)zero input."""
    n2 = np.sum(q * q, axis=-1, keepdims=True)
    if np.any(value_of(n2) < 1e-24):
        raise NumericalError("cannot normalize zero-norm quaternion")
    return q / np.sqrt(n2)


def quat_is_unit(q, tol=_NORM_TOL):
    norms = np.linalg.norm(np.asarray(q, dtype=float), axis=-1)
    return bool(np.all(np.abs(norms - 1.0) <= tol))


def quat_conjugate(q):
    """(w, -x, -y, -z).  Dual-safe."""
    return np.stack([q[..., 0], -q[..., 1], -q[..., 2], -q[..., 3]], axis=-1)


def quat_inverse(q):
    """Multiplicative inverse; equals the conjugate for unit quaternions."""
    n2 = np.sum(q * q, axis=-1, keepdims=True)
    if np.any(value_of(n2) < 1e-24):
        raise NumericalError("cannot invert zero-norm quaternion")
    return quat_conjugate(q) / n2


def quat_multiply(a, b):
    """Hamilton product a ∘ b.  Dual-safe."""
    aw, ax, ay, az = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bw, bx, by, bz = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def quat_rotate(q, v):
    """Rotate 3-vectors ``v`` by unit quaternions ``q``.  Dual-safe."""
    w = q[..., 0]
    u = q[..., 1:4]
    uv = _cross(u, v)
    uuv = _cross(u, uv)
    return v + 2.0 * (w[..., None] * uv + uuv)


def _cross(a, b):
    ax, ay, az = a[..., 0], a[..., 1], a[..., 2]
    bx, by, bz = b[..., 0], b[..., 1], b[..., 2]
    return np.stack(
        [ay * bz - az * by, az * bx - ax * bz, ax * by - ay * bx], axis=-1
    )


def quat_to_matrix(q):
    """Rotation matrix, ``(..., 3, 3)``.  Dual-safe for unit input."""
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    r0 = np.stack(
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], axis=-1
    )
    r1 = np.stack(
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], axis=-1
    )
    r2 = np.stack(
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], axis=-1
    )
    return np.stack([r0, r1, r2], axis=-2)


def quat_from_matrix(mat):
    """Quaternion (w >= 0) from rotation matrices, ``(..., 3, 3)``."""
    m = np.asarray(mat, dtype=float)
    t = np.einsum("...ii->...", m)
    q = np.empty(m.shape[:-2] + (4,))

    # branch on the largest of (trace, m00, m11, m22) for stability
    choice = np.argmax(
        np.stack([t, m[..., 0, 0], m[..., 1, 1], m[..., 2, 2]], axis=-1), axis=-1
    )

    s_t = np.sqrt(np.maximum(t + 1.0, 0.0)) * 2.0
    q_t = np.stack(
        [
            s_t / 4.0,
            (m[..., 2, 1] - m[..., 1, 2]) / np.where(s_t == 0, 1, s_t),
            (m[..., 0, 2] - m[..., 2, 0]) / np.where(s_t == 0, 1, s_t),
            (m[..., 1, 0] - m[..., 0, 1]) / np.where(s_t == 0, 1, s_t),
        ],
        axis=-1,
    )
    outs = [q_t]
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        s = np.sqrt(np.maximum(1.0 + m[..., i, i] - m[..., j, j] - m[..., k, k], 0.0)) * 2.0
        sd = np.where(s == 0, 1, s)
        comps = [None, None, None, None]
        comps[0] = (m[..., k, j] - m[..., j, k]) / sd
        comps[1 + i] = s / 4.0
        comps[1 + j] = (m[..., j, i] + m[..., i, j]) / sd
        comps[1 + k] = (m[..., k, i] + m[..., i, k]) / sd
        outs.append(np.stack(comps, axis=-1))

    for c in range(4):
        q = np.where((choice == c)[..., None], outs[c], q)
    return quat_canonical(quat_normalize(q))


def quat_from_axis_angle(axis, angle):
    """Unit quaternion rotating by ``angle`` (radians) about unit ``axis``."""
    axis = np.asarray(axis, dtype=float)
    angle = np.asarray(angle, dtype=float)
    half = 0.5 * angle
    return np.concatenate(
        [np.cos(half)[..., None], np.sin(half)[..., None] * axis], axis=-1
    )


def quat_canonical(q):
    """Flip signs so w >= 0 (first nonzero component positive when w == 0)."""
    q = np.asarray(q, dtype=float)
    sign = np.sign(q[..., 0])
    for c in (1, 2, 3):
        sign = np.where(sign == 0, np.sign(q[..., c]), sign)
    sign = np.where(sign == 0, 1.0, sign)
    return q * sign[..., None]


def quat_slerp(q0, q1, t):
    """Spherical interpolation with hemisphere alignment."""
    q0 = np.asarray(q0, dtype=float)
    q1 = np.asarray(q1, dtype=float)
    t = np.asarray(t, dtype=float)
    dot = np.sum(q0 * q1, axis=-1)
    q1 = np.where(dot[..., None] < 0, -q1, q1)
    dot = np.abs(dot)
    dot = np.clip(dot, -1.0, 1.0)
    theta = np.arccos(dot)
    sin_theta = np.sin(theta)
    near = sin_theta < 1e-9
    w0 = np.where(near, 1.0 - t, np.sin((1.0 - t) * theta) / np.where(near, 1, sin_theta))
    w1 = np.where(near, t, np.sin(t * theta) / np.where(near, 1, sin_theta))
    return quat_normalize(w0[..., None] * q0 + w1[..., None] * q1)


def random_unit_quats(rng, shape=()):
    """Uniformly distributed unit quaternions for tests and fixtures."""
    q = rng.normal(size=tuple(shape) + (4,))
    return quat_normalize(q)


def _wrap_shifted(x):
    # inputs are atan2 results shifted by +/- pi, i.e. within (-2pi, 2pi]
    x = np.where(value_of(x) > np.pi, x - 2.0 * np.pi, x)
    return np.where(value_of(x) <= -np.pi, x + 2.0 * np.pi, x)


def tbs_euler_from_quat(q):
    """Decompose into (twist, bend, splay), stacked on the last axis.

    Of the two valid factorizations the one with the smaller
    twist² + splay² is returned, so a pure over-bend decomposes as a bend
    beyond pi/2 rather than as twist = splay = pi.  At gimbal lock
    (|bend| = pi/2) the free rotation goes to splay and twist is 0.
    Dual-safe away from gimbal lock.
    """
    r = quat_to_matrix(q)
    s = -r[..., 2, 0]  # sin(bend)
    c = np.sqrt(np.maximum(1.0 - s * s, 1e-300))

    bend1 = np.arctan2(s, c)
    twist1 = np.arctan2(r[..., 2, 1], r[..., 2, 2])
    splay1 = np.arctan2(r[..., 1, 0], r[..., 0, 0])

    bend2 = _wrap_shifted(np.pi - bend1)
    twist2 = _wrap_shifted(twist1 + np.pi)
    splay2 = _wrap_shifted(splay1 + np.pi)

    v1 = value_of(twist1) ** 2 + value_of(splay1) ** 2
    v2 = value_of(twist2) ** 2 + value_of(splay2) ** 2
    pick2 = v2 < v1

    twist = np.where(pick2, twist2, twist1)
    bend = np.where(pick2, bend2, bend1)
    splay = np.where(pick2, splay2, splay1)

    sv = value_of(s)
    gimbal = np.abs(sv) > 1.0 - _GIMBAL_EPS
    if np.any(gimbal):
        splay_pos = np.arctan2(value_of(r[..., 1, 2]), value_of(r[..., 1, 1]))
        splay_neg = np.arctan2(-value_of(r[..., 0, 1]), value_of(r[..., 1, 1]))
        g_bend = np.where(sv > 0, np.pi / 2, -np.pi / 2)
        g_splay = np.where(sv > 0, splay_pos, splay_neg)
        twist = np.where(gimbal, np.zeros_like(sv), twist)
        bend = np.where(gimbal, g_bend, bend)
        splay = np.where(gimbal, g_splay, splay)

    return np.stack([twist, bend, splay], axis=-1)


def quat_from_tbs_euler(angles):
    """Inverse of :func:`tbs_euler_from_quat`; ``angles`` is ``(..., 3)``."""
    angles = np.asarray(angles, dtype=float)
    twist, bend, splay = angles[..., 0], angles[..., 1], angles[..., 2]
    zeros = np.zeros_like(twist)
    qx = np.stack([np.cos(twist / 2), np.sin(twist / 2), zeros, zeros], axis=-1)
    qy = np.stack([np.cos(bend / 2), zeros, np.sin(bend / 2), zeros], axis=-1)
    qz = np.stack([np.cos(splay / 2), zeros, zeros, np.sin(splay / 2)], axis=-1)
    return quat_multiply(qz, quat_multiply(qy, qx))
