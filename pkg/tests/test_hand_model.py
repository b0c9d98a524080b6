"""Skeleton validation, frame conversion, and forward kinematics."""

import numpy as np
import pytest

from handretarget import fixtures as fx
from handretarget import hand_model as hm
from handretarget import rotations as rot
from handretarget.errors import ConventionError


def test_layout_constants():
    assert hm.JOINT_COUNT == 20
    assert len(hm.ACTUATED_JOINTS) == 15
    assert len(hm.TIP_JOINTS) == 5
    # chains are mcp -> pip -> dip -> tip per finger
    for f in range(5):
        assert hm.PARENTS[4 * f] == -1
        for s in range(1, 4):
            assert hm.PARENTS[4 * f + s] == 4 * f + s - 1
    assert hm.KNUCKLE_SLOTS == (0, 3, 6, 9, 12)


def test_skeleton_validation_rejects_bad_input(skeleton):
    with pytest.raises(ValueError):
        hm.HandSkeleton(
            offsets=np.zeros((20, 3)),  # zero non-root offsets
            rest_tbs=skeleton.rest_tbs,
            shape=skeleton.shape,
        )
    bad_frames = skeleton.rest_tbs.copy()
    bad_frames[3] = 2.0 * np.eye(3)
    with pytest.raises(ValueError):
        hm.HandSkeleton(
            offsets=skeleton.offsets, rest_tbs=bad_frames, shape=skeleton.shape
        )
    # left-handed frame
    bad_frames = skeleton.rest_tbs.copy()
    bad_frames[3] = np.diag([1.0, 1.0, -1.0])
    with pytest.raises(ValueError):
        hm.HandSkeleton(
            offsets=skeleton.offsets, rest_tbs=bad_frames, shape=skeleton.shape
        )


def test_shape_params_lengths():
    hm.ShapeParams("mano", np.zeros(10))
    hm.ShapeParams("offsets", np.zeros(45))
    with pytest.raises(ValueError):
        hm.ShapeParams("mano", np.zeros(45))
    with pytest.raises(ValueError):
        hm.ShapeParams("pca", np.zeros(10))


def test_motion_validation(rng):
    q = rot.random_unit_quats(rng, (3, 15))
    hm.MotionSequence(q, hm.TBS_LOCAL, 30.0)
    with pytest.raises(ConventionError):
        hm.MotionSequence(q, "euler", 30.0)
    with pytest.raises(ValueError):
        hm.MotionSequence(2.0 * q, hm.TBS_LOCAL, 30.0)
    with pytest.raises(ValueError):
        hm.MotionSequence(q[:0], hm.TBS_LOCAL, 30.0)


# -- frame conversion ---------------------------------------------------------


def test_tbs_to_global_identity_rotations(skeleton):
    motion = fx.rest_motion(3)
    out = hm.tbs_to_global(motion, skeleton)
    assert out.convention == hm.GLOBAL
    assert np.allclose(np.abs(out.rotations[..., 0]), 1.0, atol=1e-12)


def test_tbs_to_global_identity_frames(rng):
    # with identity rest frames the conversion is a no-op
    skel, _ = fx.make_synthetic_hand()
    ident = hm.HandSkeleton(
        offsets=skel.offsets,
        rest_tbs=np.tile(np.eye(3), (15, 1, 1)),
        shape=skel.shape,
    )
    motion = fx.random_motion(rng, 4)
    out = hm.tbs_to_global(motion, ident)
    assert np.allclose(out.rotations, motion.rotations, atol=1e-12)


def test_conversion_roundtrip_random(rng):
    skel = fx.random_hand(rng)
    motion = fx.random_motion(rng, 6)
    back = hm.global_to_tbs(hm.tbs_to_global(motion, skel), skel)
    dev = 1.0 - np.abs(np.sum(back.rotations * motion.rotations, axis=-1))
    assert dev.max() < 1e-12


def test_conversion_requires_convention(skeleton, rng):
    motion = fx.random_motion(rng, 2, convention=hm.GLOBAL)
    with pytest.raises(ConventionError):
        hm.tbs_to_global(motion, skeleton)
    with pytest.raises(ConventionError):
        hm.global_to_tbs(fx.random_motion(rng, 2), skeleton)


# -- forward kinematics -------------------------------------------------------


def test_fk_rest_pose(skeleton):
    fk = hm.forward_kinematics(hm.tbs_to_global(fx.rest_motion(2), skeleton), skeleton)
    assert np.allclose(fk.positions[0], skeleton.rest_positions(), atol=1e-12)
    for j in range(20):
        slot = hm.ACTUATED_SLOT[j] if hm.ACTUATED[j] else hm.ACTUATED_SLOT[hm.PARENTS[j]]
        assert np.allclose(fk.tbs_orient[0, j], skeleton.rest_tbs[slot], atol=1e-12)


def test_fk_hand_computed_single_chain(skeleton):
    # rotate the index mcp 90 degrees about its bend axis (the +y axis of
    # this fixture); every joint below it swings from +x to -z around the mcp
    q = fx.rest_motion(1).rotations.copy()
    slot = hm.ACTUATED_SLOT[hm.JOINT_NAMES.index("index_mcp")]
    q[0, slot] = rot.quat_from_axis_angle(np.array([0.0, 1.0, 0.0]), np.pi / 2)
    fk = hm.forward_kinematics(
        hm.tbs_to_global(hm.MotionSequence(q, hm.TBS_LOCAL, 5.0), skeleton), skeleton
    )
    rest = skeleton.rest_positions()
    mcp = hm.JOINT_NAMES.index("index_mcp")
    for below in ("index_pip", "index_dip", "index_tip"):
        j = hm.JOINT_NAMES.index(below)
        arm = rest[j] - rest[mcp]
        expected = rest[mcp] + np.array([-arm[2], arm[1], -arm[0]])  # +x -> -z
        assert np.allclose(fk.positions[0, j], expected, atol=1e-12), below
    # other fingers untouched
    for name in ("middle_tip", "pinky_tip", "thumb_tip"):
        j = hm.JOINT_NAMES.index(name)
        assert np.allclose(fk.positions[0, j], rest[j], atol=1e-12)


def test_fk_isometry_random(rng):
    skel = fx.random_hand(rng)
    motion = fx.random_motion(rng, 5)
    fk = hm.forward_kinematics(hm.tbs_to_global(motion, skel), skel)
    for j in range(20):
        p = hm.PARENTS[j]
        base = np.zeros(3) if p < 0 else fk.positions[:, p]
        lengths = np.linalg.norm(fk.positions[:, j] - base, axis=-1)
        assert np.allclose(lengths, np.linalg.norm(skel.offsets[j]), rtol=1e-9)


def test_fk_rigid_equivariance(rng):
    skel = fx.random_hand(rng)
    motion = hm.tbs_to_global(fx.random_motion(rng, 3), skel)
    r = rot.quat_to_matrix(rot.random_unit_quats(rng))
    t = rng.normal(size=3)
    fk = hm.forward_kinematics(motion, skel)
    fk_rt = hm.forward_kinematics(motion, skel, root_rotation=r, root_translation=t)
    assert np.allclose(fk_rt.positions, fk.positions @ r.T + t, atol=1e-9)
    assert np.allclose(
        fk_rt.tbs_orient, np.einsum("ab,tjbc->tjac", r, fk.tbs_orient), atol=1e-9
    )
    assert np.allclose(fk_rt.wrist, np.broadcast_to(t, (3, 3)), atol=1e-12)
    # PoseFK.transformed agrees with FK under the same transform
    assert np.allclose(fk.transformed(r, t).positions, fk_rt.positions, atol=1e-9)


def test_fk_requires_global(skeleton, rng):
    with pytest.raises(ConventionError):
        hm.forward_kinematics(fx.random_motion(rng, 2), skeleton)


# -- synthetic hand generator -------------------------------------------------


def test_synthetic_hand_is_valid_and_deterministic():
    a1, m1 = fx.make_synthetic_hand(seed=7)
    a2, m2 = fx.make_synthetic_hand(seed=7)
    assert np.array_equal(a1.offsets, a2.offsets)
    assert np.array_equal(a1.rest_tbs, a2.rest_tbs)
    assert np.array_equal(m1.vertices, m2.vertices)
    b, _ = fx.make_synthetic_hand(seed=8)
    assert not np.array_equal(a1.offsets, b.offsets)


def test_synthetic_hand_scaling():
    spec = fx.SynthHandSpec()
    s1, _ = fx.make_synthetic_hand(spec, seed=3)
    s2, _ = fx.make_synthetic_hand(spec.scaled(2.0), seed=3)
    assert np.allclose(s2.offsets, 2.0 * s1.offsets, atol=1e-15)
    assert np.allclose(s2.rest_tbs, s1.rest_tbs, atol=1e-15)


def test_synthetic_hand_rejects_nonpositive():
    with pytest.raises(ValueError):
        fx.SynthHandSpec(widths=(0.0, 0.01, 0.01, 0.01, 0.01))
    with pytest.raises(ValueError):
        fx.SynthHandSpec().scaled(-1.0)
