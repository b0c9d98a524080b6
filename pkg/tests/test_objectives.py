"""Loss terms: weights, semantic cosine, anatomical penalties, gradients."""

import numpy as np
import pytest

from handretarget import fixtures as fx
from handretarget import hand_model as hm
from handretarget import objectives as ob
from handretarget import rotations as rot
from handretarget import semantics as sm


def brute_semantic_similarity(d_a, d_b, w):
    """Scalar re-computation of the weighted cosine loss."""
    a, b = d_a.data, d_b.data
    frames = a.shape[1]
    total = 0.0
    for t in range(frames):
        for j in range(20):
            for k in range(29):
                na = np.linalg.norm(a[j, t, k])
                nb = np.linalg.norm(b[j, t, k])
                if na < 1e-12 and nb < 1e-12:
                    c = 1.0
                elif na < 1e-12 or nb < 1e-12:
                    c = 0.0
                else:
                    c = float(a[j, t, k] @ b[j, t, k]) / (na * nb)
                total += w[j, t, k] * c
    return total / frames


# -- weights ------------------------------------------------------------------


def test_weights_uniform_distances():
    # equal norms on every inter-joint row give a flat softmax: 1 + 1/20
    data = np.zeros((20, 1, 29, 3))
    for j in range(20):
        for k in range(20):
            if k != j:
                data[j, 0, k] = [1.0, 0.0, 0.0]
    # self rows have norm 0; to get a truly uniform case use two frames of
    # handcrafted norms instead: here all non-self norms are 1 and the self
    # norm is 0, so weights are not uniform; check palm rows and the sum only
    w = ob.semantic_weights(data)
    assert np.all(w[:, :, 20:] == 1.0)
    assert np.allclose(w[:, :, :20].sum(axis=-1), 21.0, atol=1e-12)

    # a genuinely uniform softmax needs equal norms including the self row,
    # which only happens with all-zero rows: exp(0)/sum = 1/20 each
    zero = np.zeros((20, 1, 29, 3))
    w0 = ob.semantic_weights(zero)
    assert np.allclose(w0[:, :, :20], 1.0 + 1.0 / 20.0, atol=1e-15)


def test_weights_sum_on_random_inputs(skeleton, rng):
    d = sm.extract_asm(fx.random_motion(rng, 4), skeleton)
    w = ob.semantic_weights(d)
    assert w.shape == (20, 4, 29)
    assert np.allclose(w[:, :, :20].sum(axis=-1), 21.0, atol=1e-9)
    assert np.all(w[:, :, 20:] == 1.0)
    # per-frame recomputation: weights differ across frames when D does
    assert not np.allclose(w[:, 0, :20], w[:, 1, :20])


# -- semantic similarity ------------------------------------------------------


def test_semantic_similarity_self_is_600(skeleton, rng):
    d = sm.extract_asm(fx.random_motion(rng, 1), skeleton)
    val = ob.semantic_similarity(d, d)
    # weights sum to 21 per joint over joint rows plus 9 palm rows = 30;
    # 20 joints x 30 = 600 for T = 1
    assert np.isclose(val, 600.0, atol=1e-9)
    w = ob.semantic_weights(d)
    assert np.isclose(brute_semantic_similarity(d, d, w), val, atol=1e-9)


def test_semantic_similarity_matches_bruteforce(skeleton, rng):
    d_a = sm.extract_asm(fx.random_motion(rng, 2), skeleton)
    d_b = sm.extract_asm(fx.random_motion(rng, 2), skeleton)
    w = ob.semantic_weights(d_a)
    assert np.isclose(
        ob.semantic_similarity(d_a, d_b), brute_semantic_similarity(d_a, d_b, w), atol=1e-9
    )


def test_semantic_similarity_antipodal_and_scale(skeleton, rng):
    d = sm.extract_asm(fx.random_motion(rng, 1), skeleton)
    w = ob.semantic_weights(d)
    flipped = sm.SemanticMatrix(-d.data)
    # every nonzero row contributes cosine -1, self rows +1
    expect = float(-w.sum() + 2.0 * np.trace(w[:, 0, :20]))
    assert np.isclose(ob.semantic_similarity(d, flipped), expect, atol=1e-9)
    doubled = sm.SemanticMatrix(2.0 * d.data)
    assert np.isclose(
        ob.semantic_similarity(d, doubled), ob.semantic_similarity(d, d), atol=1e-12
    )


def test_semantic_similarity_shape_mismatch(skeleton, rng):
    d1 = sm.extract_asm(fx.random_motion(rng, 1), skeleton)
    d2 = sm.extract_asm(fx.random_motion(rng, 2), skeleton)
    with pytest.raises(ValueError):
        ob.semantic_similarity(d1, d2)


# -- euler decomposition ------------------------------------------------------


def test_decompose_motion_roundtrip(rng):
    motion = fx.random_motion(rng, 5)
    euler = ob.decompose_tbs_euler(motion)
    back = ob.recompose_tbs_euler(euler, fps=motion.fps)
    dev = 1.0 - np.abs(np.sum(back.rotations * motion.rotations, axis=-1))
    assert dev.max() < 1e-12
    for arr in (euler.twist, euler.bend, euler.splay):
        assert arr.shape == (5, 15)
        assert np.all(arr > -np.pi) and np.all(arr <= np.pi)


def test_decompose_requires_tbs(skeleton, rng):
    from handretarget.errors import ConventionError

    with pytest.raises(ConventionError):
        ob.decompose_tbs_euler(fx.random_motion(rng, 1, convention=hm.GLOBAL))


# -- anatomical loss ----------------------------------------------------------


def _motion_with_angles(frames=1, **joints):
    """Build a TBS-local motion from named (slot, (twist, bend, splay))."""
    angles = np.zeros((frames, 15, 3))
    for slot, tbs in joints.items():
        angles[:, int(slot)] = tbs
    return hm.MotionSequence(
        rot.quat_normalize(rot.quat_from_tbs_euler(angles)), hm.TBS_LOCAL, 5.0
    )


def test_anatomical_zero_in_range(rng):
    for frames in (1, 4):
        motion = fx.random_inrange_motion(rng, frames)
        assert ob.anatomical_loss(motion) == 0.0


def test_anatomical_bend_over_limit():
    for frames in (1, 2):
        motion = _motion_with_angles(frames, **{"4": (0.0, np.pi / 2 + 0.1, 0.0)})
        assert np.isclose(ob.anatomical_loss(motion), 0.1**2, atol=1e-12)


def test_anatomical_bend_below_zero():
    motion = _motion_with_angles(1, **{"7": (0.0, -0.25, 0.0)})
    assert np.isclose(ob.anatomical_loss(motion), 0.25**2, atol=1e-12)


def test_anatomical_twist():
    motion = _motion_with_angles(1, **{"1": (0.2, 0.3, 0.0)})  # bend in range
    assert np.isclose(ob.anatomical_loss(motion), 0.2**2, atol=1e-12)


def test_anatomical_splay_knuckle_vs_free():
    free_slot = 1  # thumb pip: not a knuckle
    knuckle_slot = 0  # thumb mcp
    m_free = _motion_with_angles(1, **{str(free_slot): (0.0, 0.3, 0.2)})
    assert np.isclose(ob.anatomical_loss(m_free), 0.2**2, atol=1e-12)
    m_kn = _motion_with_angles(1, **{str(knuckle_slot): (0.0, 0.3, 0.2)})
    assert np.isclose(
        ob.anatomical_loss(m_kn), (0.2 - np.pi / 18.0) ** 2, atol=1e-12
    )
    # inside the 10-degree allowance the knuckle pays nothing (up to the
    # roundoff the quaternion roundtrip reintroduces)
    m_ok = _motion_with_angles(1, **{str(knuckle_slot): (0.0, 0.3, np.pi / 36.0)})
    assert ob.anatomical_loss(m_ok) < 1e-30


def test_anatomical_quadratic_growth():
    for slot, angle_of in (
        ("2", lambda d: (d, 0.3, 0.0)),
        ("4", lambda d: (0.0, np.pi / 2 + d, 0.0)),
        ("5", lambda d: (0.0, -d, 0.0)),
        ("8", lambda d: (0.0, 0.3, d)),
        ("6", lambda d: (0.0, 0.3, np.pi / 18 + d)),  # knuckle slot 6
    ):
        d1 = ob.anatomical_loss(_motion_with_angles(1, **{slot: angle_of(0.05)}))
        d2 = ob.anatomical_loss(_motion_with_angles(1, **{slot: angle_of(0.10)}))
        assert np.isclose(d2, 4.0 * d1, rtol=1e-9), slot


def test_anatomical_averages_over_frames():
    one = _motion_with_angles(1, **{"4": (0.0, np.pi / 2 + 0.1, 0.0)})
    rest = fx.rest_motion(3)
    both = hm.MotionSequence(
        np.concatenate([one.rotations, rest.rotations]), hm.TBS_LOCAL, 5.0
    )
    assert np.isclose(ob.anatomical_loss(both), 0.1**2 / 4.0, atol=1e-12)


# -- quaternion mse + total ---------------------------------------------------


def test_mse_hemisphere_canonicalization(rng):
    motion = fx.random_motion(rng, 3)
    flipped = hm.MotionSequence(-motion.rotations, hm.TBS_LOCAL, motion.fps)
    assert ob.quaternion_mse(motion, flipped) < 1e-28
    assert ob.quaternion_mse(motion, motion) == 0.0


def test_total_loss_self_case(skeleton):
    curl = fx.curl_motion(2)
    d = sm.extract_asm(curl, skeleton)
    w = ob.LossWeights()
    total = ob.total_loss(curl, curl, d, d, same_character=True, weights=w)
    expect = -w.lambda_sem * ob.semantic_similarity(d, d) + w.lambda_ana * ob.anatomical_loss(curl)
    assert np.isclose(total, expect, atol=1e-12)


def test_total_loss_zero_weights(skeleton, rng):
    m_a = fx.random_motion(rng, 1)
    m_b = fx.random_motion(rng, 1)
    d_a = sm.extract_asm(m_a, skeleton)
    d_b = sm.extract_asm(m_b, skeleton)
    w = ob.LossWeights(lambda_sem=0.0, lambda_ana=0.0)
    assert ob.total_loss(m_a, m_b, d_a, d_b, same_character=False, weights=w) == 0.0


def test_total_loss_compositional_oracle(skeleton, rng):
    m_a = fx.random_motion(rng, 2)
    m_b = fx.random_motion(rng, 2)
    d_a = sm.extract_asm(m_a, skeleton)
    d_b = sm.extract_asm(m_b, skeleton)
    w = ob.LossWeights(lambda_sem=0.7, lambda_ana=0.3)
    got = ob.total_loss(m_a, m_b, d_a, d_b, same_character=True, weights=w)
    want = (
        ob.quaternion_mse(m_a, m_b)
        - 0.7 * ob.semantic_similarity(d_a, d_b)
        + 0.3 * ob.anatomical_loss(m_b)
    )
    assert np.isclose(got, want, atol=1e-12)


def test_loss_weights_validation():
    with pytest.raises(ValueError):
        ob.LossWeights(lambda_sem=-1.0)


# -- gradients ----------------------------------------------------------------


def _objective(skeleton, motion, **kw):
    d_a = sm.extract_asm(motion, skeleton)
    return ob.TotalLossObjective(skeleton, d_a, **kw)


def test_gradient_zero_at_self_optimum(skeleton):
    curl = fx.curl_motion(2)
    objective = _objective(skeleton, curl, q_a_tbs=curl.rotations, same_character=True)
    _, grad = objective.value_and_grad(curl.rotations)
    assert np.linalg.norm(grad) < 1e-6


def test_gradient_matches_finite_differences(skeleton, rng):
    motion = fx.random_motion(rng, 1)
    objective = _objective(skeleton, motion)
    raw = fx.random_motion(rng, 1).rotations.copy()
    value, grad = objective.value_and_grad(raw)
    h = 1e-5
    flat = raw.reshape(-1)
    fd = np.zeros_like(flat)
    for i in range(flat.size):
        fp = flat.copy()
        fp[i] += h
        fm = flat.copy()
        fm[i] -= h
        fd[i] = (objective.value(fp.reshape(raw.shape)) - objective.value(fm.reshape(raw.shape))) / (2 * h)
    rel = np.max(np.abs(grad.reshape(-1) - fd)) / np.max(np.abs(fd))
    assert rel < 1e-4


def test_gradient_linearity_in_terms(skeleton, rng):
    # at a strictly in-range pure-bend pose the anatomical term has zero
    # gradient, so the total gradient equals the semantic part alone
    motion = fx.random_motion(rng, 1)
    pose = fx.random_inrange_motion(rng, 1).rotations
    with_ana = _objective(skeleton, motion, weights=ob.LossWeights(1.0, 0.1))
    without = _objective(skeleton, motion, weights=ob.LossWeights(1.0, 0.0))
    _, g1 = with_ana.value_and_grad(pose)
    _, g2 = without.value_and_grad(pose)
    assert np.allclose(g1, g2, atol=1e-12)


def test_loss_gradient_helper(skeleton, rng):
    motion = fx.random_motion(rng, 1)
    objective = _objective(skeleton, motion)
    raw = fx.random_motion(rng, 1).rotations
    assert np.array_equal(ob.loss_gradient(objective, raw), objective.value_and_grad(raw)[1])
