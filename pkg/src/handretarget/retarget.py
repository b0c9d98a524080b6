"""Baselines and the optimization-based retargeter.

``copy_baseline`` reuses the global-convention rotations on the target
skeleton; ``tbs_copy_baseline`` reuses the TBS-local rotations.  The
optimizer goes further: it extracts the source semantic matrix and descends
the unsupervised objective (semantic similarity + anatomical limits) over
the target TBS-local rotations with backtracking gradient descent.  Long
sequences are split into fixed-size windows that are optimized in order,
warm-started, and blended over their overlap.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import rotations as rot
from .errors import NumericalError
from .evaluation import s_finger, s_palm
from .hand_model import (
    ACTUATED_COUNT,
    GLOBAL,
    TBS_LOCAL,
    HandSkeleton,
    MotionSequence,
)
from .objectives import LossWeights, TotalLossObjective
from .semantics import extract_asm

log = logging.getLogger(__name__)

INIT_MODES = ("tbs_copy", "rest", "given")


@dataclass(frozen=True)
class RetargetConfig:
    """Optimizer settings; the defaults suit the bundled fixtures."""

    max_iters: int = 1500
    step_size: float = 0.05
    tol: float = 1e-6
    init: str = "tbs_copy"
    weights: LossWeights = field(default_factory=LossWeights)
    seed: int = 0
    armijo_shrink: float = 0.5
    armijo_c: float = 1e-4
    max_backtracks: int = 40

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.init not in INIT_MODES:
            raise ValueError(f"init must be one of {INIT_MODES}")
        if not 0.0 < self.armijo_shrink < 1.0:
            raise ValueError("armijo_shrink must be in (0, 1)")
        if self.armijo_c <= 0 or self.step_size <= 0:
            raise ValueError("armijo_c and step_size must be positive")


@dataclass(frozen=True)
class RetargetReport:
    """Result bundle for one optimization run."""

    motion: MotionSequence
    loss_trace: np.ndarray  # objective value at init and after each accepted step
    iterations: int
    converged: bool
    s_palm: float
    s_finger: float


def copy_baseline(motion: MotionSequence) -> MotionSequence:
    """Reuse the global-convention rotations verbatim on the target."""
    motion.require(GLOBAL)
    return motion


def tbs_copy_baseline(motion: MotionSequence) -> MotionSequence:
    """Reuse the TBS-local rotations verbatim on the target."""
    motion.require(TBS_LOCAL)
    return motion


def _initial_rotations(config, motion_a, init_motion):
    if config.init == "tbs_copy":
        return motion_a.rotations.copy()
    if config.init == "rest":
        raw = np.zeros_like(motion_a.rotations)
        raw[..., 0] = 1.0
        return raw
    if init_motion is None:
        raise ValueError("init='given' requires an initial motion")
    init_motion.require(TBS_LOCAL)
    if init_motion.frames != motion_a.frames:
        raise ValueError("initial motion frame count does not match the source")
    return init_motion.rotations.copy()


def retarget_optimize(
    motion_a: MotionSequence,
    skeleton_a: HandSkeleton,
    skeleton_b: HandSkeleton,
    config: RetargetConfig = RetargetConfig(),
    init_motion: MotionSequence | None = None,
) -> RetargetReport:
    """Minimize the unsupervised objective over the target rotations.

    Deterministic for fixed inputs and config.  The loss trace records the
    objective at the initial point and after every accepted line-search
    step, so it is non-increasing by construction.
    """
    motion_a.require(TBS_LOCAL)
    d_a = extract_asm(motion_a, skeleton_a)
    objective = TotalLossObjective(skeleton_b, d_a, weights=config.weights)

    raw = rot.quat_normalize(_initial_rotations(config, motion_a, init_motion))
    try:
        value, grad = objective.value_and_grad(raw)
    except NumericalError as e:
        raise NumericalError(f"{e} (at initialization)") from e

    trace = [value]
    step = config.step_size
    converged = False
    iterations = 0

    for it in range(config.max_iters):
        gnorm2 = float(np.sum(grad * grad))
        if np.sqrt(gnorm2) < config.tol:
            converged = True
            break

        accepted = False
        t = step
        for _ in range(config.max_backtracks):
            cand = rot.quat_normalize(raw - t * grad)
            try:
                cand_value = objective.value(cand)
            except NumericalError as e:
                raise NumericalError(f"{e} (iteration {it})") from e
            if cand_value <= value - config.armijo_c * t * gnorm2:
                accepted = True
                break
            t *= config.armijo_shrink
        if not accepted:
            log.debug("line search stalled at iteration %d", it)
            break

        raw = cand
        value = cand_value
        trace.append(value)
        iterations = it + 1
        step = t * 2.0
        try:
            value, grad = objective.value_and_grad(raw)
        except NumericalError as e:
            raise NumericalError(f"{e} (iteration {it})") from e

    final = MotionSequence(rot.quat_normalize(raw), TBS_LOCAL, motion_a.fps)
    d_b = extract_asm(final, skeleton_b)
    return RetargetReport(
        motion=final,
        loss_trace=np.array(trace),
        iterations=iterations,
        converged=converged,
        s_palm=s_palm(d_a, d_b),
        s_finger=s_finger(d_a, d_b),
    )


def retarget_sequence_windows(
    motion_a: MotionSequence,
    skeleton_a: HandSkeleton,
    skeleton_b: HandSkeleton,
    config: RetargetConfig = RetargetConfig(),
    window: int = 8,
    overlap: int = 0,
):
    """Optimize a long motion window by window; returns (motion, reports).

    Window k > 0 is warm-started on its first ``overlap`` frames from the
    previous window's result, and the overlapping frames of consecutive
    windows are blended by slerp with a linear ramp.  Output length equals
    input length.
    """
    motion_a.require(TBS_LOCAL)
    if window < 1:
        raise ValueError("window must be at least 1")
    if not 0 <= overlap < window:
        raise ValueError("overlap must be in [0, window)")

    total = motion_a.frames
    if total <= window:
        report = retarget_optimize(motion_a, skeleton_a, skeleton_b, config)
        return report.motion, [report]

    out = np.zeros((total, ACTUATED_COUNT, 4))
    have = 0  # frames of `out` already finalized
    reports = []
    start = 0
    step = window - overlap
    while start < total:
        stop = min(start + window, total)
        sub = MotionSequence(motion_a.rotations[start:stop], TBS_LOCAL, motion_a.fps)

        init_motion = None
        local_config = config
        if start > 0 and overlap > 0:
            init = _initial_rotations(config, sub, None)
            init[: have - start] = out[start:have]
            init_motion = MotionSequence(
                rot.quat_normalize(init), TBS_LOCAL, motion_a.fps
            )
            local_config = replace(config, init="given")
        report = retarget_optimize(
            sub, skeleton_a, skeleton_b, local_config, init_motion=init_motion
        )
        reports.append(report)
        res = report.motion.rotations

        n_blend = max(0, have - start)
        if n_blend:
            alphas = (np.arange(n_blend) + 1.0) / (n_blend + 1.0)
            for i in range(n_blend):
                out[start + i] = rot.quat_slerp(
                    out[start + i], res[i], alphas[i]
                )
        out[start + n_blend : stop] = res[n_blend:]
        have = stop
        if stop == total:
            break
        start += step

    motion = MotionSequence(rot.quat_normalize(out), TBS_LOCAL, motion_a.fps)
    return motion, reports
