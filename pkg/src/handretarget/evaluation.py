"""Retargeting quality metrics and report assembly.

``s_palm`` and ``s_finger`` are unweighted mean cosine similarities between
two semantic matrices over the palm-anchor rows (20 x 9 x T terms) and the
inter-joint rows (20 x 20 x T terms, self pairs counting as 1).  Positional
MSE compares forward-kinematics results of two motions on the same skeleton
in m².
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .hand_model import PoseFK
from .semantics import JOINT_COUNT, ROW_COUNT, SemanticMatrix

_TINY = 1e-12

REPORT_FIELDS = ("s_palm", "s_finger", "mse_m2", "frames")


@dataclass(frozen=True)
class MetricsReport:
    s_palm: float
    s_finger: float
    frames: int
    mse: float | None = None
    s_palm_per_frame: np.ndarray | None = None
    s_finger_per_frame: np.ndarray | None = None
    mse_per_frame: np.ndarray | None = None

    def __post_init__(self):
        if not -1.0 - 1e-9 <= self.s_palm <= 1.0 + 1e-9:
            raise ValueError("s_palm out of [-1, 1]")
        if not -1.0 - 1e-9 <= self.s_finger <= 1.0 + 1e-9:
            raise ValueError("s_finger out of [-1, 1]")
        if self.mse is not None and self.mse < 0:
            raise ValueError("mse must be nonnegative")

    def as_dict(self):
        out = {
            "s_palm": self.s_palm,
            "s_finger": self.s_finger,
            "frames": self.frames,
        }
        if self.mse is not None:
            out["mse_m2"] = self.mse
        return out


def _as_data(d):
    return d.data if isinstance(d, SemanticMatrix) else np.asarray(d, dtype=float)


def _pair_cosines(d_a, d_b, rows, allow_self=False):
    """(20, T, rows) cosines for the selected row range.

    Zero rows are an error except the self pairs (joint j against row j),
    which are zero on both sides by construction and count as cosine 1.
    """
    a = _as_data(d_a)[:, :, rows, :]
    b = _as_data(d_b)[:, :, rows, :]
    if a.shape != b.shape:
        raise ValueError("semantic matrices differ in shape")
    na = np.linalg.norm(a, axis=-1)
    nb = np.linalg.norm(b, axis=-1)
    zero = (na <= _TINY) | (nb <= _TINY)
    expected = np.zeros(zero.shape, dtype=bool)
    if allow_self:
        j = np.arange(JOINT_COUNT)
        expected[j, :, j] = True
    bad = zero & ~expected
    if np.any(bad):
        jj, _, kk = np.nonzero(bad)
        kind = "semantic" if allow_self else "palm"
        raise NumericalError(
            f"zero-vector {kind} row (joint {jj[0]}, row {kk[0]}); corrupt input"
        )
    den = np.where(zero, 1.0, na * nb)
    cos = np.einsum("jtka,jtka->jtk", a, b) / den
    return np.where(expected, 1.0, cos)


def s_palm(d_a, d_b) -> float:
    """Mean cosine over all palm-anchor rows and frames."""
    cos = _pair_cosines(d_a, d_b, slice(JOINT_COUNT, ROW_COUNT))
    return float(cos.mean())


def s_finger(d_a, d_b) -> float:
    """Mean cosine over all inter-joint rows and frames (self pairs = 1)."""
    cos = _pair_cosines(d_a, d_b, slice(0, JOINT_COUNT), allow_self=True)
    return float(cos.mean())


def s_palm_per_frame(d_a, d_b) -> np.ndarray:
    cos = _pair_cosines(d_a, d_b, slice(JOINT_COUNT, ROW_COUNT))
    return cos.mean(axis=(0, 2))


def s_finger_per_frame(d_a, d_b) -> np.ndarray:
    cos = _pair_cosines(d_a, d_b, slice(0, JOINT_COUNT), allow_self=True)
    return cos.mean(axis=(0, 2))


def positional_mse(fk_gt: PoseFK, fk_b: PoseFK) -> float:
    """Mean squared joint-position distance (m²) over frames and 20 joints."""
    return float(np.mean(positional_mse_per_frame(fk_gt, fk_b)))


def positional_mse_per_frame(fk_gt: PoseFK, fk_b: PoseFK) -> np.ndarray:
    if fk_gt.frames != fk_b.frames:
        raise ValueError(
            f"frame counts differ: {fk_gt.frames} vs {fk_b.frames}"
        )
    sq = np.sum((fk_gt.positions - fk_b.positions) ** 2, axis=-1)
    return sq.mean(axis=-1)


def metrics_report(d_a, d_b, fk_gt=None, fk_b=None) -> MetricsReport:
    """Assemble the metric bundle for a retargeting result.

    ``d_a`` is the reference (source) matrix, ``d_b`` the retargeted one.
    Positional MSE is included only when both FK arguments are given.
    """
    palm_trace = s_palm_per_frame(d_a, d_b)
    finger_trace = s_finger_per_frame(d_a, d_b)
    mse = None
    mse_trace = None
    if fk_gt is not None and fk_b is not None:
        mse_trace = positional_mse_per_frame(fk_gt, fk_b)
        mse = float(mse_trace.mean())
    return MetricsReport(
        s_palm=float(palm_trace.mean()),
        s_finger=float(finger_trace.mean()),
        frames=int(_as_data(d_a).shape[1]),
        mse=mse,
        s_palm_per_frame=palm_trace,
        s_finger_per_frame=finger_trace,
        mse_per_frame=mse_trace,
    )


def write_report_json(report: MetricsReport, path):
    from .fileio import atomic_write_text

    atomic_write_text(path, json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n")


def write_report_csv(report: MetricsReport, path):
    from .fileio import atomic_write_text

    d = report.as_dict()
    fields = [f for f in REPORT_FIELDS if f in d]
    lines = [",".join(fields), ",".join(repr(d[f]) if isinstance(d[f], float) else str(d[f]) for f in fields)]
    atomic_write_text(path, "\n".join(lines) + "\n")
