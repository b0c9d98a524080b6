"""Semantics-preserving hand motion retargeting.

Measures hand-motion semantics with a per-joint anatomical feature matrix
and retargets motions between hand models of differing shape by optimizing
a semantic + anatomical objective.  See README.md for conventions (joint
ordering, units, file formats).
"""

from .errors import (
    ConventionError,
    HandRetargetError,
    NumericalError,
    ParseError,
    RayMissError,
)
from .evaluation import MetricsReport, metrics_report, positional_mse, s_finger, s_palm
from .hand_model import (
    GLOBAL,
    JOINT_NAMES,
    TBS_LOCAL,
    HandSkeleton,
    MotionSequence,
    PoseFK,
    ShapeParams,
    forward_kinematics,
    global_to_tbs,
    tbs_to_global,
)
from .mesh import TriMesh, load_obj, ray_mesh_intersect, save_obj
from .objectives import (
    EulerTBS,
    LossWeights,
    TotalLossObjective,
    anatomical_loss,
    decompose_tbs_euler,
    loss_gradient,
    quaternion_mse,
    recompose_tbs_euler,
    semantic_similarity,
    semantic_weights,
    total_loss,
)
from .retarget import (
    RetargetConfig,
    RetargetReport,
    copy_baseline,
    retarget_optimize,
    retarget_sequence_windows,
    tbs_copy_baseline,
)
from .semantics import PalmAnchors, SemanticMatrix, asm_from_fk, extract_asm, palm_anchors
from .tbs_frames import (
    FrameCandidate,
    FrameOverride,
    annotate_frames,
    annotation_loss,
    compute_twist_axis,
)

__version__ = "0.1.0"

__all__ = [
    "ConventionError",
    "EulerTBS",
    "FrameCandidate",
    "FrameOverride",
    "GLOBAL",
    "HandRetargetError",
    "HandSkeleton",
    "JOINT_NAMES",
    "LossWeights",
    "MetricsReport",
    "MotionSequence",
    "NumericalError",
    "ParseError",
    "PalmAnchors",
    "PoseFK",
    "RayMissError",
    "RetargetConfig",
    "RetargetReport",
    "SemanticMatrix",
    "ShapeParams",
    "TBS_LOCAL",
    "TotalLossObjective",
    "TriMesh",
    "anatomical_loss",
    "annotate_frames",
    "annotation_loss",
    "asm_from_fk",
    "compute_twist_axis",
    "copy_baseline",
    "decompose_tbs_euler",
    "extract_asm",
    "forward_kinematics",
    "global_to_tbs",
    "load_obj",
    "loss_gradient",
    "metrics_report",
    "palm_anchors",
    "positional_mse",
    "quaternion_mse",
    "ray_mesh_intersect",
    "recompose_tbs_euler",
    "retarget_optimize",
    "retarget_sequence_windows",
    "s_finger",
    "s_palm",
    "save_obj",
    "semantic_similarity",
    "semantic_weights",
    "tbs_copy_baseline",
    "tbs_to_global",
    "total_loss",
]
