"""Deterministic diffusion-trajectory engine for pivot-based latent editing.

Builds deterministic denoise/invert trajectories over an abstract noise
predictor, locates an editing pivot by probing per-step prompt responses,
refines it with an alternating denoise/invert process, and scores the
resulting edits against analytic Gaussian-mixture models.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .metrics import (
    EditMetrics,
    ReferenceTrajectory,
    TestbedSpec,
    evaluate_edit,
    fidelity_error,
    reference_trajectory,
    target_alignment,
)
from .pivot import PivotGrid, PivotReport, locate_pivot, probe_responses
from .predictor import (
    ConditionEmbedding,
    ConstantPredictor,
    EpsilonPredictor,
    GmmModelSpec,
    GmmPredictor,
    constant_epsilon,
    gmm_epsilon,
    gmm_log_density,
    guided_epsilon,
)
from .schedule import (
    NoiseSchedule,
    alpha_bar_at,
    build_linear_schedule,
    refine_schedule,
)
from .stepper import (
    CFG,
    Direction,
    GuidanceConfig,
    LatentState,
    PLAIN,
    Trajectory,
    ddim_denoise_step,
    ddim_invert_step,
    denoise_trajectory,
    invert_trajectory,
)
from .zigzag import (
    EditRun,
    ZigZagConfig,
    baseline_edit,
    compute_K,
    zigzag_combined_step,
    zigzag_process,
    zigzag_union,
    zz_edit,
)

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND",
    "NoiseSchedule",
    "build_linear_schedule",
    "alpha_bar_at",
    "refine_schedule",
    "ConditionEmbedding",
    "GmmModelSpec",
    "EpsilonPredictor",
    "GmmPredictor",
    "ConstantPredictor",
    "constant_epsilon",
    "gmm_epsilon",
    "gmm_log_density",
    "guided_epsilon",
    "LatentState",
    "GuidanceConfig",
    "PLAIN",
    "CFG",
    "Direction",
    "Trajectory",
    "ddim_denoise_step",
    "ddim_invert_step",
    "denoise_trajectory",
    "invert_trajectory",
    "PivotGrid",
    "PivotReport",
    "probe_responses",
    "locate_pivot",
    "ZigZagConfig",
    "EditRun",
    "compute_K",
    "zigzag_union",
    "zigzag_combined_step",
    "zigzag_process",
    "zz_edit",
    "baseline_edit",
    "TestbedSpec",
    "EditMetrics",
    "ReferenceTrajectory",
    "reference_trajectory",
    "fidelity_error",
    "target_alignment",
    "evaluate_edit",
]
