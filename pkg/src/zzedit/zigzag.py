"""Alternating denoise/invert refinement and the full editing pipelines.

A union is one target-conditioned denoise step from the pivot level followed
by one source-conditioned invert step back up. Substituting the invert step
into the following denoise step shows each union shifts the denoised latent
by a fixed multiple of the difference between the two noise estimates:

    next = prev + sqrt(ab[p-1]) (g(ab[p-1]) - g(ab[p])) (eps_up - eps_down)

so repeating unions progressively injects the target direction while the
level-p structure is retained. The full pipeline inverts to a located pivot,
runs K unions, and finishes with a pure guided denoise to level 0; the
baseline pipeline skips the pivot search and refinement entirely.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .pivot import PivotGrid, PivotReport, locate_pivot
from .predictor import ConditionEmbedding, EpsilonPredictor
from .schedule import NoiseSchedule
from .stepper import (
    CFG,
    Direction,
    GuidanceConfig,
    LatentState,
    PLAIN,
    Trajectory,
    concat_trajectories,
    ddim_denoise_step,
    ddim_invert_step,
    denoise_trajectory,
    evaluate_eps,
    invert_trajectory,
)


@dataclass(frozen=True)
class ZigZagConfig:
    """Refinement fraction and per-phase guidance settings."""

    a: float = 1.0
    omega_zz: GuidanceConfig = PLAIN
    omega_inv: GuidanceConfig = PLAIN
    omega_final: GuidanceConfig = CFG(7.5)

    def __post_init__(self):
        if not 0.0 <= self.a <= 1.0:
            raise ValueError(f"zigzag fraction must be in [0, 1], got {self.a}")


@dataclass
class EditRun:
    """Everything one editing run produced.

    The trajectory is the full movement path (inversion, zigzag, final
    denoise); probe evaluations are tallied in the pivot report and in
    total_predictor_calls but are not movement steps.
    """

    pivot_report: PivotReport
    K: int
    trajectory: Trajectory
    z_edited: LatentState
    total_predictor_calls: int
    inversion_calls: int
    denoising_calls: int

    @property
    def inversion_steps(self) -> int:
        return self.trajectory.inversion_steps

    @property
    def denoising_steps(self) -> int:
        return self.trajectory.denoising_steps

    def to_dict(self) -> dict:
        return {
            "pivot_report": self.pivot_report.to_dict(),
            "K": self.K,
            "z_edited": list(self.z_edited.z),
            "total_predictor_calls": self.total_predictor_calls,
            "inversion_calls": self.inversion_calls,
            "denoising_calls": self.denoising_calls,
            "inversion_steps": self.inversion_steps,
            "denoising_steps": self.denoising_steps,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def compute_K(a: float, T: int, p: int) -> int:
    """Number of unions for fraction a: round-half-up of a*(T - p)."""
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"fraction a must be in [0, 1], got {a}")
    if not 0 <= p <= T:
        raise ValueError(f"pivot level must be in 0..{T}, got {p}")
    return int(math.floor(a * (T - p) + 0.5))


def zigzag_union(
    z_p: LatentState,
    predictor: EpsilonPredictor,
    c_src: ConditionEmbedding,
    c_tgt: ConditionEmbedding,
    null_cond: ConditionEmbedding,
    config: ZigZagConfig,
    schedule: NoiseSchedule,
) -> tuple[LatentState, LatentState]:
    """One union at level p: denoise toward the target, invert back up.

    Returns (denoised state at p-1, re-inverted state at p). The denoise
    estimate is taken at (z_p, p) under the target prompt; the invert
    estimate at the denoised state (level p-1) under the source prompt.
    """
    p = z_p.t
    if p < 1:
        raise ValueError("zigzag union requires level p >= 1")
    eps_down = evaluate_eps(
        predictor, z_p.z, float(schedule.alpha_bar[p]), c_tgt, null_cond,
        config.omega_zz,
    )
    down = LatentState(p - 1, ddim_denoise_step(z_p.z, p, eps_down, schedule))
    eps_up = evaluate_eps(
        predictor, down.z, float(schedule.alpha_bar[p - 1]), c_src, null_cond,
        config.omega_inv,
    )
    up = LatentState(p, ddim_invert_step(down.z, p, eps_up, schedule))
    return down, up


def zigzag_combined_step(
    z_prev: LatentState,
    eps_p: np.ndarray,
    eps_prev: np.ndarray,
    schedule: NoiseSchedule,
) -> np.ndarray:
    """Closed form of invert-then-denoise across one union.

    For a state at level p-1 inverted with eps_prev and denoised with eps_p,
    the composition collapses to

        z_prev + sqrt(ab[p-1]) (g(ab[p-1]) - g(ab[p])) (eps_p - eps_prev).
    """
    p = z_prev.t + 1
    if not 1 <= p <= schedule.T:
        raise ValueError(f"combined step level {p} out of range 1..{schedule.T}")
    ab_prev = float(schedule.alpha_bar[p - 1])
    ab_p = float(schedule.alpha_bar[p])
    coeff = math.sqrt(ab_prev) * (
        math.sqrt(1.0 / ab_prev - 1.0) - math.sqrt(1.0 / ab_p - 1.0)
    )
    return z_prev.z + coeff * (np.asarray(eps_p) - np.asarray(eps_prev))


def zigzag_process(
    z_p: LatentState,
    K: int,
    predictor: EpsilonPredictor,
    c_src: ConditionEmbedding,
    c_tgt: ConditionEmbedding,
    null_cond: ConditionEmbedding,
    config: ZigZagConfig,
    schedule: NoiseSchedule,
) -> tuple[LatentState, Trajectory]:
    """Apply K unions at the pivot level, recording all 2K visited states."""
    if K < 0:
        raise ValueError(f"union count must be nonnegative, got {K}")
    if K > 0 and z_p.t < 1:
        raise ValueError("zigzag requires pivot level >= 1")
    states = [z_p]
    calls = 0
    state = z_p
    for _ in range(K):
        down, state = zigzag_union(
            state, predictor, c_src, c_tgt, null_cond, config, schedule
        )
        states.extend([down, state])
        calls += config.omega_zz.calls_per_eval + config.omega_inv.calls_per_eval
    trajectory = Trajectory(
        direction=Direction.ZIGZAG, states=states, predictor_calls=calls
    )
    return state, trajectory


def zz_edit(
    z_0: LatentState,
    grid: PivotGrid,
    predictor: EpsilonPredictor,
    c_src: ConditionEmbedding,
    c_tgt: ConditionEmbedding,
    null_cond: ConditionEmbedding,
    config: ZigZagConfig,
    schedule: NoiseSchedule,
    forced_pivot: int | None = None,
) -> EditRun:
    """Pivot-located edit: invert to p, refine with K unions, denoise to 0.

    With forced_pivot the response search is skipped and the pivot level is
    fixed (used by pivot-sweep ablations); the report is then marked
    degenerate only when the forced level equals T.
    """
    if z_0.t != 0:
        raise ValueError(f"editing starts from level 0, got {z_0.t}")
    T = schedule.T

    if forced_pivot is None:
        report, inv_traj = locate_pivot(
            z_0, grid, predictor, c_src, c_tgt, null_cond, config.omega_inv,
            schedule,
        )
    else:
        if not 1 <= forced_pivot <= T:
            raise ValueError(f"forced pivot must be in 1..{T}, got {forced_pivot}")
        report = PivotReport(
            candidates=[], p=forced_pivot, probe_calls=0,
            degenerate=(forced_pivot == T),
        )
        inv_traj = invert_trajectory(
            z_0, forced_pivot, predictor, c_src, null_cond, config.omega_inv,
            schedule,
        )

    p = report.p
    K = compute_K(config.a, T, p)
    pivot_state = inv_traj.final

    zz_state, zz_traj = zigzag_process(
        pivot_state, K, predictor, c_src, c_tgt, null_cond, config, schedule
    )
    final_traj = denoise_trajectory(
        zz_state, 0, predictor, c_tgt, null_cond, config.omega_final, schedule
    )

    trajectory = concat_trajectories(inv_traj, zz_traj, final_traj)
    inversion_calls = (
        inv_traj.predictor_calls + K * config.omega_inv.calls_per_eval
    )
    denoising_calls = (
        K * config.omega_zz.calls_per_eval + final_traj.predictor_calls
    )
    return EditRun(
        pivot_report=report,
        K=K,
        trajectory=trajectory,
        z_edited=trajectory.final,
        total_predictor_calls=(
            inversion_calls + denoising_calls + report.probe_calls
        ),
        inversion_calls=inversion_calls,
        denoising_calls=denoising_calls,
    )


def baseline_edit(
    z_0: LatentState,
    predictor: EpsilonPredictor,
    c_src: ConditionEmbedding,
    c_tgt: ConditionEmbedding,
    null_cond: ConditionEmbedding,
    omega_inv: GuidanceConfig,
    omega_final: GuidanceConfig,
    schedule: NoiseSchedule,
) -> EditRun:
    """Full inversion under the source prompt, then guided denoise to 0."""
    if z_0.t != 0:
        raise ValueError(f"editing starts from level 0, got {z_0.t}")
    T = schedule.T
    inv_traj = invert_trajectory(
        z_0, T, predictor, c_src, null_cond, omega_inv, schedule
    )
    final_traj = denoise_trajectory(
        inv_traj.final, 0, predictor, c_tgt, null_cond, omega_final, schedule
    )
    trajectory = concat_trajectories(inv_traj, final_traj)
    report = PivotReport(candidates=[], p=T, probe_calls=0, degenerate=True)
    return EditRun(
        pivot_report=report,
        K=0,
        trajectory=trajectory,
        z_edited=trajectory.final,
        total_predictor_calls=inv_traj.predictor_calls + final_traj.predictor_calls,
        inversion_calls=inv_traj.predictor_calls,
        denoising_calls=final_traj.predictor_calls,
    )
