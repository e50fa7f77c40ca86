"""Response probing and pivot location on the inversion trajectory.

The probe denoises a latent one step under the source, target, and null
prompts separately and measures how far each conditioned result lands from
the null-anchored one. The pivot is the first grid level whose target
response strictly exceeds its source response; if no level qualifies the
search degenerates to the full-inversion endpoint.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .predictor import ConditionEmbedding, EpsilonPredictor
from .schedule import NoiseSchedule
from .stepper import (
    Direction,
    GuidanceConfig,
    LatentState,
    Trajectory,
    concat_trajectories,
    ddim_denoise_step,
    invert_trajectory,
)

DEFAULT_GRID_FRACTIONS = (0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)


@dataclass(frozen=True)
class PivotGrid:
    """Candidate pivot levels as fractions of T."""

    fractions: tuple[float, ...] = DEFAULT_GRID_FRACTIONS

    def __post_init__(self):
        fracs = tuple(float(f) for f in self.fractions)
        if not fracs:
            raise ValueError("grid must have at least one fraction")
        if any(not 0.0 < f <= 1.0 for f in fracs):
            raise ValueError("grid fractions must lie in (0, 1]")
        if any(b <= a for a, b in zip(fracs, fracs[1:])):
            raise ValueError("grid fractions must be strictly increasing")
        if fracs[-1] != 1.0:
            raise ValueError("grid must end at fraction 1.0")
        object.__setattr__(self, "fractions", fracs)

    def levels(self, T: int) -> list[int]:
        """Candidate levels round(fraction*T), half away from zero, deduplicated.

        Levels are clamped to >= 1 since level 0 cannot be probed.
        """
        out: list[int] = []
        for f in self.fractions:
            level = max(1, math.floor(f * T + 0.5))
            if not out or level != out[-1]:
                out.append(level)
        return out


@dataclass(frozen=True)
class ProbedCandidate:
    t: int
    resp_src: float
    resp_tgt: float

    @property
    def satisfied(self) -> bool:
        return self.resp_tgt > self.resp_src


@dataclass
class PivotReport:
    """Per-candidate responses and the chosen pivot level."""

    candidates: list[ProbedCandidate] = field(default_factory=list)
    p: int = 0
    probe_calls: int = 0
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "candidates": [
                {"t": c.t, "resp_src": c.resp_src, "resp_tgt": c.resp_tgt,
                 "chosen": (not self.degenerate and c.t == self.p)}
                for c in self.candidates
            ],
            "p": self.p,
            "probe_calls": self.probe_calls,
            "degenerate": self.degenerate,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def csv_rows(self) -> list[tuple]:
        return [
            (c.t, c.resp_src, c.resp_tgt, int(not self.degenerate and c.t == self.p))
            for c in self.candidates
        ]


def probe_responses(
    z_t: LatentState,
    predictor: EpsilonPredictor,
    c_src: ConditionEmbedding,
    c_tgt: ConditionEmbedding,
    null_cond: ConditionEmbedding,
    schedule: NoiseSchedule,
) -> tuple[float, float]:
    """Response levels toward the source and target prompts at one state.

    Performs three one-step denoisings of z_t under the source, target, and
    null prompts (plain conditional estimates, three predictor calls) and
    returns the Euclidean distances of the source- and target-denoised
    latents from the null-denoised anchor.
    """
    if z_t.t < 1:
        raise ValueError("probing requires level t >= 1")
    alpha_bar_t = float(schedule.alpha_bar[z_t.t])
    branches = []
    for cond in (c_src, c_tgt, null_cond):
        eps = predictor.predict(z_t.z, alpha_bar_t, cond)
        branches.append(ddim_denoise_step(z_t.z, z_t.t, eps, schedule))
    denoised_src, denoised_tgt, anchor = branches
    resp_src = float(np.linalg.norm(denoised_src - anchor))
    resp_tgt = float(np.linalg.norm(denoised_tgt - anchor))
    return resp_src, resp_tgt


def locate_pivot(
    z_0: LatentState,
    grid: PivotGrid,
    predictor: EpsilonPredictor,
    c_src: ConditionEmbedding,
    c_tgt: ConditionEmbedding,
    null_cond: ConditionEmbedding,
    guidance_inv: GuidanceConfig,
    schedule: NoiseSchedule,
) -> tuple[PivotReport, Trajectory]:
    """Invert upward under the source prompt, probing grid levels in order.

    Stops at the first candidate whose target response strictly exceeds its
    source response and returns the inversion trajectory up to that level.
    If no candidate qualifies, inversion continues to T and the report is
    marked degenerate with p = T. Probes are non-destructive and their
    predictor calls are tallied separately from the inversion's.
    """
    if z_0.t != 0:
        raise ValueError(f"pivot search starts from level 0, got {z_0.t}")
    candidate_levels = grid.levels(schedule.T)

    report = PivotReport()
    segments: list[Trajectory] = []
    state = z_0
    for level in candidate_levels:
        segments.append(
            invert_trajectory(
                state, level, predictor, c_src, null_cond, guidance_inv, schedule
            )
        )
        state = segments[-1].final
        resp_src, resp_tgt = probe_responses(
            state, predictor, c_src, c_tgt, null_cond, schedule
        )
        report.candidates.append(ProbedCandidate(level, resp_src, resp_tgt))
        report.probe_calls += 3
        if resp_tgt > resp_src:
            report.p = level
            report.degenerate = False
            break
    else:
        report.p = schedule.T
        report.degenerate = True

    trajectory = concat_trajectories(*segments, direction=Direction.INVERTING)
    return report, trajectory


def locate_pivot_brute_force(
    z_0: LatentState,
    grid: PivotGrid,
    predictor: EpsilonPredictor,
    c_src: ConditionEmbedding,
    c_tgt: ConditionEmbedding,
    null_cond: ConditionEmbedding,
    guidance_inv: GuidanceConfig,
    schedule: NoiseSchedule,
) -> PivotReport:
    """Probe every grid level and take the minimum satisfying one.

    Exhaustive counterpart of locate_pivot, kept for budget comparisons: it
    spends the full probe budget regardless of where the pivot lies.
    """
    if z_0.t != 0:
        raise ValueError(f"pivot search starts from level 0, got {z_0.t}")
    report = PivotReport()
    state = z_0
    for level in grid.levels(schedule.T):
        state = invert_trajectory(
            state, level, predictor, c_src, null_cond, guidance_inv, schedule
        ).final
        resp_src, resp_tgt = probe_responses(
            state, predictor, c_src, c_tgt, null_cond, schedule
        )
        report.candidates.append(ProbedCandidate(level, resp_src, resp_tgt))
        report.probe_calls += 3
    satisfying = [c.t for c in report.candidates if c.satisfied]
    if satisfying:
        report.p = min(satisfying)
        report.degenerate = False
    else:
        report.p = schedule.T
        report.degenerate = True
    return report
