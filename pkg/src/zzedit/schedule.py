"""Discrete noise schedules: cumulative signal coefficients alpha_bar.

A schedule is built at a base resolution (the training-style grid) and then
subsampled to T inference levels with an even stride. Level 0 is clean data
(alpha_bar exactly 1); level T is the noisiest state. All step formulas in
the rest of the package are parameterized by these coefficients.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

DEFAULT_BASE_RESOLUTION = 1000
DEFAULT_BETA_START = 1e-4
DEFAULT_BETA_END = 0.02


@dataclass(frozen=True)
class NoiseSchedule:
    """Cumulative signal coefficients for T inference levels.

    Attributes:
        T: number of inference steps.
        base_resolution: resolution of the underlying base grid.
        alpha_bar: array of length T+1; alpha_bar[0] == 1 exactly and the
            sequence is strictly decreasing in (0, 1].
        base_index: array of length T; base_index[t-1] is the base-grid step
            that inference level t maps to.
        beta_start, beta_end: construction parameters (None for schedules
            derived by refinement rather than built from a beta range).
    """

    T: int
    base_resolution: int
    alpha_bar: np.ndarray
    base_index: np.ndarray
    beta_start: float | None = None
    beta_end: float | None = None
    # Cumulative log of the base grid, kept for refinement.
    _base_log_alpha_bar: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        self.alpha_bar.flags.writeable = False
        self.base_index.flags.writeable = False
        if self._base_log_alpha_bar is not None:
            self._base_log_alpha_bar.flags.writeable = False

    def alpha_bar_at(self, t: int) -> float:
        """alpha_bar at inference level t; t=0 returns exactly 1."""
        return alpha_bar_at(self, t)

    def to_json(self) -> str:
        if self.beta_start is None or self.beta_end is None:
            raise ValueError("only beta-range schedules are JSON serializable")
        return json.dumps(
            {
                "T": self.T,
                "base_resolution": self.base_resolution,
                "beta_start": self.beta_start,
                "beta_end": self.beta_end,
            },
            sort_keys=True,
        )

    @staticmethod
    def from_json(text: str) -> "NoiseSchedule":
        params = json.loads(text)
        return build_linear_schedule(
            params["T"],
            base_resolution=params["base_resolution"],
            beta_start=params["beta_start"],
            beta_end=params["beta_end"],
        )


def build_linear_schedule(
    T: int,
    base_resolution: int = DEFAULT_BASE_RESOLUTION,
    beta_start: float = DEFAULT_BETA_START,
    beta_end: float = DEFAULT_BETA_END,
) -> NoiseSchedule:
    """Build a linear-beta base schedule and subsample it to T levels.

    The base grid has base_resolution betas linearly spaced from beta_start
    to beta_end; its cumulative signal coefficient is the running product of
    (1 - beta). Inference level t maps to base step t * base_resolution / T,
    so T must divide base_resolution.
    """
    if T <= 0:
        raise ValueError(f"T must be positive, got {T}")
    if base_resolution <= 0 or T > base_resolution:
        raise ValueError(
            f"need 1 <= T <= base_resolution, got T={T}, base_resolution={base_resolution}"
        )
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ValueError(
            f"need 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})"
        )
    if base_resolution % T != 0:
        raise ValueError(
            f"T={T} does not evenly divide base_resolution={base_resolution}"
        )

    betas = np.linspace(beta_start, beta_end, base_resolution)
    base_log = np.concatenate([[0.0], np.cumsum(np.log1p(-betas))])

    stride = base_resolution // T
    base_index = np.arange(1, T + 1, dtype=np.int64) * stride
    alpha_bar = np.empty(T + 1, dtype=np.float64)
    alpha_bar[0] = 1.0
    alpha_bar[1:] = np.exp(base_log[base_index])

    return NoiseSchedule(
        T=T,
        base_resolution=base_resolution,
        alpha_bar=alpha_bar,
        base_index=base_index,
        beta_start=beta_start,
        beta_end=beta_end,
        _base_log_alpha_bar=base_log,
    )


def alpha_bar_at(schedule: NoiseSchedule, t: int) -> float:
    """alpha_bar at inference level t, with bounds checking."""
    if not 0 <= t <= schedule.T:
        raise ValueError(f"level {t} out of range 0..{schedule.T}")
    return float(schedule.alpha_bar[t])


def refine_schedule(schedule: NoiseSchedule, factor: int) -> NoiseSchedule:
    """Refine a schedule so every base step splits into `factor` substeps.

    The refined grid interpolates the base cumulative log-signal curve
    linearly, i.e. each base factor (1 - beta) splits into `factor` equal
    sub-factors. Base grid points keep their exact alpha_bar values, so the
    refined schedule discretizes the same underlying process and every level
    of the original schedule maps onto a refined level.

    The result exposes every refined base step as an inference level
    (T == base_resolution == factor * original base_resolution).
    """
    if factor < 1:
        raise ValueError(f"refinement factor must be >= 1, got {factor}")
    if schedule._base_log_alpha_bar is None:
        raise ValueError("schedule does not carry a base grid to refine")

    base_log = schedule._base_log_alpha_bar
    n_base = schedule.base_resolution
    n_fine = n_base * factor
    positions = np.arange(n_fine + 1) / factor
    fine_log = np.interp(positions, np.arange(n_base + 1), base_log)

    alpha_bar = np.exp(fine_log)
    alpha_bar[0] = 1.0
    return NoiseSchedule(
        T=n_fine,
        base_resolution=n_fine,
        alpha_bar=alpha_bar,
        base_index=np.arange(1, n_fine + 1, dtype=np.int64),
        _base_log_alpha_bar=fine_log,
    )
