"""Exact deterministic one-step updates and multi-step trajectory runners.

The denoise step maps a latent one level toward clean data:

    z[t-1] = sqrt(ab[t-1]/ab[t]) z[t]
             + sqrt(ab[t-1]) (g(ab[t-1]) - g(ab[t])) eps,   g(a) = sqrt(1/a - 1)

and the invert step is the same recurrence run upward, with eps evaluated at
the pre-step state (z[t-1], level t-1). With a frozen eps the two are exact
algebraic inverses; with a state-dependent predictor each direction is a
first-order discretization of the underlying deterministic flow.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import IO

import numpy as np

from .predictor import ConditionEmbedding, EpsilonPredictor, guided_epsilon
from .schedule import NoiseSchedule


@dataclass(frozen=True)
class LatentState:
    """A latent vector tagged with its trajectory level."""

    t: int
    z: np.ndarray

    def __post_init__(self):
        if self.t < 0:
            raise ValueError(f"level must be nonnegative, got {self.t}")
        z = np.asarray(self.z, dtype=np.float64)
        if z.ndim != 1:
            raise ValueError("latent must be a 1-D vector")
        if not np.all(np.isfinite(z)):
            raise ValueError("latent entries must be finite")
        z = z.copy()
        z.flags.writeable = False
        object.__setattr__(self, "z", z)

    @property
    def dim(self) -> int:
        return self.z.size


@dataclass(frozen=True)
class GuidanceConfig:
    """Guidance settings for one phase of a run.

    When use_cfg is false the plain conditional estimate is used and omega is
    ignored. PLAIN is the unguided default; CFG(omega) enables the combined
    estimate.
    """

    omega: float = 1.0
    use_cfg: bool = False

    def __post_init__(self):
        if not math.isfinite(self.omega):
            raise ValueError(f"omega must be finite, got {self.omega}")

    @property
    def calls_per_eval(self) -> int:
        """Predictor invocations one guided evaluation costs."""
        return 2 if self.use_cfg and self.omega != 1.0 else 1


PLAIN = GuidanceConfig(omega=1.0, use_cfg=False)


def CFG(omega: float) -> GuidanceConfig:
    return GuidanceConfig(omega=omega, use_cfg=True)


class Direction(enum.Enum):
    INVERTING = "inverting"
    DENOISING = "denoising"
    ZIGZAG = "zigzag"


@dataclass
class Trajectory:
    """Ordered latent states plus the predictor-call count that produced them.

    Consecutive states differ by exactly one level: monotonically for the
    inverting/denoising directions, alternating freely for zigzag-style
    paths.
    """

    direction: Direction
    states: list[LatentState] = field(default_factory=list)
    predictor_calls: int = 0

    def __post_init__(self):
        self._check_levels()

    def _check_levels(self):
        levels = [s.t for s in self.states]
        for a, b in zip(levels, levels[1:]):
            delta = b - a
            if abs(delta) != 1:
                raise ValueError(f"levels must change by 1 per state, got {a}->{b}")
            if self.direction is Direction.INVERTING and delta != 1:
                raise ValueError("inverting trajectory must increase levels")
            if self.direction is Direction.DENOISING and delta != -1:
                raise ValueError("denoising trajectory must decrease levels")

    @property
    def levels(self) -> list[int]:
        return [s.t for s in self.states]

    @property
    def final(self) -> LatentState:
        return self.states[-1]

    @property
    def inversion_steps(self) -> int:
        return sum(1 for a, b in zip(self.levels, self.levels[1:]) if b > a)

    @property
    def denoising_steps(self) -> int:
        return sum(1 for a, b in zip(self.levels, self.levels[1:]) if b < a)

    def write_csv(self, stream: IO[str]) -> None:
        """Rows (step_index, level, z0..z{dim-1}); '.' decimal, LF endings."""
        dim = self.states[0].dim if self.states else 0
        header = ["step_index", "level"] + [f"z{i}" for i in range(dim)]
        stream.write(",".join(header) + "\n")
        for index, state in enumerate(self.states):
            cells = [str(index), str(state.t)] + [repr(v) for v in state.z]
            stream.write(",".join(cells) + "\n")


def concat_trajectories(
    *parts: Trajectory, direction: Direction = Direction.ZIGZAG
) -> Trajectory:
    """Join consecutive segments, deduplicating shared junction states."""
    states: list[LatentState] = []
    calls = 0
    for part in parts:
        segment = part.states
        if states and segment and states[-1].t == segment[0].t:
            if not np.array_equal(states[-1].z, segment[0].z):
                raise ValueError("segments disagree at their junction state")
            segment = segment[1:]
        states.extend(segment)
        calls += part.predictor_calls
    return Trajectory(direction=direction, states=states, predictor_calls=calls)


def _step_coeffs(alpha_cur: float, alpha_next: float) -> tuple[float, float]:
    """Scale/shift pair moving a state from signal level cur to next."""
    g_cur = math.sqrt(1.0 / alpha_cur - 1.0)
    g_next = math.sqrt(1.0 / alpha_next - 1.0)
    scale = math.sqrt(alpha_next / alpha_cur)
    shift = math.sqrt(alpha_next) * (g_next - g_cur)
    return scale, shift


def _check_step_args(z: np.ndarray, t: int, eps: np.ndarray,
                     schedule: NoiseSchedule) -> tuple[np.ndarray, np.ndarray]:
    if not 1 <= t <= schedule.T:
        raise ValueError(f"step level must be in 1..{schedule.T}, got {t}")
    z = np.asarray(z, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if z.shape != eps.shape or z.ndim != 1:
        raise ValueError(f"latent {z.shape} and eps {eps.shape} must be equal 1-D shapes")
    if not (np.all(np.isfinite(z)) and np.all(np.isfinite(eps))):
        raise ValueError("step inputs must be finite")
    return z, eps


def ddim_denoise_step(z_t: np.ndarray, t: int, eps: np.ndarray,
                      schedule: NoiseSchedule) -> np.ndarray:
    """One deterministic step from level t down to t-1."""
    z_t, eps = _check_step_args(z_t, t, eps, schedule)
    scale, shift = _step_coeffs(schedule.alpha_bar[t], schedule.alpha_bar[t - 1])
    return scale * z_t + shift * eps


def ddim_invert_step(z_prev: np.ndarray, t: int, eps: np.ndarray,
                     schedule: NoiseSchedule) -> np.ndarray:
    """One deterministic step from level t-1 up to t."""
    z_prev, eps = _check_step_args(z_prev, t, eps, schedule)
    scale, shift = _step_coeffs(schedule.alpha_bar[t - 1], schedule.alpha_bar[t])
    return scale * z_prev + shift * eps


class _CountingPredictor:
    """Wraps a predictor to count predict invocations."""

    def __init__(self, inner: EpsilonPredictor):
        self._inner = inner
        self.calls = 0

    def predict(self, z, alpha_bar_t, cond):
        self.calls += 1
        return self._inner.predict(z, alpha_bar_t, cond)


def evaluate_eps(
    predictor: EpsilonPredictor,
    z: np.ndarray,
    alpha_bar_t: float,
    cond: ConditionEmbedding,
    null_cond: ConditionEmbedding,
    guidance: GuidanceConfig,
) -> np.ndarray:
    """Noise estimate under a guidance configuration."""
    if guidance.use_cfg:
        return guided_epsilon(predictor, z, alpha_bar_t, cond, null_cond, guidance.omega)
    return predictor.predict(z, alpha_bar_t, cond)


def denoise_trajectory(
    start: LatentState,
    stop_level: int,
    predictor: EpsilonPredictor,
    cond: ConditionEmbedding,
    null_cond: ConditionEmbedding,
    guidance: GuidanceConfig,
    schedule: NoiseSchedule,
) -> Trajectory:
    """Run denoise steps from start.t down to stop_level, recording all states."""
    if not 0 <= stop_level < start.t:
        raise ValueError(
            f"need start.t > stop_level >= 0, got start.t={start.t}, stop={stop_level}"
        )
    counting = _CountingPredictor(predictor)
    states = [start]
    z = start.z
    for t in range(start.t, stop_level, -1):
        eps = evaluate_eps(
            counting, z, float(schedule.alpha_bar[t]), cond, null_cond, guidance
        )
        z = ddim_denoise_step(z, t, eps, schedule)
        states.append(LatentState(t - 1, z))
    return Trajectory(
        direction=Direction.DENOISING, states=states, predictor_calls=counting.calls
    )


def invert_trajectory(
    start: LatentState,
    stop_level: int,
    predictor: EpsilonPredictor,
    cond: ConditionEmbedding,
    null_cond: ConditionEmbedding,
    guidance: GuidanceConfig,
    schedule: NoiseSchedule,
) -> Trajectory:
    """Run invert steps from start.t up to stop_level.

    The estimate for the step t-1 -> t is taken at the pre-step state and
    level (z[t-1], t-1).
    """
    if not start.t < stop_level <= schedule.T:
        raise ValueError(
            f"need start.t < stop_level <= T, got start.t={start.t}, stop={stop_level}"
        )
    counting = _CountingPredictor(predictor)
    states = [start]
    z = start.z
    for t in range(start.t + 1, stop_level + 1):
        eps = evaluate_eps(
            counting, z, float(schedule.alpha_bar[t - 1]), cond, null_cond, guidance
        )
        z = ddim_invert_step(z, t, eps, schedule)
        states.append(LatentState(t, z))
    return Trajectory(
        direction=Direction.INVERTING, states=states, predictor_calls=counting.calls
    )
