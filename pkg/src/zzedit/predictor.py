"""Noise predictors: the abstract interface and analytic mixture models.

A predictor estimates the noise component of a latent at a given signal
level, optionally conditioned on a "prompt". Prompts are represented as
categorical weight vectors over the mixture components of an analytic
Gaussian-mixture data model, whose optimal predictor is available in closed
form:

    eps*(z, ab, c) = -sqrt(1 - ab) * grad_z log p_ab(z | c),
    p_ab(z | c)    = sum_i c_i N(z; sqrt(ab) mean_i, ab var_i + (1 - ab)).

This gives exact, deterministic stand-ins for a trained denoiser, which is
what makes the trajectory algebra in the rest of the package testable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from . import _kernels

_WEIGHT_SUM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ConditionEmbedding:
    """A prompt as a categorical belief over mixture components."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a nonempty 1-D vector")
        if np.any(w < 0.0):
            raise ValueError("weights must be nonnegative")
        if abs(float(np.sum(w)) - 1.0) > _WEIGHT_SUM_TOL:
            raise ValueError(f"weights must sum to 1, got {float(np.sum(w))!r}")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return self.weights.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, ConditionEmbedding):
            return NotImplemented
        return np.array_equal(self.weights, other.weights)

    def __hash__(self):
        return hash(self.weights.tobytes())


@dataclass(frozen=True)
class GmmModelSpec:
    """Diagonal Gaussian mixture standing in for a data distribution.

    Attributes:
        dim: latent dimensionality.
        means: (n_components, dim) component means.
        variances: (n_components, dim) strictly positive diagonal variances.
        null_weights: marginal component weights, used as the null prompt.
    """

    dim: int
    means: np.ndarray
    variances: np.ndarray
    null_weights: ConditionEmbedding

    def __post_init__(self):
        means = np.ascontiguousarray(self.means, dtype=np.float64)
        variances = np.ascontiguousarray(self.variances, dtype=np.float64)
        if means.ndim != 2 or means.shape[1] != self.dim:
            raise ValueError(f"means must have shape (k, {self.dim})")
        if variances.shape != means.shape:
            raise ValueError("variances must match means in shape")
        if not np.all(np.isfinite(means)):
            raise ValueError("component means must be finite")
        if not np.all(variances > 0.0):
            raise ValueError("variances must be strictly positive")
        if len(self.null_weights) != means.shape[0]:
            raise ValueError("null_weights length must equal component count")
        means.flags.writeable = False
        variances.flags.writeable = False
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "variances", variances)

    @property
    def n_components(self) -> int:
        return self.means.shape[0]

    def to_json(self) -> str:
        return json.dumps(
            {
                "dim": self.dim,
                "components": [
                    {"mean": list(self.means[i]), "var": list(self.variances[i])}
                    for i in range(self.n_components)
                ],
                "null_weights": list(self.null_weights.weights),
            },
            sort_keys=True,
        )

    @staticmethod
    def from_json(text: str) -> "GmmModelSpec":
        return gmm_spec_from_dict(json.loads(text))


def gmm_spec_from_dict(data: dict) -> GmmModelSpec:
    components = data["components"]
    return GmmModelSpec(
        dim=int(data["dim"]),
        means=np.array([c["mean"] for c in components], dtype=np.float64),
        variances=np.array([c["var"] for c in components], dtype=np.float64),
        null_weights=ConditionEmbedding(
            np.array(data["null_weights"], dtype=np.float64)
        ),
    )


@runtime_checkable
class EpsilonPredictor(Protocol):
    """Deterministic noise estimator interface."""

    def predict(
        self, z: np.ndarray, alpha_bar_t: float, cond: ConditionEmbedding
    ) -> np.ndarray: ...


def _check_gmm_inputs(spec: GmmModelSpec, z: np.ndarray, alpha_bar_t: float,
                      cond: ConditionEmbedding) -> np.ndarray:
    z = np.ascontiguousarray(z, dtype=np.float64)
    if z.shape != (spec.dim,):
        raise ValueError(f"latent must have shape ({spec.dim},), got {z.shape}")
    if not 0.0 < alpha_bar_t <= 1.0:
        raise ValueError(f"alpha_bar_t must be in (0, 1], got {alpha_bar_t}")
    if len(cond) != spec.n_components:
        raise ValueError(
            f"condition has {len(cond)} weights, model has {spec.n_components} components"
        )
    return z


def gmm_epsilon(
    spec: GmmModelSpec,
    z: np.ndarray,
    alpha_bar_t: float,
    cond: ConditionEmbedding,
) -> np.ndarray:
    """Closed-form optimal noise estimate for the mixture model."""
    z = _check_gmm_inputs(spec, z, alpha_bar_t, cond)
    return _kernels.gmm_epsilon(
        z, float(alpha_bar_t), spec.means, spec.variances, cond.weights
    )


def gmm_log_density(
    spec: GmmModelSpec,
    z: np.ndarray,
    alpha_bar_t: float,
    cond: ConditionEmbedding,
) -> float:
    """Conditional log-density of the smeared mixture at signal level ab."""
    z = _check_gmm_inputs(spec, z, alpha_bar_t, cond)
    return _kernels.gmm_log_density(
        z, float(alpha_bar_t), spec.means, spec.variances, cond.weights
    )


@dataclass(frozen=True)
class GmmPredictor:
    """EpsilonPredictor backed by the analytic mixture model."""

    spec: GmmModelSpec

    def predict(
        self, z: np.ndarray, alpha_bar_t: float, cond: ConditionEmbedding
    ) -> np.ndarray:
        return gmm_epsilon(self.spec, z, alpha_bar_t, cond)


@dataclass(frozen=True, eq=False)
class ConstantPredictor:
    """Predictor returning a fixed vector; algebraic test fixture."""

    value: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.value, dtype=np.float64).copy()
        v.flags.writeable = False
        object.__setattr__(self, "value", v)

    def predict(
        self, z: np.ndarray, alpha_bar_t: float, cond: ConditionEmbedding
    ) -> np.ndarray:
        if z.shape != self.value.shape:
            raise ValueError(
                f"latent shape {z.shape} does not match constant {self.value.shape}"
            )
        return self.value


def constant_epsilon(c: np.ndarray) -> ConstantPredictor:
    return ConstantPredictor(np.asarray(c, dtype=np.float64))


def guided_epsilon(
    predictor: EpsilonPredictor,
    z: np.ndarray,
    alpha_bar_t: float,
    cond: ConditionEmbedding,
    null_cond: ConditionEmbedding,
    omega: float,
) -> np.ndarray:
    """Guidance-combined estimate omega*eps(cond) + (1-omega)*eps(null).

    Makes exactly one predictor evaluation when omega == 1 (the null branch
    contributes nothing) and exactly two otherwise.
    """
    if not np.isfinite(omega):
        raise ValueError(f"guidance scale must be finite, got {omega}")
    eps_cond = predictor.predict(z, alpha_bar_t, cond)
    if omega == 1.0:
        return eps_cond
    eps_null = predictor.predict(z, alpha_bar_t, null_cond)
    return omega * eps_cond + (1.0 - omega) * eps_null
