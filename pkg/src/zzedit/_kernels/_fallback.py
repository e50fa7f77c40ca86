"""Pure-numpy implementations of the hot numerical kernels.

Mirrors the compiled extension's interface exactly; selected at import time
when the extension is unavailable (or when ZZEDIT_PURE_PYTHON is set).
"""

from __future__ import annotations

import numpy as np

_LOG_2PI = float(np.log(2.0 * np.pi))


def _component_log_weights(
    z: np.ndarray,
    alpha_bar: float,
    means: np.ndarray,
    variances: np.ndarray,
    weights: np.ndarray,
) -> np.ndarray:
    """log of (weight_i * density_i(z)) for each mixture component.

    At signal level alpha_bar the component i density is a diagonal normal
    with mean sqrt(alpha_bar) * means[i] and variance
    alpha_bar * variances[i] + (1 - alpha_bar).
    """
    root = np.sqrt(alpha_bar)
    smeared = alpha_bar * variances + (1.0 - alpha_bar)  # (k, d)
    resid = z[None, :] - root * means  # (k, d)
    log_norm = -0.5 * np.sum(np.log(smeared) + _LOG_2PI, axis=1)
    quad = -0.5 * np.sum(resid * resid / smeared, axis=1)
    with np.errstate(divide="ignore"):
        log_w = np.where(weights > 0.0, np.log(weights), -np.inf)
    return log_w + log_norm + quad


def gmm_log_density(
    z: np.ndarray,
    alpha_bar: float,
    means: np.ndarray,
    variances: np.ndarray,
    weights: np.ndarray,
) -> float:
    """log sum_i w_i N(z; sqrt(ab) mean_i, ab var_i + (1-ab)), stably."""
    lw = _component_log_weights(z, alpha_bar, means, variances, weights)
    peak = np.max(lw)
    return float(peak + np.log(np.sum(np.exp(lw - peak))))


def gmm_epsilon(
    z: np.ndarray,
    alpha_bar: float,
    means: np.ndarray,
    variances: np.ndarray,
    weights: np.ndarray,
) -> np.ndarray:
    """Optimal noise estimate -sqrt(1-ab) * grad log density, elementwise.

    Computed as the posterior-responsibility-weighted sum of per-component
    whitened residuals.
    """
    root = np.sqrt(alpha_bar)
    smeared = alpha_bar * variances + (1.0 - alpha_bar)
    resid = z[None, :] - root * means
    lw = _component_log_weights(z, alpha_bar, means, variances, weights)
    peak = np.max(lw)
    resp = np.exp(lw - peak)
    resp /= np.sum(resp)
    return np.sqrt(1.0 - alpha_bar) * np.sum(resp[:, None] * resid / smeared, axis=0)


def gmm_path(
    z_start: np.ndarray,
    alpha_bars: np.ndarray,
    means: np.ndarray,
    variances: np.ndarray,
    cond_weights: np.ndarray,
    null_weights: np.ndarray,
    omega: float,
    use_cfg: bool,
) -> np.ndarray:
    """Integrate the deterministic one-step recurrence along a level path.

    alpha_bars[k] is the signal level of state k; the step from state k to
    k+1 evaluates the mixture noise estimate at (state k, alpha_bars[k]) and
    applies

        z[k+1] = sqrt(ab[k+1]/ab[k]) z[k]
                 + sqrt(ab[k+1]) (g(ab[k+1]) - g(ab[k])) eps,
        g(ab)  = sqrt(1/ab - 1).

    The same recurrence covers both directions: alpha_bars increasing along
    the path denoises, decreasing inverts. Returns the full path including
    the start state, shape (len(alpha_bars), dim).
    """
    n = len(alpha_bars) - 1
    path = np.empty((n + 1, z_start.shape[0]), dtype=np.float64)
    path[0] = z_start
    gamma = np.sqrt(1.0 / alpha_bars - 1.0)
    apply_cfg = use_cfg and omega != 1.0
    for k in range(n):
        z = path[k]
        eps = gmm_epsilon(z, float(alpha_bars[k]), means, variances, cond_weights)
        if apply_cfg:
            eps_null = gmm_epsilon(
                z, float(alpha_bars[k]), means, variances, null_weights
            )
            eps = omega * eps + (1.0 - omega) * eps_null
        scale = np.sqrt(alpha_bars[k + 1] / alpha_bars[k])
        shift = np.sqrt(alpha_bars[k + 1]) * (gamma[k + 1] - gamma[k])
        path[k + 1] = scale * z + shift * eps
    return path
