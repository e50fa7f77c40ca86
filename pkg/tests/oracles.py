"""Independent reference implementations used as test oracles.

Everything here is deliberately written from scratch against the raw
formulas (straight-line loops, direct summation, arbitrary precision via
mpmath, finite differences) and never calls into the package, so agreement
is evidence rather than tautology. Oracles take plain numpy arrays; where a
schedule is needed they take the alpha_bar array directly.
"""

from __future__ import annotations

import math

import numpy as np
from mpmath import mp, mpf


# ---------------------------------------------------------------------------
# Schedules


def cumprod_alpha_bar(base_resolution: int, beta_start: float,
                      beta_end: float) -> np.ndarray:
    """Base cumulative signal coefficients by direct running product."""
    betas = np.linspace(beta_start, beta_end, base_resolution)
    out = np.empty(base_resolution + 1)
    out[0] = 1.0
    acc = 1.0
    for i, b in enumerate(betas):
        acc *= 1.0 - b
        out[i + 1] = acc
    return out


def mp_cumprod_alpha_bar(base_resolution: int, beta_start: str,
                         beta_end: str, dps: int = 50) -> list:
    """Same product at arbitrary precision."""
    mp.dps = dps
    b0, b1 = mpf(beta_start), mpf(beta_end)
    acc = mpf(1)
    out = [acc]
    for i in range(base_resolution):
        beta = b0 + (b1 - b0) * i / (base_resolution - 1)
        acc *= 1 - beta
        out.append(acc)
    return out


# ---------------------------------------------------------------------------
# One-step updates at arbitrary precision


def mp_denoise_step(z, ab_t, ab_prev, eps, dps: int = 50) -> np.ndarray:
    mp.dps = dps
    ab_t, ab_prev = mpf(ab_t), mpf(ab_prev)
    coeff_z = mp.sqrt(ab_prev / ab_t)
    coeff_e = mp.sqrt(ab_prev) * (mp.sqrt(1 / ab_prev - 1) - mp.sqrt(1 / ab_t - 1))
    return np.array(
        [float(coeff_z * mpf(zi) + coeff_e * mpf(ei)) for zi, ei in zip(z, eps)]
    )


def mp_invert_step(z, ab_t, ab_prev, eps, dps: int = 50) -> np.ndarray:
    mp.dps = dps
    ab_t, ab_prev = mpf(ab_t), mpf(ab_prev)
    coeff_z = mp.sqrt(ab_t / ab_prev)
    coeff_e = mp.sqrt(ab_t) * (mp.sqrt(1 / ab_t - 1) - mp.sqrt(1 / ab_prev - 1))
    return np.array(
        [float(coeff_z * mpf(zi) + coeff_e * mpf(ei)) for zi, ei in zip(z, eps)]
    )


def mp_combined_step(z_prev, ab_p, ab_prev, eps_p, eps_prev,
                     dps: int = 50) -> np.ndarray:
    mp.dps = dps
    ab_p, ab_prev = mpf(ab_p), mpf(ab_prev)
    coeff = mp.sqrt(ab_prev) * (mp.sqrt(1 / ab_prev - 1) - mp.sqrt(1 / ab_p - 1))
    return np.array(
        [float(mpf(zi) + coeff * (mpf(ep) - mpf(eq)))
         for zi, ep, eq in zip(z_prev, eps_p, eps_prev)]
    )


# ---------------------------------------------------------------------------
# Mixture densities and scores, written independently


def naive_log_density(z, alpha_bar, means, variances, weights) -> float:
    """Direct density summation (no log-sum-exp tricks)."""
    total = 0.0
    root = math.sqrt(alpha_bar)
    for w, mu, var in zip(weights, means, variances):
        dens = 1.0
        for zi, mi, vi in zip(z, mu, var):
            s = alpha_bar * vi + (1.0 - alpha_bar)
            dens *= math.exp(-((zi - root * mi) ** 2) / (2 * s)) / math.sqrt(
                2 * math.pi * s
            )
        total += w * dens
    return math.log(total)


def naive_epsilon(z, alpha_bar, means, variances, weights) -> np.ndarray:
    """Responsibility-weighted whitened residuals, plain loops."""
    root = math.sqrt(alpha_bar)
    dens = []
    for w, mu, var in zip(weights, means, variances):
        d = w
        for zi, mi, vi in zip(z, mu, var):
            s = alpha_bar * vi + (1.0 - alpha_bar)
            d *= math.exp(-((zi - root * mi) ** 2) / (2 * s)) / math.sqrt(
                2 * math.pi * s
            )
        dens.append(d)
    total = sum(dens)
    out = np.zeros(len(z))
    for d, mu, var in zip(dens, means, variances):
        for j in range(len(z)):
            s = alpha_bar * var[j] + (1.0 - alpha_bar)
            out[j] += (d / total) * (z[j] - root * mu[j]) / s
    return math.sqrt(1.0 - alpha_bar) * out


def fd_gradient(fn, z, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function."""
    z = np.asarray(z, dtype=np.float64)
    grad = np.empty_like(z)
    for i in range(z.size):
        plus = z.copy()
        minus = z.copy()
        plus[i] += h
        minus[i] -= h
        grad[i] = (fn(plus) - fn(minus)) / (2.0 * h)
    return grad


# ---------------------------------------------------------------------------
# Closed-form flow for a single diagonal Gaussian


def affine_flow_state(z_0, mean, var, alpha_bar) -> np.ndarray:
    """Exact deterministic-flow state at signal level alpha_bar.

    For data N(mean, var) the flow from a clean sample follows
        z(ab) = sqrt(ab) mean + (z_0 - mean) sqrt((ab var + 1 - ab) / var)
    elementwise, which the one-step recurrences discretize.
    """
    z_0 = np.asarray(z_0, dtype=np.float64)
    mean = np.asarray(mean, dtype=np.float64)
    var = np.asarray(var, dtype=np.float64)
    smear = alpha_bar * var + (1.0 - alpha_bar)
    return np.sqrt(alpha_bar) * mean + (z_0 - mean) * np.sqrt(smear / var)


# ---------------------------------------------------------------------------
# Straight-line pipeline loops (own step formula, own epsilon)


def _step(z, ab_cur, ab_next, eps):
    g_cur = math.sqrt(1.0 / ab_cur - 1.0)
    g_next = math.sqrt(1.0 / ab_next - 1.0)
    return math.sqrt(ab_next / ab_cur) * z + math.sqrt(ab_next) * (
        g_next - g_cur
    ) * eps


def loop_invert(z, alpha_bar, t_from, t_to, means, variances, weights):
    """Invert upward evaluating eps at the pre-step state and level."""
    z = np.asarray(z, dtype=np.float64).copy()
    for t in range(t_from + 1, t_to + 1):
        eps = naive_epsilon(z, alpha_bar[t - 1], means, variances, weights)
        z = _step(z, alpha_bar[t - 1], alpha_bar[t], eps)
    return z


def loop_denoise(z, alpha_bar, t_from, t_to, means, variances, weights,
                 null_weights=None, omega: float = 1.0):
    """Denoise downward, optionally with guidance against null_weights."""
    z = np.asarray(z, dtype=np.float64).copy()
    for t in range(t_from, t_to, -1):
        eps = naive_epsilon(z, alpha_bar[t], means, variances, weights)
        if omega != 1.0:
            eps_null = naive_epsilon(z, alpha_bar[t], means, variances,
                                     null_weights)
            eps = omega * eps + (1.0 - omega) * eps_null
        z = _step(z, alpha_bar[t], alpha_bar[t - 1], eps)
    return z


def loop_zigzag(z, alpha_bar, p, K, means, variances, w_src, w_tgt):
    """K alternating denoise/invert unions at level p, plain conditional."""
    z = np.asarray(z, dtype=np.float64).copy()
    for _ in range(K):
        eps = naive_epsilon(z, alpha_bar[p], means, variances, w_tgt)
        z = _step(z, alpha_bar[p], alpha_bar[p - 1], eps)
        eps = naive_epsilon(z, alpha_bar[p - 1], means, variances, w_src)
        z = _step(z, alpha_bar[p - 1], alpha_bar[p], eps)
    return z


def loop_probe(z, alpha_bar, t, means, variances, w_src, w_tgt, w_null):
    """Three one-step denoisings; distances from the null anchor."""
    outs = []
    for w in (w_src, w_tgt, w_null):
        eps = naive_epsilon(z, alpha_bar[t], means, variances, w)
        outs.append(_step(np.asarray(z, dtype=np.float64), alpha_bar[t],
                          alpha_bar[t - 1], eps))
    d_src, d_tgt, anchor = outs
    return (float(np.linalg.norm(d_src - anchor)),
            float(np.linalg.norm(d_tgt - anchor)))


def brute_force_pivot(z_0, alpha_bar, grid_levels, means, variances,
                      w_src, w_tgt, w_null):
    """Probe every grid level along the inversion; minimum satisfying level.

    Returns (p, degenerate). The inversion between probes uses the plain
    source-conditional estimate.
    """
    T = len(alpha_bar) - 1
    z = np.asarray(z_0, dtype=np.float64).copy()
    level = 0
    satisfying = []
    for cand in grid_levels:
        z = loop_invert(z, alpha_bar, level, cand, means, variances, w_src)
        level = cand
        resp_src, resp_tgt = loop_probe(z, alpha_bar, cand, means, variances,
                                        w_src, w_tgt, w_null)
        if resp_tgt > resp_src:
            satisfying.append(cand)
    if satisfying:
        return min(satisfying), False
    return T, True
