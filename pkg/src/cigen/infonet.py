"""Neural mutual-information estimation (Donsker-Varadhan lower bound).

A small scalar-output network T(x, x~) is trained to maximize
mean T(paired) - log mean exp T(marginal), where the marginal sample
pairs each x_i with a permuted x~.  The value of the trained objective
is a lower-bound estimate of MI(X, X~) in nats.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import AdamState, Mlp, adam_step, as_matrix

LOGEXP_CLAMP = 50.0


class DivergedError(RuntimeError):
    """Objective became non-finite during optimization."""


@dataclass
class MiEstimate:
    value: float
    saturated: bool  # clamp was hit; true value may exceed `value`


@dataclass
class InfoNet:
    """Witness network plus its optimizer state."""

    network: Mlp
    adam: AdamState = field(default_factory=lambda: AdamState(learning_rate=1e-3))
    inner_steps: int = 5

    @classmethod
    def create(cls, d_x, hidden=32, seed=0, learning_rate=1e-3, inner_steps=5):
        net = Mlp([2 * d_x, hidden, 1], hidden_activation="tanh",
                  output_activation="identity", seed=seed)
        return cls(network=net, adam=AdamState(learning_rate=learning_rate),
                   inner_steps=inner_steps)


def _logmeanexp(t):
    """log(mean(exp(t))) with max-subtraction; returns (value, saturated)."""
    t = np.asarray(t, dtype=np.float64)
    saturated = bool(np.any(t > LOGEXP_CLAMP))
    t = np.minimum(t, LOGEXP_CLAMP)
    m = t.max()
    return float(m + np.log(np.mean(np.exp(t - m)))), saturated


def dv_objective(info, paired, marginal):
    """Donsker-Varadhan objective mean T(paired) - log mean exp T(marginal)."""
    paired = as_matrix(paired, "paired")
    marginal = as_matrix(marginal, "marginal")
    if paired.shape[0] < 2:
        raise ValueError("need at least 2 rows")
    t_pair = info.network.forward(paired)[:, 0]
    t_marg = info.network.forward(marginal)[:, 0]
    lme, _ = _logmeanexp(t_marg)
    return float(t_pair.mean() - lme)


def dv_step(info, paired, marginal):
    """One ascent step on the DV objective.  Returns (value, saturated)."""
    n = paired.shape[0]
    t_pair, cache_p = info.network.forward_cached(paired)
    t_marg, cache_m = info.network.forward_cached(marginal)
    lme, saturated = _logmeanexp(t_marg[:, 0])
    value = float(t_pair[:, 0].mean() - lme)
    if not np.isfinite(value):
        raise DivergedError("DV objective is not finite")
    # d/dT of mean(T_pair): 1/n each; of log-mean-exp: softmax weights
    up_pair = np.full((n, 1), 1.0 / n)
    clamped = np.minimum(t_marg[:, 0], LOGEXP_CLAMP)
    soft = np.exp(clamped - lme) / n
    soft[t_marg[:, 0] > LOGEXP_CLAMP] = 0.0  # clamp region has zero slope
    up_marg = -soft[:, None]
    g_pair, _ = info.network.backward(cache_p, up_pair)
    g_marg, _ = info.network.backward(cache_m, up_marg)
    grads = [-(a + b) for a, b in zip(g_pair, g_marg)]  # ascend
    adam_step(info.adam, info.network.parameters(), grads)
    return value, saturated


def build_pairs(x, x_tilde, rng):
    """Paired rows (x_i, x~_i) and marginal rows (x_i, x~_pi(i))."""
    x = as_matrix(x, "x")
    x_tilde = as_matrix(x_tilde, "x_tilde")
    if x.shape[0] != x_tilde.shape[0]:
        raise ValueError("row counts differ")
    perm = rng.permutation(x.shape[0])
    return np.hstack([x, x_tilde]), np.hstack([x, x_tilde[perm]])


def marginal_gradient_wrt_x_tilde(info, x, x_tilde, rng):
    """Gradient of the DV objective with respect to the x~ block.

    Used by the adversarial trainer: the generator descends
    lambda * (MI estimate), holding the witness T fixed.
    Returns (value, grad) with grad shaped like x_tilde.
    """
    x = as_matrix(x, "x")
    x_tilde = as_matrix(x_tilde, "x_tilde")
    n, d_x = x_tilde.shape
    perm = rng.permutation(n)
    paired = np.hstack([x, x_tilde])
    marginal = np.hstack([x, x_tilde[perm]])
    t_pair, cache_p = info.network.forward_cached(paired)
    t_marg, cache_m = info.network.forward_cached(marginal)
    lme, _ = _logmeanexp(t_marg[:, 0])
    value = float(t_pair[:, 0].mean() - lme)
    up_pair = np.full((n, 1), 1.0 / n)
    clamped = np.minimum(t_marg[:, 0], LOGEXP_CLAMP)
    soft = np.exp(clamped - lme) / n
    soft[t_marg[:, 0] > LOGEXP_CLAMP] = 0.0
    _, din_pair = info.network.backward(cache_p, up_pair)
    _, din_marg = info.network.backward(cache_m, -soft[:, None])
    grad = din_pair[:, d_x:].copy()
    # x~_i appears in marginal row perm^{-1}(i); scatter the block back
    grad[perm] += din_marg[:, d_x:]
    return value, grad


def fit_and_estimate(x, x_tilde, steps=2000, seed=0, hidden=32,
                     learning_rate=1e-3):
    """Train a fresh witness for `steps` ascent steps; return MiEstimate.

    The marginal permutation is resampled every step.  The reported value
    is the objective at the final parameters on a fresh permutation.
    """
    x = as_matrix(x, "x")
    x_tilde = as_matrix(x_tilde, "x_tilde")
    rng = np.random.default_rng(seed)
    info = InfoNet.create(x.shape[1], hidden=hidden, seed=seed,
                          learning_rate=learning_rate)
    saturated = False
    for _ in range(steps):
        paired, marginal = build_pairs(x, x_tilde, rng)
        _, sat = dv_step(info, paired, marginal)
        saturated = saturated or sat
    paired, marginal = build_pairs(x, x_tilde, rng)
    value = dv_objective(info, paired, marginal)
    return MiEstimate(value=value, saturated=saturated)
