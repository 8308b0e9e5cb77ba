"""Conditional adversarial null sampler for X | Z.

A generator G(v, z) maps uniform noise plus the conditioning variables
to synthetic x, and an energy-style discriminator D(x, z) with output in
(0, 1) is trained to be low on real pairs and high on generated ones:

    L_D = mean D(real, z) + mean (1 - D(fake, z))      (minimized by D)
    L_G = mean D(fake, z) - mean D(real, z)            (minimized by G)

With lambda > 0 the generator additionally descends lambda times a
neural mutual-information estimate between real and generated x, which
pushes the null samples to be independent of the observed x values and
raises test power in high dimensions.

Training is staged.  The generator is first fit by plain regression of x
on (noise, z), which pins down the conditional mean, and the adversarial
game then refines the conditional shape with small learning rates.  A
held-out mean-fit guard reverts the generator to its last good snapshot
if the game drifts away from the data, which otherwise happens readily
when z is high dimensional.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import infonet
from .numerics import AdamState, Mlp, adam_step, as_matrix


class TrainingDivergedError(RuntimeError):
    def __init__(self, iteration, what):
        self.iteration = iteration
        super().__init__(f"non-finite {what} at training iteration {iteration}")


@dataclass(frozen=True)
class GanConfig:
    """Hyperparameters of the adversarial null sampler."""

    noise_dim: Optional[int] = None          # default max(d_x, 5)
    generator_hidden: Optional[tuple] = None  # default 2 x max(32, 2 d_z)
    discriminator_hidden: Optional[tuple] = None
    iterations: int = 1000
    batch_size: int = 64
    disc_steps_per_gen_step: int = 1
    pretrain_steps: int = 1000
    pretrain_lr: float = 1e-3
    generator_lr: float = 2e-5
    discriminator_lr: float = 1e-4
    guard_every: int = 25
    guard_tolerance: float = 0.25
    lam: float = 0.0                         # weight of the information term
    info_inner_steps: int = 5
    info_hidden: int = 32
    info_lr: float = 1e-3
    holdout_fraction: float = 0.2
    early_stop_window: int = 50
    early_stop_tol: float = 1e-4
    seed: int = 0

    def validate(self):
        if self.lam < 0.0:
            raise ValueError("lambda must be >= 0")
        if self.noise_dim is not None and self.noise_dim < 1:
            raise ValueError("noise_dim must be >= 1")
        if self.batch_size < 1 or self.iterations < 0:
            raise ValueError("bad batch_size/iterations")
        if self.pretrain_steps < 0 or self.guard_every < 1:
            raise ValueError("bad pretrain_steps/guard_every")
        if self.guard_tolerance < 0.0:
            raise ValueError("guard_tolerance must be >= 0")

    def resolved_noise_dim(self, d_x):
        return self.noise_dim if self.noise_dim is not None else max(d_x, 5)

    def resolved_hidden(self, given, d_z):
        if given is not None:
            return tuple(given)
        w = max(32, 2 * d_z)
        return (w, w)


@dataclass
class NullSampler:
    """Trained conditional generator plus training diagnostics.

    Inputs are standardized internally during training; `sample` maps
    noise and raw z back to the original x scale.
    """

    generator: Mlp
    noise_dim: int
    x_mean: np.ndarray
    x_std: np.ndarray
    z_mean: np.ndarray
    z_std: np.ndarray
    final_generator_loss: float = float("nan")
    final_discriminator_loss: float = float("nan")
    training_curve: list = field(default_factory=list)
    recalibration: Optional[np.ndarray] = None  # sorted PIT table or None
    linear_beta: Optional[np.ndarray] = None    # ridge baseline, or None

    @property
    def d_z(self):
        return self.z_mean.size

    @property
    def d_x(self):
        return self.x_mean.size

    def transform(self, v, z):
        """Deterministic generator map (noise, raw z) -> raw x."""
        v = as_matrix(v, "v")
        z = as_matrix(z, "z")
        if z.shape[1] != self.d_z:
            raise ValueError(f"z has {z.shape[1]} columns, trained on {self.d_z}")
        if v.shape[1] != self.noise_dim:
            raise ValueError("noise dimension mismatch")
        if self.recalibration is not None:
            # remap the quantile-driving noise coordinate through the
            # empirical PIT distribution of held-out data, so the
            # conditional law also covers residual model error
            table = self.recalibration
            v = v.copy()
            v[:, 0] = np.interp(v[:, 0],
                                np.linspace(0.0, 1.0, table.size), table)
        zs = (z - self.z_mean) / self.z_std
        out = self.generator.forward(np.hstack([v, zs]))
        if self.linear_beta is not None:
            out = out + zs @ self.linear_beta
        return out * self.x_std + self.x_mean

    def sample(self, z, m, seed=0):
        """Draw m independent null samples of x at the given z rows.

        Draw j is a pure function of (seed, j), so disjoint index ranges
        can be generated in parallel.
        """
        z = as_matrix(z, "z")
        draws = []
        for j in range(m):
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=seed, spawn_key=(j,)))
            v = rng.random((z.shape[0], self.noise_dim))
            draws.append(self.transform(v, z))
        return draws


def discriminator_loss(disc, real_x, fake_x, z):
    """mean D(real, z) + mean(1 - D(fake, z)); lies in (0, 2)."""
    real_x, fake_x, z = _check_rows(real_x, fake_x, z)
    d_real = disc.forward(np.hstack([real_x, z]))
    d_fake = disc.forward(np.hstack([fake_x, z]))
    return float(d_real.mean() + (1.0 - d_fake).mean())


def generator_adversarial_loss(disc, fake_x, real_x, z):
    """mean D(fake, z) - mean D(real, z); lies in (-1, 1)."""
    real_x, fake_x, z = _check_rows(real_x, fake_x, z)
    d_fake = disc.forward(np.hstack([fake_x, z]))
    d_real = disc.forward(np.hstack([real_x, z]))
    return float(d_fake.mean() - d_real.mean())


def _check_rows(real_x, fake_x, z):
    real_x = as_matrix(real_x, "real_x")
    fake_x = as_matrix(fake_x, "fake_x")
    z = as_matrix(z, "z")
    if not (real_x.shape[0] == fake_x.shape[0] == z.shape[0]):
        raise ValueError("row counts differ")
    return real_x, fake_x, z


def _standardize(a):
    mean = a.mean(axis=0)
    std = a.std(axis=0)
    std = np.where(std > 0.0, std, 1.0)
    return (a - mean) / std, mean, std


def _gcv_ridge(z, x):
    """Ridge coefficients of x on z with the penalty picked by GCV.

    The grid spans negligible to effectively infinite shrinkage, so when
    x carries no real z-signal the selected coefficients collapse toward
    zero instead of capturing spurious correlation.
    """
    n = z.shape[0]
    u, s, vt = np.linalg.svd(z, full_matrices=False)
    ux = u.T @ x
    best_gcv, best_lam = np.inf, np.inf
    for lam in np.logspace(-3.0, 8.0, 34):
        shrink = s ** 2 / (s ** 2 + lam)
        rss = float(np.sum((x - u @ (shrink[:, None] * ux)) ** 2))
        df = float(shrink.sum())
        if df >= n:
            continue
        gcv = n * rss / (n - df) ** 2
        if gcv < best_gcv:
            best_gcv, best_lam = gcv, lam
    coef = (s / (s ** 2 + best_lam))[:, None] * ux
    return vt.T @ coef


def train_null_sampler(x, z, config=None):
    """Adversarially fit the conditional law of x given z.

    Only (x, z) enter here by construction; the response never touches
    the sampler, which is what makes the downstream statistic sequence
    exchangeable under conditional independence.

    A held-out fifth of the rows is excluded from training and used to
    report the final adversarial losses (the type-I-excess diagnostic).
    """
    config = config or GanConfig()
    config.validate()
    x = as_matrix(x, "x")
    z = as_matrix(z, "z")
    if x.shape[0] != z.shape[0]:
        raise ValueError("x and z row counts differ")
    n, d_x = x.shape
    d_z = z.shape[1]
    if n < 2 * config.batch_size:
        raise ValueError(f"need n >= 2 * batch_size = {2 * config.batch_size}")

    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    noise_dim = config.resolved_noise_dim(d_x)
    g_hidden = config.resolved_hidden(config.generator_hidden, d_z)
    d_hidden = config.resolved_hidden(config.discriminator_hidden, d_z)

    xs, x_mean, x_std = _standardize(x)
    zs, z_mean, z_std = _standardize(z)

    n_hold = max(1, int(round(config.holdout_fraction * n)))
    perm = rng.permutation(n)
    hold_idx, train_idx = perm[:n_hold], perm[n_hold:]
    x_tr, z_tr = xs[train_idx], zs[train_idx]
    n_tr = train_idx.size

    # closed-form linear baseline; the networks model the conditional law
    # of the residuals around it
    beta = _gcv_ridge(z_tr, x_tr)
    x_tr = x_tr - z_tr @ beta

    gen = Mlp([noise_dim + d_z, *g_hidden, d_x], hidden_activation="tanh",
              output_activation="identity",
              seed=int(rng.integers(2**31)))
    # z enters the generator only through the adversarial phase; during
    # the warm start the conditional mean is the ridge baseline's job,
    # and zeroed first-layer z-columns (which see zero gradient while z
    # is masked) stop the network from memorizing high-dimensional noise
    gen.weights[0][noise_dim:, :] = 0.0
    disc = Mlp([d_x + d_z, *d_hidden, 1], hidden_activation="tanh",
               output_activation="sigmoid",
               seed=int(rng.integers(2**31)))
    adam_g = AdamState(learning_rate=config.generator_lr)
    adam_d = AdamState(learning_rate=config.discriminator_lr)
    info = None
    if config.lam > 0.0:
        info = infonet.InfoNet.create(
            d_x, hidden=config.info_hidden,
            seed=int(rng.integers(2**31)),
            learning_rate=config.info_lr,
            inner_steps=config.info_inner_steps)

    batch = min(config.batch_size, n_tr)
    curve = []

    def minibatch():
        idx = rng.integers(0, n_tr, size=batch)
        return x_tr[idx], z_tr[idx]

    # residual targets on the held-out rows, used for early stopping,
    # the adversarial-phase guard, final diagnostics and recalibration
    z_hold = zs[hold_idx]
    x_hold = xs[hold_idx] - z_hold @ beta
    v_pre = rng.random((hold_idx.size, noise_dim))
    z_masked = np.zeros_like(z_hold)

    def holdout_pinball():
        out = gen.forward(np.hstack([v_pre, z_masked]))
        resid = x_hold - out
        tau = v_pre[:, :1]
        return float(np.mean(resid * (tau - (resid < 0.0))))

    # --- supervised warm start: quantile regression of the residuals on
    # (noise, z).  The pinball level is the first noise coordinate, so
    # the fitted map pushes uniform noise through the conditional
    # quantile function and starts the game from a correctly dispersed
    # sampler, not a collapsed conditional-mean one.  Held-out early
    # stopping keeps the best snapshot rather than the last.
    adam_pre = AdamState(learning_rate=config.pretrain_lr)
    best_loss, best_gen = holdout_pinball(), gen.copy()
    for step in range(config.pretrain_steps):
        xb, _ = minibatch()
        v = rng.random((batch, noise_dim))
        out, cache = gen.forward_cached(
            np.hstack([v, np.zeros((batch, d_z))]))
        resid = xb - out
        if not np.isfinite(resid).all():
            raise TrainingDivergedError(step, "pretraining loss")
        tau = v[:, :1]
        upstream = (np.where(resid < 0.0, 1.0 - tau, -tau)) / resid.size
        grads_p, _ = gen.backward(cache, upstream)
        adam_step(adam_pre, gen.parameters(), grads_p)
        if (step + 1) % config.guard_every == 0:
            loss = holdout_pinball()
            if loss < best_loss:
                best_loss, best_gen = loss, gen.copy()
    gen = best_gen

    # held-out guard for the adversarial phase: the generator's mean
    # prediction (noise averaged out) must keep tracking the residuals,
    # otherwise the game has drifted off the data and the null samples
    # are biased
    guard_v = rng.random((8, hold_idx.size, noise_dim))

    def mean_fit_error():
        preds = np.mean([gen.forward(np.hstack([vv, z_hold]))
                         for vv in guard_v], axis=0)
        return float(((preds - x_hold) ** 2).mean())

    guard_limit = mean_fit_error() * (1.0 + config.guard_tolerance) + 1e-8
    snapshot = gen.copy()

    for it in range(config.iterations):
        # --- discriminator step(s)
        d_loss_val = None
        for _ in range(config.disc_steps_per_gen_step):
            xb, zb = minibatch()
            v = rng.random((batch, noise_dim))
            fake = gen.forward(np.hstack([v, zb]))
            real_in = np.hstack([xb, zb])
            fake_in = np.hstack([fake, zb])
            d_real, cache_r = disc.forward_cached(real_in)
            d_fake, cache_f = disc.forward_cached(fake_in)
            d_loss_val = float(d_real.mean() + (1.0 - d_fake).mean())
            if not np.isfinite(d_loss_val):
                raise TrainingDivergedError(it, "discriminator loss")
            g_r, _ = disc.backward(cache_r, np.full((batch, 1), 1.0 / batch))
            g_f, _ = disc.backward(cache_f, np.full((batch, 1), -1.0 / batch))
            adam_step(adam_d, disc.parameters(),
                      [a + b for a, b in zip(g_r, g_f)])

        # --- generator step
        xb, zb = minibatch()
        v = rng.random((batch, noise_dim))
        gen_in = np.hstack([v, zb])
        fake, cache_g = gen.forward_cached(gen_in)
        fake_in = np.hstack([fake, zb])
        d_fake, cache_f = disc.forward_cached(fake_in)
        d_real_b = disc.forward(np.hstack([xb, zb]))
        g_loss_val = float(d_fake.mean() - d_real_b.mean())
        if not np.isfinite(g_loss_val):
            raise TrainingDivergedError(it, "generator loss")
        _, din = disc.backward(cache_f, np.full((batch, 1), 1.0 / batch))
        fake_grad = din[:, :d_x]

        mi_val = 0.0
        if info is not None:
            # refresh the witness on this minibatch, then descend the
            # frozen-witness MI estimate
            for _ in range(config.info_inner_steps):
                paired, marginal = infonet.build_pairs(xb, fake, rng)
                infonet.dv_step(info, paired, marginal)
            mi_val, mi_grad = infonet.marginal_gradient_wrt_x_tilde(
                info, xb, fake, rng)
            fake_grad = fake_grad + config.lam * mi_grad
        grads_g, _ = gen.backward(cache_g, fake_grad)
        adam_step(adam_g, gen.parameters(), grads_g)

        curve.append((d_loss_val, g_loss_val, mi_val))
        if (it + 1) % config.guard_every == 0:
            if mean_fit_error() <= guard_limit:
                snapshot = gen.copy()
            else:
                gen = snapshot
                break
        if _should_stop(curve, config):
            break

    if mean_fit_error() > guard_limit:
        gen = snapshot

    recalibration = None
    if d_x == 1:
        # PIT of held-out x under the fitted conditional law; the sorted
        # values become the noise-recalibration table used by `transform`
        tau_grid = np.linspace(0.01, 0.99, 99)
        quantiles = np.empty((tau_grid.size, hold_idx.size))
        base_v = np.full((hold_idx.size, noise_dim), 0.5)
        for g, tau in enumerate(tau_grid):
            base_v[:, 0] = tau
            quantiles[g] = gen.forward(np.hstack([base_v, z_hold]))[:, 0]
        counts = (quantiles <= x_hold[:, 0][None, :]).sum(axis=0)
        pits = (counts + 0.5) / (tau_grid.size + 1.0)
        recalibration = np.concatenate([[0.0], np.sort(pits), [1.0]])

    # held-out diagnostics at the final parameters, fixed noise seed
    hold_rng = np.random.default_rng(np.random.SeedSequence(
        entropy=config.seed, spawn_key=(0xD1A6,)))
    v_h = hold_rng.random((hold_idx.size, noise_dim))
    fake_h = gen.forward(np.hstack([v_h, z_hold]))
    final_g = generator_adversarial_loss(disc, fake_h, x_hold, z_hold)
    final_d = discriminator_loss(disc, x_hold, fake_h, z_hold)

    return NullSampler(
        generator=gen, noise_dim=noise_dim,
        x_mean=x_mean, x_std=x_std, z_mean=z_mean, z_std=z_std,
        final_generator_loss=final_g, final_discriminator_loss=final_d,
        training_curve=curve, recalibration=recalibration,
        linear_beta=beta)


def _should_stop(curve, config):
    w = config.early_stop_window
    if len(curve) < 2 * w:
        return False
    d_losses = [c[0] for c in curve]
    recent = float(np.mean(d_losses[-w:]))
    previous = float(np.mean(d_losses[-2 * w:-w]))
    return abs(recent - previous) < config.early_stop_tol
