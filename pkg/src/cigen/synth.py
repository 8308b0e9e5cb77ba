"""Post non-linear noise model generators for calibration and power studies.

Data follows
    H0:  X = f(A_f Z + e_f),   Y = g(A_g Z + e_g)
    H1:  X drawn directly,     Y = h(A_h Z + alpha X + e_h)
with f, g, h identity for the gaussian and laplace settings and sampled
from {cube, tanh, negative-exponential} for the arbitrary setting.
Mixing weights are Uniform[0,1] scaled by 1/sqrt(d_z) so the signal
variance of the Z-aggregate stays O(1) as d_z grows; without that the
mutual-information band used for fair power comparisons is unreachable
at high d_z.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .numerics import as_matrix

SETTINGS = ("gaussian", "laplace", "arbitrary")
HYPOTHESES = ("H0", "H1")
DEFAULT_NOISE_STD = float(np.sqrt(0.025))

_LINK_NAMES = ("cube", "tanh", "negexp")


class BandUnreachableError(RuntimeError):
    """Rejection sampling exhausted max_redraws without hitting the band."""

    def __init__(self, band, proxies):
        self.band = band
        self.proxies = proxies
        super().__init__(
            f"MI band {band} not reached in {len(proxies)} redraws; "
            f"last proxy values {proxies[-5:]}")


@dataclass(frozen=True)
class SynthSpec:
    setting: str = "gaussian"
    hypothesis: str = "H0"
    n: int = 500
    d_z: int = 10
    sigma: float = 1.0
    alpha_strength: float = 1.0
    noise_std: float = DEFAULT_NOISE_STD
    mi_band: Optional[tuple] = None
    max_redraws: int = 50
    seed: int = 0

    def validate(self):
        if self.setting not in SETTINGS:
            raise ValueError(f"unknown setting {self.setting!r}")
        if self.hypothesis not in HYPOTHESES:
            raise ValueError(f"unknown hypothesis {self.hypothesis!r}")
        if self.n < 1 or self.d_z < 1:
            raise ValueError("n and d_z must be positive")
        if not 0.0 <= self.alpha_strength <= 1.0:
            raise ValueError("alpha_strength must lie in [0, 1]")


@dataclass
class Dataset:
    """One testing problem: x (n, d_x), y (n, d_y), z (n, d_z)."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    provenance: object = None
    truth: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = as_matrix(self.x, "x")
        self.y = as_matrix(self.y, "y")
        self.z = as_matrix(self.z, "z")
        if not (self.x.shape[0] == self.y.shape[0] == self.z.shape[0]):
            raise ValueError("x, y, z row counts differ")

    @property
    def n(self):
        return self.x.shape[0]


def _apply_link(name, t):
    if name == "identity":
        return t
    if name == "cube":
        return t ** 3
    if name == "tanh":
        return np.tanh(t)
    if name == "negexp":
        # standardize the pre-activation so exp cannot overflow at high d_z
        s = t.std()
        return np.exp(-(t / s if s > 0 else t))
    raise ValueError(f"unknown link {name!r}")


def _draw_base(rng, size, setting, sigma):
    if setting == "laplace":
        # scale sigma/sqrt(2) gives variance sigma^2, matching the others
        return rng.laplace(scale=sigma / np.sqrt(2.0), size=size)
    return rng.normal(scale=sigma, size=size)


def generate(spec):
    """Draw one dataset according to `spec` (deterministic in spec.seed)."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n, d_z = spec.n, spec.d_z
    scale = 1.0 / np.sqrt(d_z)
    z = _draw_base(rng, (n, d_z), spec.setting, spec.sigma)
    if spec.setting == "arbitrary":
        links = [ _LINK_NAMES[i] for i in rng.integers(0, 3, size=3) ]
    else:
        links = ["identity", "identity", "identity"]
    f_name, g_name, h_name = links
    a_g = rng.uniform(0.0, 1.0, size=d_z) * scale
    a_h = rng.uniform(0.0, 1.0, size=d_z) * scale
    if spec.hypothesis == "H0":
        a_f = rng.uniform(0.0, 1.0, size=d_z) * scale
        x = _apply_link(f_name, z @ a_f + rng.normal(scale=spec.noise_std, size=n))
        y = _apply_link(g_name, z @ a_g + rng.normal(scale=spec.noise_std, size=n))
        truth = {"a_f": a_f, "f": f_name, "noise_std": spec.noise_std}
    else:
        alpha = spec.alpha_strength * rng.uniform(0.0, 1.0)
        x = _draw_base(rng, n, spec.setting, spec.sigma)
        y = _apply_link(h_name,
                        z @ a_h + alpha * x
                        + rng.normal(scale=spec.noise_std, size=n))
        truth = {"alpha": alpha, "a_h": a_h, "h": h_name,
                 "noise_std": spec.noise_std}
    return Dataset(x=x[:, None], y=y[:, None], z=z,
                   provenance=spec, truth=truth)


def gaussian_mi_proxy(x, y, return_saturated=False):
    """Gaussian-approximation mutual information -0.5 ln(1 - rho^2), nats.

    rho is the sample Pearson correlation; rho^2 is clipped just below 1.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.std() == 0.0 or y.std() == 0.0:
        raise ValueError("MI proxy undefined for constant input")
    rho2 = float(np.corrcoef(x, y)[0, 1]) ** 2
    saturated = rho2 > 1.0 - 1e-12
    rho2 = min(rho2, 1.0 - 1e-12)
    value = -0.5 * np.log1p(-rho2)
    if return_saturated:
        return value, saturated
    return value


def generate_mi_controlled(spec):
    """Redraw datasets until the MI proxy of (x, y) lands in spec.mi_band.

    Under H1 the dependence dial alpha_strength is bisected between
    redraws toward the band.  Returns (dataset, redraws).  Raises
    BandUnreachableError when max_redraws is exhausted.
    """
    spec.validate()
    if spec.mi_band is None or len(spec.mi_band) != 2:
        raise ValueError("spec.mi_band must be a (lo, hi) pair")
    if spec.max_redraws < 1:
        raise ValueError("max_redraws must be >= 1")
    lo_band, hi_band = spec.mi_band
    strength = spec.alpha_strength
    lo_s, hi_s = 0.0, 1.0
    proxies = []
    root = np.random.SeedSequence(spec.seed)
    for attempt in range(spec.max_redraws):
        draw_seed = np.random.SeedSequence(
            entropy=root.entropy, spawn_key=(attempt,)).generate_state(1)[0]
        attempt_spec = replace(spec, seed=int(draw_seed),
                               alpha_strength=strength)
        ds = generate(attempt_spec)
        proxy = gaussian_mi_proxy(ds.x, ds.y)
        proxies.append(proxy)
        if lo_band <= proxy <= hi_band:
            return ds, attempt
        if spec.hypothesis == "H1":
            if proxy < lo_band:
                lo_s = strength
            else:
                hi_s = strength
            strength = 0.5 * (lo_s + hi_s)
    raise BandUnreachableError(spec.mi_band, proxies)


class OracleConditionalSampler:
    """True conditional sampler for H0 setting-(1)/(2) data.

    Knows the generating coefficients of X | Z and redraws the noise,
    giving exact exchangeability; used to test p-value validity.
    """

    final_generator_loss = 0.0
    final_discriminator_loss = 0.0

    def __init__(self, dataset):
        truth = dataset.truth
        if "a_f" not in truth:
            raise ValueError("dataset truth does not describe X | Z")
        if truth["f"] != "identity":
            raise ValueError("oracle sampling only supported for identity link")
        self.a_f = truth["a_f"]
        self.noise_std = truth["noise_std"]

    def sample(self, z, m, seed=0):
        z = as_matrix(z, "z")
        mean = z @ self.a_f
        out = []
        for j in range(m):
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=seed, spawn_key=(j,)))
            out.append((mean + rng.normal(scale=self.noise_std,
                                          size=z.shape[0]))[:, None])
        return out
