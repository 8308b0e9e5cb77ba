"""Dependence statistics between two samples.

Each statistic is a pure function of the two samples (and, for the
randomized ones, an explicit seed that must be fixed before looking at
the data).  Larger values always mean stronger dependence; signed
statistics are folded by absolute value in `evaluate`.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist
from scipy.stats import rankdata

from .numerics import as_matrix

STAT_KINDS = ("dcor", "pearson", "mmd", "ks", "rdc")


class DegenerateInputError(ValueError):
    """Raised when a statistic is undefined for constant input."""


def _column(a, name):
    a = as_matrix(a, name)
    if a.shape[1] != 1:
        raise ValueError(f"{name} must be univariate, got {a.shape[1]} columns")
    return a[:, 0]


# ---------------------------------------------------------------------------
# distance correlation

def centered_distances(a):
    """Double-centered Euclidean distance matrix of a sample (n, d)."""
    a = as_matrix(a)
    d = cdist(a, a)
    row = d.mean(axis=0)
    return d - row[None, :] - row[:, None] + d.mean()


def distance_correlation(x, y, y_centered=None):
    """Distance correlation in [0, 1] (V-statistic convention).

    `y_centered` lets callers reuse `centered_distances(y)` when scoring
    many x-samples against a fixed y.  Constant input gives 0.
    """
    x = as_matrix(x, "x")
    n = x.shape[0]
    if n < 2:
        raise ValueError("need at least 2 rows")
    B = centered_distances(y) if y_centered is None else y_centered
    if B.shape != (n, n):
        raise ValueError("x and y row counts differ")
    # B is doubly centered, so <A, B> = <D_x, B> without centering D_x;
    # dvar_x expands as mean(D^2) - 2 mean(row^2) + mean(D)^2
    d = cdist(x, x)
    row = d.mean(axis=0)
    grand = row.mean()
    dcov2 = np.vdot(d, B) / (n * n)
    dvar_x = np.vdot(d, d) / (n * n) - 2.0 * np.mean(row * row) + grand * grand
    dvar_y = np.vdot(B, B) / (n * n)
    denom = dvar_x * dvar_y
    if denom <= 0.0:
        return 0.0
    return float(np.sqrt(max(dcov2, 0.0) / np.sqrt(denom)))


# ---------------------------------------------------------------------------
# Pearson

def pearson(x, y):
    """Sample Pearson correlation of two univariate samples, in [-1, 1]."""
    x = _column(x, "x")
    y = _column(y, "y")
    if x.std() == 0.0 or y.std() == 0.0:
        raise DegenerateInputError("pearson undefined for constant input")
    return float(np.corrcoef(x, y)[0, 1])


# ---------------------------------------------------------------------------
# MMD-based dependence

def rbf_mmd2(a, b, bandwidth):
    """Biased (V-statistic) squared MMD with an RBF kernel."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    h2 = 2.0 * bandwidth ** 2
    kaa = np.exp(-cdist(a, a, "sqeuclidean") / h2)
    kbb = np.exp(-cdist(b, b, "sqeuclidean") / h2)
    kab = np.exp(-cdist(a, b, "sqeuclidean") / h2)
    return float(kaa.mean() + kbb.mean() - 2.0 * kab.mean())


def median_bandwidth(sample):
    """Median of all pairwise Euclidean distances; 1.0 if they are all 0."""
    d = cdist(sample, sample)
    iu = np.triu_indices(sample.shape[0], k=1)
    med = float(np.median(d[iu])) if iu[0].size else 0.0
    return med if med > 0.0 else 1.0


def mmd_dependence(x, y, seed=0):
    """Squared MMD between the paired sample (x_i, y_i) and a decoupled
    sample (x_i, y_sigma(i)) with one seeded permutation sigma.

    Bandwidth is the median pairwise distance over the pooled joint sample.
    """
    x = as_matrix(x, "x")
    y = as_matrix(y, "y")
    n = x.shape[0]
    if y.shape[0] != n:
        raise ValueError("x and y row counts differ")
    if n < 4:
        raise ValueError("need at least 4 rows")
    sigma_perm = np.random.default_rng(seed).permutation(n)
    paired = np.hstack([x, y])
    decoupled = np.hstack([x, y[sigma_perm]])
    bw = median_bandwidth(np.vstack([paired, decoupled]))
    return rbf_mmd2(paired, decoupled, bw)


# ---------------------------------------------------------------------------
# empirical-CDF independence distance

def ks_independence(x, y):
    """sup over the sample grid of |F_xy(s, t) - F_x(s) F_y(t)|.

    Evaluated at every (x_i, y_j) pair of observed values.  Constant input
    in either coordinate yields exactly 0.
    """
    x = _column(x, "x")
    y = _column(y, "y")
    n = x.size
    if n < 2:
        raise ValueError("need at least 2 rows")
    ind_x = (x[:, None] <= x[None, :]).astype(np.float64)  # [k, i]
    ind_y = (y[:, None] <= y[None, :]).astype(np.float64)  # [k, j]
    joint = ind_x.T @ ind_y / n          # [i, j]
    fx = ind_x.mean(axis=0)
    fy = ind_y.mean(axis=0)
    return float(np.abs(joint - fx[:, None] * fy[None, :]).max())


# ---------------------------------------------------------------------------
# randomized dependence coefficient

def rdc(x, y, k=5, s=1.0 / 6.0, seed=0):
    """Randomized dependence coefficient in [0, 1].

    Rank-transform each sample to [0, 1], project through k random affine
    maps with N(0, s^2) weights, apply sine features, and return the
    largest canonical correlation between the two feature blocks.
    """
    x = as_matrix(x, "x")
    y = as_matrix(y, "y")
    n = x.shape[0]
    if y.shape[0] != n:
        raise ValueError("x and y row counts differ")
    if n <= k:
        raise ValueError(f"need n > k, got n={n}, k={k}")
    rng = np.random.default_rng(seed)
    fx = _rdc_features(x, k, s, rng)
    fy = _rdc_features(y, k, s, rng)
    return _max_canonical_correlation(fx, fy)


def _rdc_features(a, k, s, rng):
    ranks = np.column_stack([rankdata(col) / len(col) for col in a.T])
    aug = np.hstack([ranks, np.ones((a.shape[0], 1))])
    w = rng.normal(scale=s, size=(aug.shape[1], k))
    return np.sin(aug @ w)


def _max_canonical_correlation(fx, fy, reg=1e-6):
    fx = fx - fx.mean(axis=0)
    fy = fy - fy.mean(axis=0)
    n = fx.shape[0]
    cxx = fx.T @ fx / n + reg * np.eye(fx.shape[1])
    cyy = fy.T @ fy / n + reg * np.eye(fy.shape[1])
    cxy = fx.T @ fy / n
    sol_x = np.linalg.solve(cxx, cxy)
    sol_y = np.linalg.solve(cyy, cxy.T)
    eigvals = np.linalg.eigvals(sol_x @ sol_y)
    rho2 = float(np.max(eigvals.real))
    return float(np.sqrt(min(max(rho2, 0.0), 1.0)))


# ---------------------------------------------------------------------------
# dispatch used by the test engines

def _is_constant(a):
    a = as_matrix(a)
    return bool(np.all(a == a[0]))


def evaluate(kind, x, y, seed=0, y_centered=None):
    """Evaluate one statistic, oriented so that larger is more extreme.

    Returns (value, degenerate).  Constant inputs yield (0.0, True) instead
    of raising, so a single degenerate null draw cannot abort a test.
    """
    if kind not in STAT_KINDS:
        raise ValueError(f"unknown statistic {kind!r}")
    if _is_constant(x) or _is_constant(y):
        return 0.0, True
    if kind == "dcor":
        return distance_correlation(x, y, y_centered=y_centered), False
    if kind == "pearson":
        return abs(pearson(x, y)), False
    if kind == "mmd":
        return mmd_dependence(x, y, seed=seed), False
    if kind == "ks":
        return ks_independence(x, y), False
    return rdc(x, y, seed=seed), False
