"""End-to-end acceptance suite.

Each test states one externally checkable property of the toolkit, at
the tolerance given in its docstring.  These are slow Monte Carlo runs;
the whole module takes on the order of an hour on one core.
"""

import json
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy.stats import kstest, norm

import test_stats as oracles
from cigen import cli
from cigen.bench import tv_lower_bound
from cigen.crt import crt_test
from cigen.engine import TestConfig, gcit_test, run_sampler_test
from cigen.gan import GanConfig
from cigen.infonet import fit_and_estimate
from cigen.numerics import AdamState, Mlp, adam_step, gradient_check
from cigen import stats
from cigen.synth import (OracleConditionalSampler, SynthSpec, generate,
                         generate_mi_controlled)

ALPHA = 0.05


def binom_se(p, n):
    return float(np.sqrt(p * (1.0 - p) / n))


def h0_setting1(n, d_z, seed):
    return generate(SynthSpec(setting="gaussian", hypothesis="H0",
                              n=n, d_z=d_z, seed=seed))


def h1_banded(setting, n, d_z, seed):
    spec = SynthSpec(setting=setting, hypothesis="H1", n=n, d_z=d_z,
                     mi_band=(0.05, 0.15), seed=seed)
    dataset, _ = generate_mi_controlled(spec)
    return dataset


def test_01_oracle_sampler_p_values_are_uniform():
    """True-sampler p-values: KS-uniform at level 0.01, rejection rate in
    0.05 +- 2 SE, 500 replications, n=500, d_z=10, M=500, under 10 min."""
    start = time.perf_counter()
    p_values = []
    for rep in range(500):
        dataset = h0_setting1(n=500, d_z=10, seed=10_000 + rep)
        sampler = OracleConditionalSampler(dataset)
        config = TestConfig(m=500, seed=20_000 + rep)
        result = run_sampler_test(dataset, config, sampler, method="gcit")
        p_values.append(result.p_value)
    elapsed = time.perf_counter() - start
    p_values = np.asarray(p_values)
    ks = kstest(p_values, "uniform")
    rate = float(np.mean(p_values <= ALPHA))
    half_width = 2.0 * binom_se(ALPHA, 500)
    assert ks.pvalue > 0.01, f"KS p-value {ks.pvalue:.4f}"
    assert abs(rate - ALPHA) <= half_width, f"rejection rate {rate:.4f}"
    assert elapsed < 600.0, f"took {elapsed:.0f}s"


@pytest.mark.parametrize("d_z", [5, 50])
def test_02_learned_sampler_type_i_control(d_z):
    """Learned sampler on H0 setting (1): type I error within
    0.05 + max(0.04, 2 SE) at R=200, and the generator-loss diagnostic
    covers the observed excess in at least 95% of replications."""
    replications = 200
    rejects, bounds = [], []
    for rep in range(replications):
        dataset = h0_setting1(n=500, d_z=d_z, seed=30_000 + 1000 * d_z + rep)
        result = gcit_test(dataset, TestConfig(
            m=500, seed=40_000 + 1000 * d_z + rep))
        rejects.append(result.reject)
        bounds.append(result.bound_diagnostic)
    type1 = float(np.mean(rejects))
    budget = ALPHA + max(0.04, 2.0 * binom_se(ALPHA, replications))
    excess = type1 - ALPHA
    covered = float(np.mean(np.asarray(bounds) >= excess))
    assert type1 <= budget, f"type I {type1:.3f} > {budget:.3f} at d_z={d_z}"
    assert covered >= 0.95, (
        f"diagnostic covers excess {excess:.3f} in only {covered:.0%}")


def _power_pair(setting, replications, seed_base):
    """Rejection rates of GCIT (lambda=10) and CRT on shared H1 data."""
    gcit_rejects, crt_rejects = [], []
    for rep in range(replications):
        dataset = h1_banded(setting, n=500, d_z=100, seed=seed_base + rep)
        config = TestConfig(m=500, gan=GanConfig(lam=10.0),
                            seed=seed_base + 500 + rep)
        gcit_rejects.append(gcit_test(dataset, config).reject)
        crt_rejects.append(crt_test(dataset, config).reject)
    return (float(np.mean(gcit_rejects)), float(np.mean(crt_rejects)),
            len(gcit_rejects))


@pytest.mark.parametrize("setting,seed_base,min_gap",
                         [("laplace", 50_000, 0.15),
                          ("arbitrary", 60_000, 0.0)])
def test_03_04_power_separation_at_high_dimension(setting, seed_base, min_gap):
    """H1, d_z=100, MI band [0.05, 0.15], R=100: GCIT power beats CRT
    power by at least min_gap and by at least two standard errors."""
    gcit_power, crt_power, r = _power_pair(setting, 100, seed_base)
    diff = gcit_power - crt_power
    se_diff = float(np.sqrt(binom_se(gcit_power, r) ** 2
                            + binom_se(crt_power, r) ** 2))
    assert diff > 0 and diff >= min_gap, (
        f"{setting}: gcit {gcit_power:.2f} vs crt {crt_power:.2f}")
    assert diff >= 2.0 * se_diff, f"{setting}: separation {diff:.2f}"


def test_05_lambda_tradeoff():
    """Setting (1), d_z=100: the information term does not cost power at
    lambda=10 and does not lower type I error at lambda=50 (2-SE each)."""
    replications = 60
    power = {}
    for lam in (0.0, 10.0):
        rejects = []
        for rep in range(replications):
            dataset = h1_banded("gaussian", n=500, d_z=100,
                                seed=70_000 + rep)
            config = TestConfig(m=500, gan=GanConfig(lam=lam),
                                seed=71_000 + int(lam) * 100_000 + rep)
            rejects.append(gcit_test(dataset, config).reject)
        power[lam] = float(np.mean(rejects))
    type1 = {}
    for lam in (0.0, 50.0):
        rejects = []
        for rep in range(replications):
            dataset = h0_setting1(n=500, d_z=100, seed=72_000 + rep)
            config = TestConfig(m=500, gan=GanConfig(lam=lam),
                                seed=73_000 + int(lam) * 100_000 + rep)
            rejects.append(gcit_test(dataset, config).reject)
        type1[lam] = float(np.mean(rejects))
    se_p = 2.0 * float(np.sqrt(binom_se(power[0.0], replications) ** 2
                               + binom_se(power[10.0], replications) ** 2))
    se_t = 2.0 * float(np.sqrt(binom_se(type1[0.0], replications) ** 2
                               + binom_se(type1[50.0], replications) ** 2))
    assert power[10.0] >= power[0.0] - se_p, f"power {power}"
    assert type1[50.0] >= type1[0.0] - se_t, f"type I {type1}"


def test_06_statistics_match_brute_force():
    """All five statistics agree with loop-based definitions to 1e-10 on
    100 random small instances; dcor is affine invariant; MMD(A,A)=0."""
    rng = np.random.default_rng(123)
    for trial in range(100):
        n = int(rng.integers(5, 9))
        x = rng.normal(size=n)
        y = rng.normal(size=n)
        assert stats.distance_correlation(x, y) == pytest.approx(
            oracles.bf_distance_correlation(x, y), abs=1e-10)
        assert abs(stats.pearson(x, y)) == pytest.approx(
            abs(np.corrcoef(x, y)[0, 1]), abs=1e-10)
        assert stats.mmd_dependence(x, y, seed=trial) == pytest.approx(
            oracles.bf_mmd_dependence(x, y, trial), abs=1e-10)
        assert stats.ks_independence(x, y) == pytest.approx(
            oracles.bf_ks_independence(x, y), abs=1e-10)
        assert stats.rdc(x, y, k=3, seed=trial) == pytest.approx(
            oracles.bf_rdc(x, y, 3, 1.0 / 6.0, trial), abs=1e-10)
    x = rng.normal(size=30)
    y = rng.normal(size=30)
    assert stats.distance_correlation(2.5 * x - 1.0, -0.5 * y + 3.0) == \
        pytest.approx(stats.distance_correlation(x, y), abs=1e-10)
    a = rng.normal(size=(20, 2))
    assert stats.rbf_mmd2(a, a, bandwidth=1.0) == 0.0


def test_07_numerics_gradients_and_adam():
    """Gradient checks below 1e-4 on all three architectures, 10 random
    draws each; Adam reaches |w| < 1e-2 on the quadratic in 500 steps."""
    rng = np.random.default_rng(7)
    architectures = [("tanh", "identity"), ("tanh", "sigmoid"),
                     ("relu", "identity")]

    def loss(out):
        return float((out ** 2).mean()), 2.0 * out / out.size

    for hidden, output in architectures:
        for draw in range(10):
            net = Mlp([4, 12, 6, 2], hidden_activation=hidden,
                      output_activation=output, seed=draw)
            x = rng.normal(size=(6, 4))
            report = gradient_check(net, loss, x, h=1e-5)
            assert report.max_relative_error < 1e-4, (hidden, output, draw)
    state = AdamState(learning_rate=0.01)
    w = np.array([1.0])
    for _ in range(500):
        adam_step(state, [w], [2.0 * w])
    assert abs(w[0]) < 1e-2


def test_08_mine_gaussian_oracle():
    """DV estimates within 0.1 nats of the closed form for bivariate
    Gaussians with rho in {0, 0.5, 0.8} at n=2000."""
    for rho, target, seed in ((0.0, 0.0, 1),
                              (0.5, 0.14384103622589045, 2),
                              (0.8, 0.5108256237659907, 3)):
        rng = np.random.default_rng(seed)
        a = rng.normal(size=2000)
        b = rho * a + np.sqrt(1.0 - rho ** 2) * rng.normal(size=2000)
        estimate = fit_and_estimate(a[:, None], b[:, None], seed=0)
        assert abs(estimate.value - target) < 0.1, (rho, estimate.value)


def test_09_tv_estimator_gaussian_shift():
    """Histogram TV lower bound for N(0,1) vs N(1,1), n=1e5, 100 bins,
    lands in [0.36, 0.40] (true value 2 Phi(1/2) - 1 = 0.3829)."""
    rng = np.random.default_rng(9)
    a = rng.normal(size=100_000)
    b = rng.normal(loc=1.0, size=100_000)
    estimate = tv_lower_bound(a, b, bins=100)
    assert 2.0 * norm.cdf(0.5) - 1.0 == pytest.approx(0.3829, abs=5e-5)
    assert 0.36 <= estimate <= 0.40, estimate


def test_10_crt_type_i_under_correct_specification():
    """CRT on H0 setting (1): type I within two standard errors of 0.05
    over 500 replications."""
    rejects = []
    for rep in range(500):
        dataset = h0_setting1(n=500, d_z=10, seed=80_000 + rep)
        result = crt_test(dataset, TestConfig(m=500, seed=81_000 + rep))
        rejects.append(result.reject)
    rate = float(np.mean(rejects))
    assert abs(rate - ALPHA) <= 2.0 * binom_se(ALPHA, 500), rate


def test_11_byte_identical_outputs(tmp_path, capsys):
    """Repeated test runs produce byte-identical JSON; a one-cell bench
    produces identical statistics regardless of worker count (the
    wall-clock runtime_s column is excluded, being time-dependent)."""
    data = tmp_path / "data.csv"
    cli.save_csv(h0_setting1(n=200, d_z=5, seed=11), data)
    outputs = []
    for _ in range(2):
        code = cli.main(["test", "--data", str(data), "--m", "50",
                         "--seed", "3"])
        assert code in (0, 10)
        outputs.append(capsys.readouterr().out)
    assert outputs[0] == outputs[1]

    plan = tmp_path / "plan.txt"
    plan.write_text("methods=gcit\noracle=1\nn=200\nreplications=4\n"
                    "m=50\ndz=5\nseed=7\n")
    tables = []
    for workers in ("1", "2"):
        out = tmp_path / f"bench_{workers}.csv"
        code = cli.main(["bench", "--plan", str(plan),
                         "--workers", workers, "--out", str(out)])
        assert code == 0
        capsys.readouterr()
        tables.append([line.rsplit(",", 1)[0]
                       for line in out.read_text().splitlines()])
    assert tables[0] == tables[1]
