import math

import numpy as np
import pytest
from scipy import optimize, stats as sps

from gbpf import (
    Continuous1D,
    CovarianceFunction,
    GbpModel,
    GbpfError,
    IntervalUnion,
    ProcessSpec,
    indicator_cov,
    joint_cf,
    joint_cf_closed_form,
    joint_density_weight,
    moment_cov,
    preset,
    simulate_process,
    theoretical_cov,
    uniform_process,
)
from gbpf.stats import autocovariance, cross_covariance, empirical_cf, ks_distance, replicate_lag_stats

from conftest import rng_for

A_EXP = -math.log(0.3)


@pytest.fixture(scope="module")
def dyadic_uniform_spec():
    cov = CovarianceFunction.tabulated({1: 0.05, 2: 0.025, 3: 0.0125})
    gbp = GbpModel.create(0.5, cov)
    return ProcessSpec(Continuous1D.uniform(), IntervalUnion([(0.0, 0.5)]), gbp, n=400)


def test_spec_rejects_mismatched_p():
    cov = CovarianceFunction.tabulated({1: 0.05, 2: 0.025, 3: 0.0125})
    gbp = GbpModel.create(0.5, cov)
    with pytest.raises(GbpfError):
        ProcessSpec(Continuous1D.uniform(), IntervalUnion([(0.0, 0.4)]), gbp)


def test_uniform_factor_grid():
    for a in np.arange(0.1, 0.95, 0.1):
        spec = uniform_process(float(a))
        assert abs(theoretical_cov(spec)[0, 0] - 0.25) <= 1e-12


def test_exponential_factor():
    spec = preset("exp-lrd-6.1").spec
    expected = A_EXP**2 / (1 - math.exp(-A_EXP)) ** 2
    assert theoretical_cov(spec)[0, 0] == pytest.approx(expected, abs=1e-9)
    assert expected == pytest.approx(2.958266, abs=1e-6)


def test_gaussian_factor():
    spec = preset("gauss-lrd-6.1").spec
    z = sps.norm.ppf(0.7)
    expected = (sps.norm.pdf(z) / 0.21) ** 2
    got = theoretical_cov(spec)[0, 0]
    assert got == pytest.approx(expected, abs=1e-9)
    assert 0.12 * got == pytest.approx(0.329, abs=5e-4)


def test_uniform2d_matrix():
    bundle = preset("uniform2d-5.9ii")
    got = theoretical_cov(bundle.spec)
    assert np.allclose(got, bundle.reference["cov_matrix"], atol=1e-9)


def test_moment_cov_q1_equals_theoretical(dyadic_uniform_spec):
    assert np.allclose(moment_cov(dyadic_uniform_spec, 1),
                       theoretical_cov(dyadic_uniform_spec), atol=1e-12)


def test_moment_cov_uniform_q2(dyadic_uniform_spec):
    got = moment_cov(dyadic_uniform_spec, 2)[0, 0]
    assert got == pytest.approx(0.25, abs=1e-10)


def test_moment_cov_balanced_square_is_zero():
    # Symmetric two-interval set (a, b) mirrored, solved so that both mass
    # and the second moment split proportionally; the q=2 coefficient
    # vanishes.
    p = 0.5

    def second_moment_gap(a):
        # b keeps the mirrored window at mass p; return the x^2 imbalance.
        b = sps.norm.ppf(sps.norm.cdf(a) + p / 2)
        m2 = 2 * ((sps.norm.cdf(b) - b * sps.norm.pdf(b))
                  - (sps.norm.cdf(a) - a * sps.norm.pdf(a)))
        return m2 - p

    a = optimize.brentq(second_moment_gap, 0.05, 1.0, xtol=1e-13)
    b = sps.norm.ppf(sps.norm.cdf(a) + p / 2)
    A = IntervalUnion([(-b, -a), (a, b)])
    cov = CovarianceFunction.exponential(0.4 * p * (1 - p), math.log(2.0))
    spec = ProcessSpec(Continuous1D.normal(), A, GbpModel.create(p, cov))
    assert moment_cov(spec, 2)[0, 0] == pytest.approx(0.0, abs=1e-9)
    # q=1 coefficient stays zero too (the set is symmetric).
    assert theoretical_cov(spec)[0, 0] == pytest.approx(0.0, abs=1e-9)


def test_indicator_cov_extremes(dyadic_uniform_spec):
    spec = dyadic_uniform_spec
    A = spec.region
    Ac = IntervalUnion([(0.5, 1.0)])
    assert indicator_cov(spec, A, A) == pytest.approx(1.0, abs=1e-12)
    assert indicator_cov(spec, A, Ac) == pytest.approx(-1.0, abs=1e-12)
    assert indicator_cov(spec, Ac, Ac) == pytest.approx(1.0, abs=1e-12)
    # A set splitting its mass proportionally kills the covariance.
    whole = IntervalUnion([(0.0, 1.0)])
    assert indicator_cov(spec, whole, A) == pytest.approx(0.0, abs=1e-12)


def test_indicator_process_law(dyadic_uniform_spec):
    rng = rng_for("indicator-law")
    spec = dyadic_uniform_spec
    A = spec.region
    Ac = IntervalUnion([(0.5, 1.0)])
    reps, n, lag = 20, 20_000, 1
    cases = {"AA": (A, A), "AAc": (A, Ac), "AcAc": (Ac, Ac)}
    targets = {k: indicator_cov(spec, *v) * spec.gbp.cov(lag) for k, v in cases.items()}
    stats = {k: [] for k in cases}
    for _ in range(reps):
        path = simulate_process(spec, rng, n=n)
        x = path.values[:, 0]
        for k, (B1, B2) in cases.items():
            ia = B1.contains(x).astype(float)
            ib = B2.contains(x).astype(float)
            stats[k].append(cross_covariance(ia, ib, lag).estimates[lag])
    for k in cases:
        arr = np.asarray(stats[k])
        se = arr.std(ddof=1) / math.sqrt(reps)
        assert abs(arr.mean() - targets[k]) <= 4 * se + 1e-12, k


def test_joint_cf_marginal_reduction(dyadic_uniform_spec):
    spec = dyadic_uniform_spec
    th = 0.8
    got = joint_cf(spec, [th, 0.0], [3, 7])
    want = joint_cf(spec, [th], [3])
    assert abs(got - want) <= 1e-12
    # And the one-site CF is the marginal CF.
    exact = complex(sps.uniform.expect(lambda x: math.cos(th * x)),
                    sps.uniform.expect(lambda x: math.sin(th * x)))
    assert abs(want - exact) <= 1e-9


@pytest.mark.parametrize("k", [2, 3, 4])
def test_joint_cf_matches_closed_form(k, dyadic_uniform_spec):
    rng = rng_for(f"cf-{k}")
    spec = dyadic_uniform_spec
    indices = sorted(rng.choice(np.arange(1, 20), size=k, replace=False).tolist())
    for _ in range(50):
        thetas = rng.normal(scale=2.0, size=k).tolist()
        a = joint_cf(spec, thetas, indices)
        b = joint_cf_closed_form(spec, thetas, indices)
        assert abs(a - b) <= 1e-9, (indices, thetas, a, b)


def test_joint_cf_independence_limit():
    # Vanishing covariance factorizes the joint CF.
    cov = CovarianceFunction.tabulated({1: 1e-13, 2: 0.5e-13, 3: 0.25e-13})
    gbp = GbpModel.create(0.5, cov)
    spec = ProcessSpec(Continuous1D.uniform(), IntervalUnion([(0.0, 0.5)]), gbp)
    th = [0.9, -1.3]
    got = joint_cf(spec, th, [1, 2])
    parts = [joint_cf(spec, [t], [1]) for t in th]
    assert abs(got - parts[0] * parts[1]) <= 1e-9


def test_joint_cf_against_monte_carlo(dyadic_uniform_spec):
    rng = rng_for("cf-mc")
    spec = dyadic_uniform_spec
    th = [0.7, -0.5]
    idx = [1, 3]
    exact = joint_cf(spec, th, idx)
    n_paths = 4000
    acc = 0j
    for _ in range(n_paths):
        x = simulate_process(spec, rng, n=3).values[:, 0]
        acc += np.exp(1j * (th[0] * x[idx[0] - 1] + th[1] * x[idx[1] - 1]))
    est = acc / n_paths
    assert abs(exact - est) <= 5 / math.sqrt(n_paths)


def test_joint_density_weights(dyadic_uniform_spec):
    spec = dyadic_uniform_spec
    p = spec.p
    c1 = spec.gbp.cov(1)
    assert joint_density_weight(spec, [1, 1], [4, 5]) == pytest.approx(
        1 + c1 / p**2, abs=1e-12)
    assert joint_density_weight(spec, [1, 0], [4, 5]) == pytest.approx(
        1 - c1 / (p * (1 - p)), abs=1e-12)
    # Mass-weighted average over all patterns is exactly one.
    import itertools

    total = 0.0
    idx = [2, 5, 9]
    for labels in itertools.product((0, 1), repeat=3):
        w = joint_density_weight(spec, list(labels), idx)
        mass = np.prod([p if b else 1 - p for b in labels])
        total += w * mass
    assert total == pytest.approx(1.0, abs=1e-10)


def test_simulate_respects_cells(dyadic_uniform_spec):
    rng = rng_for("cells")
    path = simulate_process(dyadic_uniform_spec, rng, n=1000)
    x = path.values[:, 0]
    bits = path.latent.bits.astype(bool)
    assert np.all(x[bits] <= 0.5)
    assert np.all(x[~bits] >= 0.5)


def test_simulate_marginal_ks_long_path():
    # Short-memory spec: a single long path passes the strict KS gate.
    spec = uniform_process(0.5, CovarianceFunction.exponential(0.02, math.log(2.0)))
    rng = rng_for("marginal-ks")
    path = simulate_process(spec, rng, n=200_000)
    res = ks_distance(path.values[:, 0], sps.uniform.cdf)
    assert res.passes(0.01), res.statistic


def test_empirical_covariance_matches_theory_light():
    # Light version of the long-memory reproduction (full scale lives in
    # the acceptance suite).
    bundle = preset("exp-lrd-6.1")
    spec = bundle.spec
    rng = rng_for("light-cov")
    reps, n = 10, 20_000
    spec.gbp.gap_tables(n)
    stats = []
    for _ in range(reps):
        path = simulate_process(spec, rng, n=n)
        stats.append(autocovariance(path.values[:, 0], 5))
    agg = replicate_lag_stats(stats)
    factor = theoretical_cov(spec)[0, 0]
    for k in (1, 5):
        target = factor * spec.gbp.cov(k)
        assert abs(agg.estimates[k] - target) <= 4 * agg.se[k], (k, agg.estimates[k], target)


def test_bivariate_exp_cross_covariance():
    bundle = preset("bivariate-exp-6.2")
    spec = bundle.spec
    rng = rng_for("bivar-exp")
    dmat = theoretical_cov(spec)
    reps, n, lag = 16, 4000, 2
    vals = []
    for _ in range(reps):
        path = simulate_process(spec, rng, n=n)
        vals.append(cross_covariance(path.values[:, 0], path.values[:, 1], lag).estimates[lag])
    arr = np.asarray(vals)
    se = arr.std(ddof=1) / math.sqrt(reps)
    target = dmat[0, 1] * spec.gbp.cov(lag)
    assert abs(arr.mean() - target) <= 4 * se


def test_rank_one_structure(dyadic_uniform_spec):
    mats = [
        theoretical_cov(dyadic_uniform_spec),
        theoretical_cov(preset("uniform2d-5.9ii").spec),
        theoretical_cov(preset("bivariate-exp-6.2").spec),
    ]
    for m in mats:
        assert np.allclose(m, m.T, atol=1e-12)
        eig = np.linalg.eigvalsh(m)
        assert eig.min() >= -1e-12
        assert (np.abs(eig) > 1e-10).sum() <= 1


def test_empirical_cf_helper():
    rng = rng_for("emp-cf")
    x = rng.normal(size=60_000)
    est = empirical_cf(x, 1.0)
    assert abs(est.value - math.exp(-0.5)) <= 5 * est.error_scale
    assert empirical_cf(x, 0.0).value == pytest.approx(1.0 + 0j)
