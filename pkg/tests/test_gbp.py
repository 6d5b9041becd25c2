import itertools
import math

import numpy as np
import pytest

from gbpf import (
    CovarianceFunction,
    CovarianceNotAdmissible,
    GbpModel,
    NegativeGapProbability,
    build_gap_tables,
    config_probability,
    d_operator,
    l_operator,
    sample_path,
    verify_well_defined,
)
from gbpf.stats import autocovariance, replicate_lag_stats

from conftest import rng_for


def test_l_operator_conventions(dyadic_model):
    assert l_operator(dyadic_model, []) == pytest.approx(2.0)
    assert l_operator(dyadic_model, [7]) == 1.0
    assert l_operator(dyadic_model, {1, 2, 4}) == pytest.approx(0.33, abs=1e-15)


def test_d_operator_examples(dyadic_model):
    assert d_operator(dyadic_model, [], [3]) == pytest.approx(1.0, abs=1e-15)
    assert d_operator(dyadic_model, [1], [2]) == pytest.approx(0.4, abs=1e-15)
    assert d_operator(dyadic_model, [1, 4], [2, 3]) == pytest.approx(0.081, abs=1e-12)


def test_config_probability_examples(dyadic_model):
    assert config_probability(dyadic_model, [5], []) == pytest.approx(0.5)
    assert config_probability(dyadic_model, [1, 2], []) == pytest.approx(0.3, abs=1e-15)
    assert config_probability(dyadic_model, [1], [2]) == pytest.approx(0.2, abs=1e-15)


def test_strict_construction_rejects_bad_pairs():
    cov = CovarianceFunction.tabulated({1: 0.3, 2: 0.15, 3: 0.075})
    with pytest.raises(CovarianceNotAdmissible):
        GbpModel.create(0.5, cov)
    model = GbpModel.create(0.5, cov, unchecked=True)
    assert model.unchecked and not model.validity.passed


def test_gap_tables_dyadic_values(dyadic_model):
    t = build_gap_tables(dyadic_model, 10)
    assert t.g[:3] == pytest.approx([0.6, 0.19, 0.081], abs=1e-12)
    assert t.h[:3] == pytest.approx([0.5, 0.2, 0.105], abs=1e-12)
    assert t.F0[1] == pytest.approx(0.7, abs=1e-12)


@pytest.mark.parametrize("p,cov", [
    (0.5, CovarianceFunction.tabulated({1: 0.05, 2: 0.025, 3: 0.0125})),
    (0.3, CovarianceFunction.power_law(0.12, 0.7)),
    (0.4, CovarianceFunction.exponential(0.23, 0.4)),
    (0.6, CovarianceFunction.stretched_exponential(0.2, 0.2, 0.8)),
])
def test_gap_tables_match_subset_sum_oracle(p, cov):
    model = GbpModel.create(p, cov, unchecked=True)
    t = build_gap_tables(model, 14)
    for k in range(1, 13):
        g_exact = d_operator(model, [1, k + 1], list(range(2, k + 1)))
        h_exact = p * d_operator(model, [k], list(range(1, k)))
        assert abs(t.g[k - 1] - g_exact) <= 1e-10
        assert abs(t.h[k - 1] - h_exact) <= 1e-10


def test_gap_tables_monotone_and_bounded(dyadic_model):
    t = build_gap_tables(dyadic_model, 2000)
    assert np.all(t.g >= 0) and np.all(t.h >= 0)
    assert np.all(np.diff(t.F) >= 0) and np.all(np.diff(t.F0) >= 0)
    assert t.F[-1] <= 1 + 1e-9 and t.F0[-1] <= 1 + 1e-9


def test_negative_gap_probability_detected():
    # The inadmissible reference pair: the gap law goes negative at k=2.
    model = GbpModel.create(0.258, CovarianceFunction.exponential(0.2, 0.1), unchecked=True)
    with pytest.raises(NegativeGapProbability) as err:
        build_gap_tables(model, 10)
    assert err.value.k == 2
    # g(2) = (p + C*(2)) - (p + C*(1))^2 by direct arithmetic.
    p, c = 0.258, lambda k: 0.2 * math.exp(-0.1 * k)
    expected = (p + c(2) / p) - (p + c(1) / p) ** 2
    assert err.value.value == pytest.approx(expected, abs=1e-12)


def test_kolmogorov_consistency(dyadic_model):
    # Marginalizing any single position reproduces the smaller configuration.
    for k in range(1, 9):
        window = list(range(1, k + 1))
        for bits in itertools.product((0, 1), repeat=k):
            ones = [i for i, b in zip(window, bits) if b]
            zeros = [i for i, b in zip(window, bits) if not b]
            if not ones and not zeros:
                continue
            full = config_probability(dyadic_model, ones, zeros)
            j = k + 1
            split = (config_probability(dyadic_model, ones + [j], zeros)
                     + config_probability(dyadic_model, ones, zeros + [j]))
            assert abs(full - split) <= 1e-12
            if ones:
                drop = ones[0]
                sub_ones = [i for i in ones if i != drop]
                if sub_ones or zeros:
                    merged = (config_probability(dyadic_model, sub_ones + [drop], zeros)
                              + config_probability(dyadic_model, sub_ones, zeros + [drop]))
                    base = config_probability(dyadic_model, sub_ones, zeros)
                    assert abs(base - merged) <= 1e-12


def test_total_mass_over_configurations(dyadic_model):
    for k in (4, 6, 8):
        window = list(range(1, k + 1))
        total = 0.0
        for bits in itertools.product((0, 1), repeat=k):
            ones = [i for i, b in zip(window, bits) if b]
            zeros = [i for i, b in zip(window, bits) if not b]
            total += config_probability(dyadic_model, ones, zeros)
        assert abs(total - 1.0) <= 1e-10


def test_well_defined_dyadic(dyadic_model):
    res = verify_well_defined(dyadic_model, 8)
    assert res.ok and res.min_value > 0


def test_well_defined_min_matches_enumeration(dyadic_model):
    # The reported minimum must equal a brute-force scan on a small window.
    res = verify_well_defined(dyadic_model, 5)
    best = math.inf
    sets = list(range(1, 6))
    for assignment in itertools.product((0, 1, 2), repeat=5):
        ones = [i for i, a in zip(sets, assignment) if a == 1]
        zeros = [i for i, a in zip(sets, assignment) if a == 2]
        if not ones and not zeros:
            continue
        best = min(best, d_operator(dyadic_model, ones, zeros))
    assert res.min_value == pytest.approx(best, abs=1e-12)


def test_well_defined_detects_violation():
    cov = CovarianceFunction.tabulated({1: 0.3, 2: 0.15, 3: 0.075})
    model = GbpModel.create(0.5, cov, unchecked=True)
    res = verify_well_defined(model, 2)
    assert not res.ok
    assert res.min_value == pytest.approx(-0.1, abs=1e-12)
    ones, zeros, val = res.witness
    assert len(ones) == 1 and len(zeros) == 1


def test_pairwise_positivity_identity(dyadic_model):
    # Smallest window: D({1},{2}) = 1 - p - C*(1).
    val = d_operator(dyadic_model, [1], [2])
    assert val == pytest.approx(1 - 0.5 - 0.05 / 0.5, abs=1e-15)


def test_removing_one_index_decreases_chain_weight(dyadic_model):
    # L(A) - L(A u {i}) > 0 for every A in {1..8} and i outside A.
    universe = list(range(1, 9))
    for r in range(0, 8):
        for A in itertools.combinations(universe, r):
            for i in range(1, 10):
                if i in A:
                    continue
                val = l_operator(dyadic_model, A) - l_operator(dyadic_model, list(A) + [i])
                assert val > 0, (A, i, val)


class _ScriptedRng:
    def __init__(self, us):
        self.us = list(us)

    def random(self):
        return self.us.pop(0)


def test_sampler_inversion_convention(dyadic_model):
    tables = build_gap_tables(dyadic_model, 10)
    # F0 = [0.5, 0.7, ...]: a first draw of 0.65 places the first one at 2.
    path = sample_path(dyadic_model, 4, _ScriptedRng([0.65, 0.9999999]), tables=tables)
    assert path.bits.tolist() == [0, 1, 0, 0]
    # A draw below F0(1) places the first one at position 1.
    path = sample_path(dyadic_model, 4, _ScriptedRng([0.3, 0.9999999]), tables=tables)
    assert path.bits[0] == 1


def test_sampler_tail_rule(dyadic_model):
    tables = build_gap_tables(dyadic_model, 6)
    # A first draw beyond F0(n) leaves the window all zero.
    path = sample_path(dyadic_model, 6, _ScriptedRng([0.999999999]), tables=tables)
    assert path.bits.sum() == 0


def test_sampler_mean_and_pair_law(dyadic_model):
    rng = rng_for("sampler-law")
    n = 200_000
    path = sample_path(dyadic_model, n, rng)
    bits = path.bits.astype(float)
    p = dyadic_model.p
    assert abs(bits.mean() - p) <= 4 * math.sqrt(p * (1 - p) / n)
    pair = float(np.mean(bits[:-1] * bits[1:]))
    target = p * p + 0.05
    se = 4 * math.sqrt(target * (1 - target) / n)
    assert abs(pair - target) <= se


def test_sampler_lag_covariances_match_target(dyadic_model):
    rng = rng_for("sampler-cov")
    n, reps, max_lag = 200_000, 20, 20
    tables = dyadic_model.gap_tables(n)
    stats = []
    for _ in range(reps):
        path = sample_path(dyadic_model, n, rng, tables=tables)
        stats.append(autocovariance(path.bits.astype(float), max_lag))
    agg = replicate_lag_stats(stats)
    for k in range(1, max_lag + 1):
        target = dyadic_model.cov(k)
        bound = 4 * agg.se[k] + 1e-9
        assert abs(agg.estimates[k] - target) <= bound, (k, agg.estimates[k], target)


def test_unchecked_sampling_is_gated(dyadic_model):
    model = GbpModel.create(0.258, CovarianceFunction.exponential(0.2, 0.1), unchecked=True)
    with pytest.raises(NegativeGapProbability):
        sample_path(model, 100, rng_for("gated"))
