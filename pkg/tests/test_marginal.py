import math

import numpy as np
import pytest
from scipy import integrate, stats as sps

from gbpf import (
    BalancedNested,
    BoxUnion,
    Continuous1D,
    CoupledPair,
    Discrete1D,
    GbpfError,
    IntegerSet,
    IntervalUnion,
    NotRepresentable,
    Predicate,
    ProductContinuous,
    SymmetricNested,
    UserCells,
    WeightedAtoms,
    build_partition,
    complement_set,
    coupled_pair_sample,
    estimate_mass_mc,
    find_balanced_subset,
    restricted_sample,
    set_mass,
    set_mean,
    set_moment,
)
from gbpf.stats import ks_distance

from conftest import rng_for

A_EXP = -math.log(0.3)


@pytest.fixture(scope="module")
def expm():
    return Continuous1D.exponential(1.0)


@pytest.fixture(scope="module")
def normm():
    return Continuous1D.normal()


@pytest.fixture(scope="module")
def unim():
    return Continuous1D.uniform()


def test_set_mass_examples(expm, unim):
    assert set_mass(expm, IntervalUnion([(A_EXP, math.inf)])) == pytest.approx(0.3, abs=1e-12)
    binom = Discrete1D.binomial(20, 0.4)
    assert set_mass(binom, IntegerSet(range(8))) == pytest.approx(0.41589, abs=1e-4)
    assert set_mass(unim, IntervalUnion([(0.0, 0.37)])) == pytest.approx(0.37, abs=1e-12)


def test_set_mean_examples(expm, normm, unim):
    got = set_mean(expm, IntervalUnion([(A_EXP, math.inf)]))[0]
    assert got == pytest.approx((A_EXP + 1) * math.exp(-A_EXP), abs=1e-10)
    z = 0.5244005127080407
    assert set_mean(normm, IntervalUnion([(z, math.inf)]))[0] == pytest.approx(
        sps.norm.pdf(z), abs=1e-10)
    assert set_mean(unim, IntervalUnion([(0.0, 0.5)]))[0] == pytest.approx(0.125, abs=1e-12)


def test_set_moment_uniform():
    unim = Continuous1D.uniform()
    assert set_moment(unim, IntervalUnion([(0.0, 0.5)]), 2)[0] == pytest.approx(1 / 24, abs=1e-12)
    assert set_moment(unim, IntervalUnion([(0.5, 1.0)]), 2)[0] == pytest.approx(7 / 24, abs=1e-12)


def test_complement_roundtrip(expm):
    A = IntervalUnion([(A_EXP, math.inf)])
    Ac = complement_set(expm, A)
    assert isinstance(Ac, IntervalUnion)
    assert set_mass(expm, Ac) == pytest.approx(0.7, abs=1e-12)
    total = set_mean(expm, A)[0] + set_mean(expm, Ac)[0]
    assert total == pytest.approx(1.0, abs=1e-9)


def test_restricted_sample_uniform_ks(unim):
    rng = rng_for("restricted-uniform")
    a = 0.4
    x = restricted_sample(unim, IntervalUnion([(0.0, a)]), rng, size=100_000)[:, 0]
    res = ks_distance(x, lambda v: np.clip(v / a, 0, 1))
    assert res.statistic < 1.63 / math.sqrt(100_000)


def test_restricted_sample_exponential_tail_mean(expm):
    rng = rng_for("restricted-exp")
    n = 100_000
    x = restricted_sample(expm, IntervalUnion([(A_EXP, math.inf)]), rng, size=n)[:, 0]
    se = 1.0 / math.sqrt(n)  # tail draws are shifted Exp(1), sd = 1
    assert abs(x.mean() - (A_EXP + 1)) <= 4 * se


def test_restricted_sample_discrete_containment():
    rng = rng_for("restricted-binom")
    binom = Discrete1D.binomial(20, 0.4)
    S = IntegerSet(range(8))
    x = restricted_sample(binom, S, rng, size=2000)[:, 0]
    assert np.all(x <= 7) and np.all(x >= 0)


@pytest.mark.parametrize("seed", range(20))
def test_restricted_sample_ks_many_seeds(seed, expm):
    # Exact inverse-CDF sampling passes a strict KS test for each seed.
    rng = np.random.default_rng(1000 + seed)
    S = IntervalUnion([(0.25, 1.0), (2.0, math.inf)])
    mass = set_mass(expm, S)
    x = restricted_sample(expm, S, rng, size=4000)[:, 0]

    def cond_cdf(v):
        inner = sum(expm.cdf(min(hi, v)) - expm.cdf(lo) for lo, hi in S.intervals if lo < v)
        return inner / mass

    res = ks_distance(x, np.vectorize(cond_cdf))
    assert res.passes(0.01), (seed, res.statistic)


def test_rejection_sampler_predicate(normm):
    rng = rng_for("predicate")
    pred = Predicate(lambda x: np.asarray(x)[..., 0] ** 2 < 0.25, ((-1.0, 1.0),))
    # Wrap scalar marginal samples to shape (n, 1) predicates.
    x = restricted_sample(normm, IntervalUnion([(-0.5, 0.5)]), rng, size=5000)[:, 0]
    assert np.all(np.abs(x) <= 0.5)
    est, se = estimate_mass_mc(normm, pred, rng, n=100_000)
    assert abs(est - (2 * sps.norm.cdf(0.5) - 1)) <= 5 * se


def test_balanced_subset_uniform(unim):
    w = find_balanced_subset(unim, unim.full_set(), 0.5, g=0)
    (lo, hi), = w.intervals
    assert lo == pytest.approx(0.25, abs=1e-9)
    assert hi == pytest.approx(0.75, abs=1e-9)


def test_balanced_subset_normal(normm):
    w = find_balanced_subset(normm, normm.full_set(), 0.5, g=0)
    (lo, hi), = w.intervals
    q = sps.norm.ppf(0.75)
    assert lo == pytest.approx(-q, abs=1e-8)
    assert hi == pytest.approx(q, abs=1e-8)


def test_balanced_subset_exponential_quadrature(expm):
    w = find_balanced_subset(expm, expm.full_set(), 0.5, g=0)
    (lo, hi), = w.intervals
    mass, _ = integrate.quad(expm.pdf, lo, hi, epsabs=1e-12)
    mom, _ = integrate.quad(lambda x: x * expm.pdf(x), lo, hi, epsabs=1e-12)
    assert mass == pytest.approx(0.5, abs=1e-8)
    assert mom == pytest.approx(0.5, abs=1e-6)


def test_balanced_subset_property():
    # Mass and moment split by the window, over random marginals and p.
    rng = rng_for("balanced-prop")
    marginals = [
        Continuous1D.uniform(),
        Continuous1D.exponential(1.0),
        Continuous1D.normal(),
    ]
    for trial in range(50):
        m = marginals[trial % 3]
        p = float(rng.uniform(0.05, 0.95))
        w = find_balanced_subset(m, m.full_set(), p, g=0)
        mass = sum(integrate.quad(m.pdf, lo, hi, epsabs=1e-12)[0]
                   for lo, hi in w.intervals)
        mom = sum(integrate.quad(lambda x: x * m.pdf(x), lo, hi, epsabs=1e-12)[0]
                  for lo, hi in w.intervals)
        assert abs(mass - p) <= 1e-8
        assert abs(mom - p * m.mean_vector()[0]) <= 1e-6


def test_balanced_subset_discrete_not_representable():
    binom = Discrete1D.binomial(20, 0.4)
    with pytest.raises(NotRepresentable):
        find_balanced_subset(binom, IntegerSet(range(8)), 0.5, g=0)


def test_balanced_subset_product_marginal():
    m = ProductContinuous((Continuous1D.uniform(), Continuous1D.normal()))
    w = find_balanced_subset(m, m.full_set(), 0.3, g=1)
    assert isinstance(w, BoxUnion)
    assert set_mass(m, w) == pytest.approx(0.3, abs=1e-8)
    assert set_mean(m, w)[1] == pytest.approx(0.3 * 0.0, abs=1e-6)


def test_partition_user_cells_reference(normm):
    z = lambda q: sps.norm.ppf(1 - q)
    cells = {
        (1, 1): IntervalUnion([(-z(0.4), z(0.4))]),
        (0, 0): IntervalUnion([(-z(0.25), -z(0.4)), (z(0.4), z(0.25))]),
        (0, 1): IntervalUnion([(-math.inf, -z(0.2)), (z(0.25), z(0.15))]),
        (1, 0): IntervalUnion([(-z(0.2), -z(0.25)), (z(0.15), math.inf)]),
    }
    part = build_partition(normm, (0.4, 0.5), UserCells(cells))
    assert part.masses[(1, 1)] == pytest.approx(0.2, abs=1e-9)
    assert part.masses[(1, 0)] == pytest.approx(0.2, abs=1e-9)
    assert part.masses[(0, 1)] == pytest.approx(0.3, abs=1e-9)
    assert part.masses[(0, 0)] == pytest.approx(0.3, abs=1e-9)


def test_partition_rejects_wrong_masses(unim):
    cells = {
        (1,): IntervalUnion([(0.0, 0.5)]),
        (0,): IntervalUnion([(0.5, 1.0)]),
    }
    with pytest.raises(GbpfError):
        build_partition(unim, (0.4,), UserCells(cells))


def test_partition_rejects_overlap(unim):
    cells = {
        (1,): IntervalUnion([(0.0, 0.4)]),
        (0,): IntervalUnion([(0.3, 1.0)]),
    }
    with pytest.raises(GbpfError):
        build_partition(unim, (0.4,), UserCells(cells))


def test_symmetric_nested_zero_means(normm):
    part = build_partition(normm, (0.4, 0.5), SymmetricNested(0.0))
    for key, mean in part.means.items():
        assert abs(mean[0]) <= 1e-9
        assert part.masses[key] == pytest.approx(part.product_mass(key), abs=1e-9)


def test_symmetric_nested_partial_axes(normm):
    # Only axis 0 is mean-matched; axis 1 splits by mass alone.
    part = build_partition(normm, (0.4, 0.5), SymmetricNested(0.0, axes=(0,)))
    mu = 0.0
    for bit in (0, 1):
        got = part.merged_mean((0,), (bit,))[0]
        assert abs(got - mu) <= 1e-6
    for key in part.cells:
        assert part.masses[key] == pytest.approx(part.product_mass(key), abs=1e-8)


def test_symmetric_nested_requires_symmetry(expm):
    with pytest.raises(GbpfError):
        build_partition(expm, (0.5,), SymmetricNested(1.0))


def test_balanced_nested_moment_condition(expm):
    part = build_partition(expm, (0.3, 0.45, 0.6), BalancedNested())
    mu = 1.0
    for key, mean in part.means.items():
        assert mean[0] == pytest.approx(mu * part.masses[key], abs=1e-6)


def test_balanced_nested_partial_axes(expm):
    part = build_partition(expm, (0.3, 0.45), BalancedNested(axes=(1,)))
    for bit in (0, 1):
        got = part.merged_mean((1,), (bit,))[0]
        frac = 0.45 if bit else 0.55
        assert got == pytest.approx(frac, abs=1e-6)


def test_weighted_atoms_partition():
    bern = Discrete1D.bernoulli(0.25)
    share = 0.75
    cells = {
        (1, 1): WeightedAtoms({1: 1.0}),
        (1, 0): WeightedAtoms({0: 0.25 / share}),
        (0, 1): WeightedAtoms({0: 0.25 / share}),
        (0, 0): WeightedAtoms({0: 0.25 / share}),
    }
    part = build_partition(bern, (0.5, 0.5), UserCells(cells))
    for key in part.cells:
        assert part.masses[key] == pytest.approx(0.25, abs=1e-12)
    assert part.means[(1, 1)][0] == pytest.approx(0.25)
    assert part.means[(1, 0)][0] == 0.0


def test_weighted_atoms_oversubscription_rejected():
    bern = Discrete1D.bernoulli(0.25)
    cells = {
        (1, 1): WeightedAtoms({1: 1.0}),
        (1, 0): WeightedAtoms({0: 0.5}),
        (0, 1): WeightedAtoms({0: 0.5}),
        (0, 0): WeightedAtoms({0: 0.5}),
    }
    with pytest.raises(GbpfError):
        build_partition(bern, (0.5, 0.5), UserCells(cells))


def test_coupled_pair_reference_covariance(expm):
    pair = CoupledPair(expm, IntervalUnion([(A_EXP, math.inf)]), 0.12)
    assert pair.p0 == pytest.approx(0.3, abs=1e-12)
    expected = 0.12 * (A_EXP / 0.7) ** 2
    assert pair.covariance()[0, 1] == pytest.approx(expected, abs=1e-9)


def test_coupled_pair_sampling_correlation(expm):
    rng = rng_for("coupled-corr")
    pair = CoupledPair(expm, IntervalUnion([(A_EXP, math.inf)]), 0.12)
    n = 100_000
    pts = coupled_pair_sample(pair, rng, size=n)
    emp = float(np.cov(pts.T)[0, 1])
    # Replicate-free bound: moment SE of the product term.
    se = float(np.std(pts[:, 0] * pts[:, 1])) / math.sqrt(n)
    assert abs(emp - pair.covariance()[0, 1]) <= 4 * se


def test_coupled_pair_independent_when_c0_zero(expm):
    rng = rng_for("coupled-indep")
    pair = CoupledPair(expm, IntervalUnion([(A_EXP, math.inf)]), 0.0)
    pts = coupled_pair_sample(pair, rng, size=100_000)
    corr = float(np.corrcoef(pts.T)[0, 1])
    assert abs(corr) <= 4 / math.sqrt(100_000)


def test_coupled_pair_marginals_preserved(expm):
    rng = rng_for("coupled-marginal")
    pair = CoupledPair(expm, IntervalUnion([(A_EXP, math.inf)]), 0.12)
    pts = coupled_pair_sample(pair, rng, size=100_000)
    for k in (0, 1):
        res = ks_distance(pts[:, k], expm.cdf)
        assert res.statistic < 1.63 / math.sqrt(100_000)


def test_coupled_pair_negative_weight_rejected(expm):
    with pytest.raises(GbpfError):
        CoupledPair(expm, IntervalUnion([(A_EXP, math.inf)]), 0.3)


def test_coupled_pair_box_mass_decomposition(expm):
    # Two-quadrant union evaluated exactly through the cell decomposition.
    pair = CoupledPair(expm, IntervalUnion([(A_EXP, math.inf)]), 0.12)
    a, b = A_EXP, -math.log(0.8)
    box = BoxUnion([
        (IntervalUnion([(a, math.inf)]), IntervalUnion([(b, math.inf)])),
        (IntervalUnion([(b, a)]), IntervalUnion([(a, math.inf)])),
    ])
    assert set_mass(pair, box) == pytest.approx(0.3385714285714285, abs=1e-12)
    rng = rng_for("coupled-box")
    est, se = estimate_mass_mc(pair, box, rng, n=200_000)
    assert abs(est - 0.33857) <= 5 * se
