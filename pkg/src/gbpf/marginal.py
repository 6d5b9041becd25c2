"""Target marginal distributions, support subsets, and restricted sampling.

The construction in :mod:`gbpf.process` and :mod:`gbpf.field` draws every
observation from the target marginal *restricted* to a support subset
selected by latent bits.  This module provides the subset representations
(interval unions, integer sets, weighted atoms, boxes, predicates), the
marginal-distribution wrappers, and the exact/numeric set functionals:
masses, first moments, characteristic-function integrals, and inverse-CDF
restricted sampling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, stats

from .errors import GbpfError, NotRepresentable, RejectionCapExceeded

__all__ = [
    "SupportSet",
    "IntervalUnion",
    "IntegerSet",
    "WeightedAtoms",
    "BoxUnion",
    "Predicate",
    "ComplementSet",
    "Marginal",
    "Continuous1D",
    "Discrete1D",
    "ProductContinuous",
    "MultivariateNormal",
    "CoupledPair",
    "set_mass",
    "set_mean",
    "set_moment",
    "cf_integral",
    "restricted_sample",
    "complement_set",
    "estimate_mass_mc",
    "coupled_pair_sample",
]

_QUAD_ABS_TOL = 1e-12
_REJECTION_CAP = 1_000_000


# ----------------------------------------------------------------------
# Support subsets
# ----------------------------------------------------------------------

class SupportSet:
    """Base class for subsets of a marginal's support."""

    dimension = 1

    def contains(self, x):  # pragma: no cover - overridden
        raise NotImplementedError


def _normalize_intervals(intervals):
    ivs = sorted((float(lo), float(hi)) for lo, hi in intervals)
    for lo, hi in ivs:
        if not lo < hi:
            raise ValueError(f"empty or inverted interval ({lo}, {hi})")
    merged = []
    for lo, hi in ivs:
        if merged and lo <= merged[-1][1]:
            if lo < merged[-1][1]:
                raise ValueError("overlapping intervals in union")
            merged[-1] = (merged[-1][0], hi)
        else:
            merged.append((lo, hi))
    return tuple(merged)


@dataclass(frozen=True)
class IntervalUnion(SupportSet):
    """Disjoint union of real intervals, kept sorted and merged."""

    intervals: tuple

    def __init__(self, intervals):
        object.__setattr__(self, "intervals", _normalize_intervals(intervals))

    @classmethod
    def single(cls, lo, hi):
        return cls([(lo, hi)])

    def contains(self, x):
        x = np.asarray(x)
        out = np.zeros(x.shape, dtype=bool)
        for lo, hi in self.intervals:
            out |= (x >= lo) & (x <= hi)
        return out

    def complement(self, lo, hi) -> "IntervalUnion":
        """Complement within the interval (lo, hi)."""
        pieces = []
        cur = lo
        for a, b in self.intervals:
            if a > cur:
                pieces.append((cur, min(a, hi)))
            cur = max(cur, b)
            if cur >= hi:
                break
        if cur < hi:
            pieces.append((cur, hi))
        return IntervalUnion([(a, b) for a, b in pieces if a < b])

    def intersect(self, other: "IntervalUnion") -> "IntervalUnion":
        pieces = []
        for a, b in self.intervals:
            for c, d in other.intervals:
                lo, hi = max(a, c), min(b, d)
                if lo < hi:
                    pieces.append((lo, hi))
        return IntervalUnion(pieces)

    def subtract(self, other: "IntervalUnion") -> "IntervalUnion":
        if not self.intervals:
            return self
        lo = self.intervals[0][0]
        hi = self.intervals[-1][1]
        return self.intersect(other.complement(lo, hi))

    def reflect(self, center: float) -> "IntervalUnion":
        return IntervalUnion([(2 * center - hi, 2 * center - lo) for lo, hi in self.intervals])


@dataclass(frozen=True)
class IntegerSet(SupportSet):
    """Finite set of integer atoms."""

    values: tuple

    def __init__(self, values):
        object.__setattr__(self, "values", tuple(sorted(set(int(v) for v in values))))

    def contains(self, x):
        x = np.asarray(x)
        return np.isin(x, np.asarray(self.values))


@dataclass(frozen=True)
class WeightedAtoms(SupportSet):
    """Fractions of integer atoms: atom -> share of its mass in this cell.

    Degenerate component distributions (several cells mapping to the same
    point value) need cells that split an atom's mass; a plain set cannot
    express that, a weighted atom map can.
    """

    weights: tuple  # ((atom, weight), ...)

    def __init__(self, weights):
        if isinstance(weights, dict):
            items = weights.items()
        else:
            items = weights
        ws = tuple(sorted((int(a), float(w)) for a, w in items))
        for _, w in ws:
            if not 0 < w <= 1 + 1e-12:
                raise ValueError("atom weights must lie in (0, 1]")
        object.__setattr__(self, "weights", ws)

    def weight_map(self):
        return dict(self.weights)

    def contains(self, x):
        atoms = np.asarray([a for a, _ in self.weights])
        return np.isin(np.asarray(x), atoms)


@dataclass(frozen=True)
class BoxUnion(SupportSet):
    """Disjoint union of axis-aligned boxes in R^d.

    Each box is a tuple of per-coordinate one-dimensional sets
    (IntervalUnion or IntegerSet).  Boxes must be pairwise disjoint; the
    constructor trusts the caller on that.
    """

    boxes: tuple

    def __init__(self, boxes):
        bx = tuple(tuple(b) for b in boxes)
        if not bx:
            raise ValueError("empty box union")
        d = len(bx[0])
        if any(len(b) != d for b in bx):
            raise ValueError("boxes must share a dimension")
        object.__setattr__(self, "boxes", bx)

    @property
    def dimension(self):
        return len(self.boxes[0])

    def contains(self, x):
        pts = np.asarray(x, dtype=float)
        single = pts.ndim == 1
        pts2 = np.atleast_2d(pts)
        out = np.zeros(pts2.shape[0], dtype=bool)
        for box in self.boxes:
            inside = np.ones(pts2.shape[0], dtype=bool)
            for j, side in enumerate(box):
                inside &= side.contains(pts2[:, j])
            out |= inside
        return bool(out[0]) if single else out


@dataclass(frozen=True)
class Predicate(SupportSet):
    """Membership test plus a bounding box, for sets with no exact form.

    ``mc_error`` is the declared Monte Carlo mass-estimation error bound.
    """

    indicator: Callable
    bbox: tuple
    mc_error: float = 1e-3

    @property
    def dimension(self):
        return len(self.bbox)

    def contains(self, x):
        return self.indicator(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class ComplementSet(SupportSet):
    """Complement of an inner set within the marginal's full support.

    Mass and moments are derived exactly from the marginal totals, so the
    complement of an exactly-integrable set is exactly integrable too.
    """

    inner: SupportSet

    @property
    def dimension(self):
        return self.inner.dimension

    def contains(self, x):
        return ~np.asarray(self.inner.contains(x))


# ----------------------------------------------------------------------
# Marginal distributions
# ----------------------------------------------------------------------

class Marginal:
    """Base class: a target one-dimensional (possibly vector) distribution."""

    d = 1

    def mean_vector(self) -> np.ndarray:
        raise NotImplementedError

    def covariance(self) -> np.ndarray:
        raise NotImplementedError

    def sample(self, rng, size):
        """Draw ``size`` unrestricted points, shape (size, d)."""
        raise NotImplementedError


class Continuous1D(Marginal):
    """Scalar continuous marginal given by pdf, cdf and quantile.

    The three callables must be consistent; construction validates unit
    mass and the quantile/cdf round trip on an interior grid.
    """

    d = 1

    def __init__(self, pdf, cdf, quantile, support, mean=None, var=None, validate=True):
        self.pdf = pdf
        self.cdf = cdf
        self.quantile = quantile
        self.support = (float(support[0]), float(support[1]))
        self._mean = mean
        self._var = var
        if validate:
            total, _ = integrate.quad(pdf, *self.support, epsabs=1e-11, limit=200)
            if abs(total - 1.0) > 1e-9:
                raise GbpfError(f"pdf mass {total!r} is not 1 within 1e-9")
            us = np.linspace(0.01, 0.99, 21)
            xs = np.asarray([quantile(u) for u in us], dtype=float)
            back = np.asarray([cdf(x) for x in xs], dtype=float)
            if np.max(np.abs(back - us)) > 1e-9:
                raise GbpfError("quantile/cdf round trip exceeds 1e-9")

    @classmethod
    def from_scipy(cls, dist, validate=True):
        lo, hi = dist.support()
        return cls(dist.pdf, dist.cdf, dist.ppf, (lo, hi),
                   mean=float(dist.mean()), var=float(dist.var()), validate=validate)

    @classmethod
    def exponential(cls, rate=1.0):
        return cls.from_scipy(stats.expon(scale=1.0 / rate), validate=False)

    @classmethod
    def uniform(cls, lo=0.0, hi=1.0):
        return cls.from_scipy(stats.uniform(loc=lo, scale=hi - lo), validate=False)

    @classmethod
    def normal(cls, mu=0.0, sigma=1.0):
        return cls.from_scipy(stats.norm(loc=mu, scale=sigma), validate=False)

    def mean_vector(self):
        if self._mean is None:
            self._mean, _ = integrate.quad(lambda x: x * self.pdf(x), *self.support,
                                           epsabs=_QUAD_ABS_TOL, limit=200)
        return np.asarray([self._mean], dtype=float)

    def covariance(self):
        if self._var is None:
            mu = self.mean_vector()[0]
            m2, _ = integrate.quad(lambda x: (x - mu) ** 2 * self.pdf(x), *self.support,
                                   epsabs=_QUAD_ABS_TOL, limit=200)
            self._var = m2
        return np.asarray([[self._var]], dtype=float)

    def full_set(self) -> IntervalUnion:
        return IntervalUnion([self.support])

    def sample(self, rng, size):
        return self.quantile(rng.random(size)).reshape(size, 1)


class Discrete1D(Marginal):
    """Scalar distribution on a finite set of integer atoms."""

    d = 1

    def __init__(self, pmf):
        if isinstance(pmf, dict):
            items = sorted(pmf.items())
        else:
            items = sorted(pmf)
        self.xs = np.asarray([int(k) for k, _ in items])
        self.probs = np.asarray([float(v) for _, v in items])
        if np.any(self.probs < 0) or abs(self.probs.sum() - 1.0) > 1e-9:
            raise GbpfError("pmf must be non-negative and sum to 1 within 1e-9")

    @classmethod
    def binomial(cls, n, p):
        xs = np.arange(n + 1)
        return cls(dict(zip(xs, stats.binom.pmf(xs, n, p))))

    @classmethod
    def bernoulli(cls, p):
        return cls({0: 1.0 - p, 1: p})

    def pmf_of(self, values):
        idx = np.searchsorted(self.xs, values)
        idx = np.clip(idx, 0, len(self.xs) - 1)
        ok = self.xs[idx] == values
        return np.where(ok, self.probs[idx], 0.0)

    def cdf(self, x):
        return self.probs[self.xs <= x].sum()

    def mean_vector(self):
        return np.asarray([float(np.dot(self.xs, self.probs))])

    def covariance(self):
        mu = self.mean_vector()[0]
        return np.asarray([[float(np.dot((self.xs - mu) ** 2, self.probs))]])

    def full_set(self) -> IntegerSet:
        return IntegerSet(self.xs)

    def sample(self, rng, size):
        return rng.choice(self.xs, size=size, p=self.probs).reshape(size, 1)


class ProductContinuous(Marginal):
    """Independent product of scalar continuous marginals."""

    def __init__(self, components):
        self.components = tuple(components)
        if not self.components:
            raise GbpfError("product marginal needs at least one component")
        self.d = len(self.components)

    def mean_vector(self):
        return np.asarray([c.mean_vector()[0] for c in self.components])

    def covariance(self):
        return np.diag([c.covariance()[0, 0] for c in self.components])

    def full_set(self) -> BoxUnion:
        return BoxUnion([tuple(c.full_set() for c in self.components)])

    def sample(self, rng, size):
        return np.column_stack([c.sample(rng, size)[:, 0] for c in self.components])


class MultivariateNormal(Marginal):
    """Correlated Gaussian vector marginal (exact box masses, quadrature means)."""

    def __init__(self, mean, cov):
        self.mu = np.asarray(mean, dtype=float)
        self.sigma = np.asarray(cov, dtype=float)
        self.d = self.mu.size
        self._dist = stats.multivariate_normal(self.mu, self.sigma)

    def mean_vector(self):
        return self.mu.copy()

    def covariance(self):
        return self.sigma.copy()

    def pdf(self, x):
        return self._dist.pdf(x)

    def box_mass(self, lower, upper):
        """Probability of an axis-aligned box; deterministic quadrature for d=2."""
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        if self.d != 2:
            return float(self._dist.cdf(upper, lower_limit=lower))
        s1, s2 = math.sqrt(self.sigma[0, 0]), math.sqrt(self.sigma[1, 1])
        rho = self.sigma[0, 1] / (s1 * s2)
        r = math.sqrt(max(1.0 - rho * rho, 0.0))
        a1 = (lower[0] - self.mu[0]) / s1
        b1 = (upper[0] - self.mu[0]) / s1
        a2 = (lower[1] - self.mu[1]) / s2
        b2 = (upper[1] - self.mu[1]) / s2
        if r == 0.0:
            raise GbpfError("degenerate correlation in box mass")

        def strip(z):
            return stats.norm.pdf(z) * (
                stats.norm.cdf((b2 - rho * z) / r) - stats.norm.cdf((a2 - rho * z) / r)
            )

        lo = a1 if math.isfinite(a1) else -40.0
        hi = b1 if math.isfinite(b1) else 40.0
        val, _ = integrate.quad(strip, max(lo, -40.0), min(hi, 40.0),
                                epsabs=1e-13, limit=400)
        return float(val)

    def sample(self, rng, size):
        return rng.multivariate_normal(self.mu, self.sigma, size=size)


class CoupledPair(Marginal):
    """Bivariate marginal with identical components tied through one set.

    The joint law reweights the independent product on the four cells
    cut by a scalar set with mass p0: weight
    ``1 + (-1)^(l1+l2) c0 / (p0^l1 (1-p0)^(1-l1) p0^l2 (1-p0)^(1-l2))``
    on the (l1, l2) cell.  Both one-dimensional marginals stay equal to the
    base law, and the within-pair covariance is proportional to c0.
    """

    d = 2

    def __init__(self, base, region0, c0):
        self.base = base
        self.region0 = region0
        self.c0 = float(c0)
        self.p0 = float(set_mass(base, region0))
        if not 0 < self.p0 < 1:
            raise GbpfError("coupling set must have mass strictly inside (0, 1)")
        self.region0c = complement_set(base, region0)
        for l1 in (0, 1):
            for l2 in (0, 1):
                if self.cell_weight(l1, l2) < 0:
                    raise GbpfError("coupling constant c0 makes a cell weight negative")

    def _cell_base_mass(self, level):
        return self.p0 if level == 1 else 1.0 - self.p0

    def cell_weight(self, l1, l2):
        denom = self._cell_base_mass(l1) * self._cell_base_mass(l2)
        return 1.0 + ((-1.0) ** (l1 + l2)) * self.c0 / denom

    def cell_probability(self, l1, l2):
        return self._cell_base_mass(l1) * self._cell_base_mass(l2) * self.cell_weight(l1, l2)

    def component_region(self, level):
        return self.region0 if level == 1 else self.region0c

    def mean_vector(self):
        mu = self.base.mean_vector()[0]
        return np.asarray([mu, mu])

    def covariance(self):
        var = self.base.covariance()[0, 0]
        cond = [set_mean(self.base, self.component_region(l))[0] / self._cell_base_mass(l)
                for l in (0, 1)]
        exy = sum(
            self.cell_probability(l1, l2) * cond[l1] * cond[l2]
            for l1 in (0, 1) for l2 in (0, 1)
        )
        mu = self.base.mean_vector()[0]
        off = exy - mu * mu
        return np.asarray([[var, off], [off, var]])

    def sample(self, rng, size):
        return coupled_pair_sample(self, rng, size)


# ----------------------------------------------------------------------
# Set functionals
# ----------------------------------------------------------------------

def _quad_interval(fun, lo, hi):
    val, _ = integrate.quad(fun, lo, hi, epsabs=_QUAD_ABS_TOL, limit=400)
    return val


def set_mass(m: Marginal, S: SupportSet, rng=None, mc_samples=200_000) -> float:
    """Probability mass of S under the marginal.

    Exact (cdf differences / sums / box products) wherever the set has
    structure; a bare :class:`Predicate` falls back to Monte Carlo and then
    needs ``rng``.
    """
    if isinstance(S, ComplementSet):
        return 1.0 - set_mass(m, S.inner, rng, mc_samples)
    if isinstance(m, Continuous1D) and isinstance(S, IntervalUnion):
        return float(sum(m.cdf(hi) - m.cdf(lo) for lo, hi in S.intervals))
    if isinstance(m, Discrete1D) and isinstance(S, (IntegerSet, WeightedAtoms)):
        if isinstance(S, IntegerSet):
            return float(m.pmf_of(np.asarray(S.values)).sum()) if S.values else 0.0
        return float(sum(m.pmf_of(np.asarray([a]))[0] * w for a, w in S.weights))
    if isinstance(m, Discrete1D) and isinstance(S, IntervalUnion):
        inside = S.contains(m.xs)
        return float(m.probs[inside].sum())
    if isinstance(m, ProductContinuous) and isinstance(S, BoxUnion):
        return float(sum(
            np.prod([set_mass(c, side) for c, side in zip(m.components, box)])
            for box in S.boxes
        ))
    if isinstance(m, CoupledPair) and isinstance(S, BoxUnion):
        return float(sum(self_mass for self_mass, _ in _coupled_box_terms(m, S)))
    if isinstance(m, MultivariateNormal) and isinstance(S, BoxUnion):
        total = 0.0
        for box in S.boxes:
            for rect in _box_rectangles(box):
                total += m.box_mass([lo for lo, _ in rect], [hi for _, hi in rect])
        return float(total)
    if isinstance(S, Predicate):
        est, _ = estimate_mass_mc(m, S, rng, mc_samples)
        return est
    raise GbpfError(f"set_mass: unsupported pair ({type(m).__name__}, {type(S).__name__})")


def estimate_mass_mc(m: Marginal, S: SupportSet, rng, n=200_000):
    """Monte Carlo mass estimate with its standard error."""
    if rng is None:
        raise GbpfError("Monte Carlo mass estimation needs an rng")
    pts = m.sample(rng, n)
    hits = np.asarray(S.contains(pts), dtype=float)
    est = float(hits.mean())
    se = float(hits.std(ddof=1) / math.sqrt(n))
    return est, se


def _box_rectangles(box):
    """Expand a box with interval-union sides into plain rectangles."""
    grids = []
    for side in box:
        if isinstance(side, IntervalUnion):
            grids.append(side.intervals)
        else:
            raise GbpfError("rectangle expansion needs interval sides")
    out = [[]]
    for g in grids:
        out = [r + [iv] for r in out for iv in g]
    return [tuple(r) for r in out]


def _coupled_box_terms(m: CoupledPair, S: BoxUnion):
    """Per-box (mass, per-component mean integrals) for a coupled pair."""
    for box in S.boxes:
        s1, s2 = box
        mass = 0.0
        mean = np.zeros(2)
        for l1 in (0, 1):
            m1 = _restrict_1d_mass(m.base, s1, m.component_region(l1))
            if m1 == 0.0:
                continue
            x1 = _restrict_1d_mean(m.base, s1, m.component_region(l1))
            for l2 in (0, 1):
                m2 = _restrict_1d_mass(m.base, s2, m.component_region(l2))
                if m2 == 0.0:
                    continue
                w = m.cell_weight(l1, l2)
                x2 = _restrict_1d_mean(m.base, s2, m.component_region(l2))
                mass += w * m1 * m2
                mean += w * np.asarray([x1 * m2, m1 * x2])
        yield mass, mean


def _intersect_1d(region, side):
    """Intersect a scalar cell region with a one-dimensional box side."""
    if isinstance(region, IntervalUnion) and isinstance(side, IntervalUnion):
        return region.intersect(side)
    if isinstance(region, IntegerSet) and isinstance(side, IntervalUnion):
        vals = np.asarray(region.values)
        return IntegerSet(vals[side.contains(vals)])
    if isinstance(region, IntegerSet) and isinstance(side, IntegerSet):
        return IntegerSet(set(region.values) & set(side.values))
    if isinstance(region, IntervalUnion) and isinstance(side, IntegerSet):
        vals = np.asarray(side.values)
        return IntegerSet(vals[region.contains(vals)])
    raise GbpfError("unsupported one-dimensional intersection")


def _restrict_1d_mass(base, side, region):
    if isinstance(region, ComplementSet):
        return set_mass(base, side) - _restrict_1d_mass(base, side, region.inner)
    return set_mass(base, _intersect_1d(region, side))


def _restrict_1d_mean(base, side, region):
    if isinstance(region, ComplementSet):
        return set_mean(base, side)[0] - _restrict_1d_mean(base, side, region.inner)
    return set_mean(base, _intersect_1d(region, side))[0]


def set_mean(m: Marginal, S: SupportSet, rng=None, mc_samples=200_000) -> np.ndarray:
    """Componentwise unnormalized first moments: integral of x_k f over S."""
    if isinstance(S, ComplementSet):
        return m.mean_vector() - set_mean(m, S.inner, rng, mc_samples)
    if isinstance(m, Continuous1D) and isinstance(S, IntervalUnion):
        total = sum(_quad_interval(lambda x: x * m.pdf(x), lo, hi) for lo, hi in S.intervals)
        return np.asarray([total])
    if isinstance(m, Discrete1D) and isinstance(S, (IntegerSet, WeightedAtoms)):
        if isinstance(S, IntegerSet):
            vals = np.asarray(S.values, dtype=float)
            return np.asarray([float(np.dot(vals, m.pmf_of(np.asarray(S.values))))]) if S.values else np.zeros(1)
        return np.asarray([
            float(sum(a * m.pmf_of(np.asarray([a]))[0] * w for a, w in S.weights))
        ])
    if isinstance(m, Discrete1D) and isinstance(S, IntervalUnion):
        inside = S.contains(m.xs)
        return np.asarray([float(np.dot(m.xs[inside], m.probs[inside]))])
    if isinstance(m, ProductContinuous) and isinstance(S, BoxUnion):
        out = np.zeros(m.d)
        for box in S.boxes:
            masses = [set_mass(c, side) for c, side in zip(m.components, box)]
            for k, (c, side) in enumerate(zip(m.components, box)):
                others = np.prod([mv for j, mv in enumerate(masses) if j != k])
                out[k] += set_mean(c, side)[0] * others
        return out
    if isinstance(m, CoupledPair) and isinstance(S, BoxUnion):
        out = np.zeros(2)
        for _, mean in _coupled_box_terms(m, S):
            out += mean
        return out
    if isinstance(m, MultivariateNormal) and isinstance(S, BoxUnion):
        if m.d != 2:
            raise GbpfError("quadrature means implemented for bivariate normal only")
        out = np.zeros(2)
        for box in S.boxes:
            for rect in _box_rectangles(box):
                (a1, b1), (a2, b2) = rect
                lim = 12.0 * math.sqrt(float(np.max(np.diag(m.sigma))))
                a1c, b1c = max(a1, m.mu[0] - lim), min(b1, m.mu[0] + lim)
                a2c, b2c = max(a2, m.mu[1] - lim), min(b2, m.mu[1] + lim)
                for k in range(2):
                    val, _ = integrate.dblquad(
                        lambda y, x, k=k: (x if k == 0 else y) * m.pdf((x, y)),
                        a1c, b1c, a2c, b2c, epsabs=1e-11,
                    )
                    out[k] += val
        return out
    if isinstance(S, Predicate):
        if rng is None:
            raise GbpfError("Monte Carlo set_mean needs an rng")
        pts = m.sample(rng, mc_samples)
        hits = np.asarray(S.contains(pts), dtype=float)
        return (pts * hits[:, None]).mean(axis=0)
    raise GbpfError(f"set_mean: unsupported pair ({type(m).__name__}, {type(S).__name__})")


def set_moment(m: Marginal, S: SupportSet, q: int) -> np.ndarray:
    """Componentwise integral of x_k**q f over S (q-th raw partial moment)."""
    if q == 1:
        return set_mean(m, S)
    if isinstance(S, ComplementSet):
        return _total_moment(m, q) - set_moment(m, S.inner, q)
    if isinstance(m, Continuous1D) and isinstance(S, IntervalUnion):
        total = sum(_quad_interval(lambda x: x ** q * m.pdf(x), lo, hi) for lo, hi in S.intervals)
        if not np.isfinite(total):
            raise GbpfError(f"moment of order {q} diverges on the set")
        return np.asarray([total])
    if isinstance(m, Discrete1D) and isinstance(S, (IntegerSet, WeightedAtoms)):
        if isinstance(S, IntegerSet):
            vals = np.asarray(S.values, dtype=float)
            return np.asarray([float(np.dot(vals ** q, m.pmf_of(np.asarray(S.values))))])
        return np.asarray([
            float(sum(a ** q * m.pmf_of(np.asarray([a]))[0] * w for a, w in S.weights))
        ])
    if isinstance(m, ProductContinuous) and isinstance(S, BoxUnion):
        out = np.zeros(m.d)
        for box in S.boxes:
            masses = [set_mass(c, side) for c, side in zip(m.components, box)]
            for k, (c, side) in enumerate(zip(m.components, box)):
                others = np.prod([mv for j, mv in enumerate(masses) if j != k])
                out[k] += set_moment(c, side, q)[0] * others
        return out
    raise GbpfError(f"set_moment: unsupported pair ({type(m).__name__}, {type(S).__name__})")


def _total_moment(m: Marginal, q: int) -> np.ndarray:
    if isinstance(m, Continuous1D):
        return set_moment(m, m.full_set(), q)
    if isinstance(m, Discrete1D):
        return set_moment(m, m.full_set(), q)
    if isinstance(m, ProductContinuous):
        return np.asarray([_total_moment(c, q)[0] for c in m.components])
    raise GbpfError("total moment unsupported for this marginal")


# -- characteristic-function integrals ---------------------------------

def _osc_quad(fun, lo, hi, theta):
    """Oscillation-aware integral of fun(x)*exp(i*theta*x) over (lo, hi)."""
    if theta == 0.0:
        return complex(_quad_interval(fun, lo, hi))
    if lo == -math.inf and hi == math.inf:
        return _osc_quad(fun, -math.inf, 0.0, theta) + _osc_quad(fun, 0.0, math.inf, theta)
    if lo == -math.inf:
        # reflect so the infinite end is on the right
        ref = _osc_quad(lambda x: fun(-x), -hi, math.inf, -theta)
        return ref
    sgn = 1.0 if theta > 0 else -1.0
    re, _ = integrate.quad(fun, lo, hi, weight="cos", wvar=abs(theta), epsabs=_QUAD_ABS_TOL, limit=400)
    im, _ = integrate.quad(fun, lo, hi, weight="sin", wvar=abs(theta), epsabs=_QUAD_ABS_TOL, limit=400)
    return complex(re, sgn * im)


def cf_integral(m: Marginal, S: SupportSet, theta) -> complex:
    """Integral of exp(i theta . x) f(x) over S (unnormalized cell CF)."""
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    if isinstance(S, ComplementSet):
        return _cf_total(m, th) - cf_integral(m, S.inner, theta)
    if isinstance(m, Continuous1D) and isinstance(S, IntervalUnion):
        return sum(_osc_quad(m.pdf, lo, hi, float(th[0])) for lo, hi in S.intervals)
    if isinstance(m, Discrete1D) and isinstance(S, (IntegerSet, WeightedAtoms)):
        if isinstance(S, IntegerSet):
            vals = np.asarray(S.values, dtype=float)
            return complex(np.sum(np.exp(1j * th[0] * vals) * m.pmf_of(np.asarray(S.values))))
        return complex(sum(
            np.exp(1j * th[0] * a) * m.pmf_of(np.asarray([a]))[0] * w for a, w in S.weights
        ))
    if isinstance(m, ProductContinuous) and isinstance(S, BoxUnion):
        total = 0j
        for box in S.boxes:
            term = 1.0 + 0j
            for c, side, t in zip(m.components, box, th):
                term *= cf_integral(c, side, t)
            total += term
        return total
    if isinstance(m, CoupledPair) and isinstance(S, BoxUnion):
        total = 0j
        for box in S.boxes:
            s1, s2 = box
            for l1 in (0, 1):
                f1 = _restrict_1d_cf(m.base, s1, m.component_region(l1), th[0])
                for l2 in (0, 1):
                    f2 = _restrict_1d_cf(m.base, s2, m.component_region(l2), th[1])
                    total += m.cell_weight(l1, l2) * f1 * f2
        return total
    raise GbpfError(f"cf_integral: unsupported pair ({type(m).__name__}, {type(S).__name__})")


def _restrict_1d_cf(base, side, region, theta):
    if isinstance(region, ComplementSet):
        return cf_integral(base, side, theta) - _restrict_1d_cf(base, side, region.inner, theta)
    return cf_integral(base, _intersect_1d(region, side), theta)


def _cf_total(m: Marginal, th) -> complex:
    if isinstance(m, Continuous1D):
        return cf_integral(m, m.full_set(), float(th[0]))
    if isinstance(m, Discrete1D):
        return cf_integral(m, m.full_set(), float(th[0]))
    if isinstance(m, ProductContinuous):
        out = 1.0 + 0j
        for c, t in zip(m.components, th):
            out *= _cf_total(c, np.asarray([t]))
        return out
    if isinstance(m, CoupledPair):
        return cf_integral(m, BoxUnion([(m.base.full_set(), m.base.full_set())]), th)
    raise GbpfError("cf unsupported for this marginal")


# -- complements --------------------------------------------------------

def complement_set(m: Marginal, S: SupportSet) -> SupportSet:
    """The complement of S within the marginal's support."""
    if isinstance(S, ComplementSet):
        return S.inner
    if isinstance(m, Continuous1D) and isinstance(S, IntervalUnion):
        return S.complement(*m.support)
    if isinstance(m, Discrete1D) and isinstance(S, IntegerSet):
        return IntegerSet(set(int(v) for v in m.xs) - set(S.values))
    if isinstance(m, Discrete1D) and isinstance(S, WeightedAtoms):
        w = S.weight_map()
        out = {}
        for a in m.xs:
            r = 1.0 - w.get(int(a), 0.0)
            if r > 1e-15:
                out[int(a)] = r
        return WeightedAtoms(out)
    return ComplementSet(S)


# -- restricted sampling -------------------------------------------------

def restricted_sample(m: Marginal, S: SupportSet, rng, size=None):
    """Draw from the marginal restricted (and renormalized) to S.

    One-dimensional continuous sets use exact inverse-CDF sampling on the
    interval union; discrete sets use renormalized atom choice; box and
    predicate sets fall back to per-box component sampling or capped
    rejection.
    """
    n = 1 if size is None else int(size)
    out = _restricted_sample_n(m, S, rng, n)
    return out[0] if size is None else out


def _restricted_sample_n(m, S, rng, n):
    if isinstance(m, Continuous1D) and isinstance(S, IntervalUnion):
        return _sample_interval_union(m, S, rng, n).reshape(n, 1)
    if isinstance(m, Discrete1D) and isinstance(S, (IntegerSet, WeightedAtoms)):
        if isinstance(S, IntegerSet):
            vals = np.asarray(S.values)
            pr = m.pmf_of(vals)
        else:
            vals = np.asarray([a for a, _ in S.weights])
            pr = m.pmf_of(vals) * np.asarray([w for _, w in S.weights])
        tot = pr.sum()
        if tot <= 0:
            raise GbpfError("restricted sampling from a zero-mass set")
        return rng.choice(vals, size=n, p=pr / tot).reshape(n, 1)
    if isinstance(m, (ProductContinuous, CoupledPair)) and isinstance(S, BoxUnion):
        masses = np.asarray([_box_mass(m, box) for box in S.boxes])
        tot = masses.sum()
        if tot <= 0:
            raise GbpfError("restricted sampling from a zero-mass set")
        counts = rng.multinomial(n, masses / tot)
        parts = []
        for box, cnt in zip(S.boxes, counts):
            if cnt:
                parts.append(_sample_box(m, box, rng, cnt))
        pts = np.concatenate(parts, axis=0) if parts else np.empty((0, m.d))
        return pts[rng.permutation(n)]
    # generic rejection (predicates, complements of boxes, correlated normal)
    got = []
    remaining = n
    attempts = 0
    while remaining > 0:
        batch = max(1024, 4 * remaining)
        attempts += batch
        if attempts > _REJECTION_CAP:
            raise RejectionCapExceeded(
                f"rejection sampling exceeded {_REJECTION_CAP} attempts"
            )
        pts = m.sample(rng, batch)
        keep = np.asarray(S.contains(pts), dtype=bool)
        sel = pts[keep]
        if sel.shape[0]:
            got.append(sel[:remaining])
            remaining -= min(remaining, sel.shape[0])
    return np.concatenate(got, axis=0)


def _box_mass(m, box):
    if isinstance(m, CoupledPair):
        return sum(mass for mass, _ in _coupled_box_terms(m, BoxUnion([box])))
    return float(np.prod([set_mass(c, side) for c, side in zip(m.components, box)]))


def _sample_box(m, box, rng, n):
    if isinstance(m, ProductContinuous):
        cols = [
            _restricted_sample_n(c, side, rng, n)[:, 0]
            for c, side in zip(m.components, box)
        ]
        return np.column_stack(cols)
    if isinstance(m, CoupledPair):
        s1, s2 = box
        cells = [(l1, l2) for l1 in (0, 1) for l2 in (0, 1)]
        pr = np.asarray([
            m.cell_weight(l1, l2)
            * _restrict_1d_mass(m.base, s1, m.component_region(l1))
            * _restrict_1d_mass(m.base, s2, m.component_region(l2))
            for l1, l2 in cells
        ])
        tot = pr.sum()
        counts = rng.multinomial(n, pr / tot)
        parts = []
        for (l1, l2), cnt in zip(cells, counts):
            if not cnt:
                continue
            r1 = _intersect_region(m, s1, l1)
            r2 = _intersect_region(m, s2, l2)
            x1 = _restricted_sample_n(m.base, r1, rng, cnt)[:, 0]
            x2 = _restricted_sample_n(m.base, r2, rng, cnt)[:, 0]
            parts.append(np.column_stack([x1, x2]))
        pts = np.concatenate(parts, axis=0)
        return pts[rng.permutation(n)]
    raise GbpfError("box sampling unsupported for this marginal")


def _intersect_region(m: CoupledPair, side, level):
    region = m.component_region(level)
    if isinstance(region, ComplementSet):
        inner = _intersect_1d(region.inner, side)
        if isinstance(side, IntervalUnion) and isinstance(inner, IntervalUnion):
            return side.subtract(inner)
        if isinstance(inner, IntegerSet):
            if isinstance(side, IntervalUnion):
                vals = np.asarray(m.base.xs)
                side_vals = vals[side.contains(vals)]
            else:
                side_vals = np.asarray(side.values)
            return IntegerSet(set(int(v) for v in side_vals) - set(inner.values))
        raise GbpfError("unsupported complement intersection")
    return _intersect_1d(region, side)


def _sample_interval_union(m: Continuous1D, S: IntervalUnion, rng, n):
    los = np.asarray([m.cdf(lo) for lo, _ in S.intervals])
    his = np.asarray([m.cdf(hi) for _, hi in S.intervals])
    w = his - los
    cum = np.concatenate([[0.0], np.cumsum(w)])
    total = cum[-1]
    if total <= 0:
        raise GbpfError("restricted sampling from a zero-mass set")
    u = rng.random(n) * total
    idx = np.clip(np.searchsorted(cum, u, side="right") - 1, 0, len(w) - 1)
    local = los[idx] + (u - cum[idx])
    return np.asarray(m.quantile(local), dtype=float)


def coupled_pair_sample(m: CoupledPair, rng, size=None):
    """Draw pairs from the coupled bivariate law (cell choice + restricted draws)."""
    n = 1 if size is None else int(size)
    cells = [(l1, l2) for l1 in (0, 1) for l2 in (0, 1)]
    pr = np.asarray([m.cell_probability(l1, l2) for l1, l2 in cells])
    counts = rng.multinomial(n, pr / pr.sum())
    parts = []
    for (l1, l2), cnt in zip(cells, counts):
        if not cnt:
            continue
        x1 = _restricted_sample_n(m.base, _as_sampling_region(m, l1), rng, cnt)[:, 0]
        x2 = _restricted_sample_n(m.base, _as_sampling_region(m, l2), rng, cnt)[:, 0]
        parts.append(np.column_stack([x1, x2]))
    pts = np.concatenate(parts, axis=0)
    pts = pts[rng.permutation(n)]
    return pts[0] if size is None else pts


def _as_sampling_region(m: CoupledPair, level):
    region = m.component_region(level)
    if isinstance(region, ComplementSet):
        return complement_set(m.base, region.inner)
    return region
