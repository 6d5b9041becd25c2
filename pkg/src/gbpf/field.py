"""Random fields on integer lattices driven by independent latent axes.

A field over an n-dimensional lattice carries one independent latent
binary sequence per axis; the n bits at a site select one of 2**n
partition cells, and the site value is drawn from the marginal restricted
to that cell.  The lagged covariance decomposes into rank-one coefficient
matrices (one per non-empty subset of the axes that moved) times products
of the per-axis latent covariances, plus, when some coordinates coincide,
a lag-independent term from the shared bits.  Everything here is checked
against a brute-force enumeration oracle.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import GbpfError, SizeGuardExceeded
from .gbp import BinaryPath, GbpModel, config_probability, sample_path
from .marginal import Marginal, cf_integral, restricted_sample
from .partition import Partition

__all__ = [
    "FieldSpec",
    "FieldSample",
    "CovarianceDecomposition",
    "simulate_field",
    "covariance_decomposition",
    "theoretical_field_cov",
    "field_cov_oracle",
    "check_zero_conditions",
    "ZeroConditionReport",
    "field_joint_cf",
]

_ORACLE_AXES_CAP = 6
_CF_BITS_CAP = 12


@dataclass
class FieldSpec:
    """Marginal + partition + one latent model per axis + lattice extents."""

    marginal: Marginal
    partition: Partition
    gbps: tuple
    extents: tuple

    def __post_init__(self):
        self.gbps = tuple(self.gbps)
        self.extents = tuple(int(t) for t in self.extents)
        if len(self.gbps) != self.partition.n:
            raise GbpfError("one latent model per partition axis is required")
        if len(self.extents) != self.partition.n:
            raise GbpfError("one extent per axis is required")
        if any(t < 1 for t in self.extents):
            raise GbpfError("extents must be positive")
        for k, (g, p) in enumerate(zip(self.gbps, self.partition.probs)):
            if abs(g.p - p) > 1e-8:
                raise GbpfError(f"axis {k}: latent p {g.p!r} != partition prob {p!r}")
        if np.prod(self.extents, dtype=float) * self.marginal.d > 1e8:
            raise GbpfError("lattice exceeds the memory budget (1e8 cells)")

    @property
    def n(self):
        return self.partition.n

    @property
    def d(self):
        return self.marginal.d


@dataclass(frozen=True)
class FieldSample:
    """A realized field: values, the per-axis latent paths, provenance."""

    values: np.ndarray          # shape extents + (d,)
    latents: tuple              # BinaryPath per axis
    seed: object

    @property
    def extents(self):
        return self.values.shape[:-1]

    def component(self, k=0):
        return self.values[..., k]


def simulate_field(spec: FieldSpec, rng: np.random.Generator, seed=None) -> FieldSample:
    """Simulate the field on the full lattice.

    Latent paths are drawn axis by axis, then sites are filled cell by
    cell (cells in lexicographic bit order, sites in row-major order), so
    output is a deterministic function of the rng stream.
    """
    latents = tuple(
        sample_path(g, t, rng, seed=seed) for g, t in zip(spec.gbps, spec.extents)
    )
    bit_grids = np.meshgrid(*[bp.bits for bp in latents], indexing="ij")
    values = np.empty(spec.extents + (spec.d,))
    for key in itertools.product((0, 1), repeat=spec.n):
        mask = np.ones(spec.extents, dtype=bool)
        for grid, bit in zip(bit_grids, key):
            mask &= grid == bit
        cnt = int(mask.sum())
        if cnt:
            draws = np.atleast_2d(
                restricted_sample(spec.marginal, spec.partition.cells[key], rng, size=cnt)
            )
            values[mask] = draws
    return FieldSample(values, latents, seed)


# ----------------------------------------------------------------------
# Exact covariance
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class CovarianceDecomposition:
    """Lagged covariance as sum_K M_K prod_k C_k plus a constant term.

    ``terms`` maps each non-empty frozenset K of moving axes to its
    coefficient matrix; with zero-lag axes present the matrices are
    state-averaged over the shared bits and ``constant`` carries the
    lag-independent contribution of those shared bits (zero when every
    coordinate moves).
    """

    terms: dict
    constant: np.ndarray
    zero_axes: tuple

    def evaluate(self, spec: FieldSpec, lag) -> np.ndarray:
        lag = tuple(int(v) for v in lag)
        out = self.constant.copy()
        for K, mat in self.terms.items():
            f = 1.0
            for k in K:
                f *= spec.gbps[k].cov(abs(lag[k]))
            out = out + mat * f
        return out


def _cell_means(part: Partition):
    return {k: part.means[k] / part.masses[k] for k in part.cells}


def _axis_prob(part, axis, bit):
    return part.probs[axis] if bit else 1.0 - part.probs[axis]


def covariance_decomposition(spec: FieldSpec, lag) -> CovarianceDecomposition:
    """Exact decomposition of cov(X(t), X(s)) for t - s = lag.

    With O the set of axes where the lag is zero, the matrices are

        M_K = sum over shared-bit states of state probability times the
              outer square of the alternating cell-mean sum m_K(state),

    and the constant term is the covariance of the conditional site mean
    over the shared-bit states.  Validated against the enumeration oracle.
    """
    lag = tuple(int(v) for v in lag)
    n = spec.n
    if len(lag) != n:
        raise ValueError("lag length must match the number of axes")
    if all(v == 0 for v in lag):
        raise ValueError("zero lag is the marginal variance, not a decomposition")
    part = spec.partition
    zero_axes = tuple(k for k in range(n) if lag[k] == 0)
    moving = [k for k in range(n) if lag[k] != 0]
    dmeans = _cell_means(part)
    dim = spec.d

    keys = list(itertools.product((0, 1), repeat=n))
    terms = {}
    for r in range(1, len(moving) + 1):
        for K in itertools.combinations(moving, r):
            mat = np.zeros((dim, dim))
            for shared in itertools.product((0, 1), repeat=len(zero_axes)):
                w = 1.0
                for a, b in zip(zero_axes, shared):
                    w *= _axis_prob(part, a, b)
                vec = np.zeros(dim)
                for key in keys:
                    if any(key[a] != b for a, b in zip(zero_axes, shared)):
                        continue
                    sign = (-1.0) ** (len(K) - sum(key[i] for i in K))
                    prob = 1.0
                    for j in moving:
                        if j not in K:
                            prob *= _axis_prob(part, j, key[j])
                    vec = vec + sign * prob * dmeans[key]
                mat = mat + w * np.outer(vec, vec)
            terms[frozenset(K)] = mat

    const = np.zeros((dim, dim))
    if zero_axes:
        mean_total = np.zeros(dim)
        acc = np.zeros((dim, dim))
        for shared in itertools.product((0, 1), repeat=len(zero_axes)):
            w = 1.0
            for a, b in zip(zero_axes, shared):
                w *= _axis_prob(part, a, b)
            cond = np.zeros(dim)
            for key in keys:
                if any(key[a] != b for a, b in zip(zero_axes, shared)):
                    continue
                prob = 1.0
                for j in moving:
                    prob *= _axis_prob(part, j, key[j])
                cond = cond + prob * dmeans[key]
            acc = acc + w * np.outer(cond, cond)
            mean_total = mean_total + w * cond
        const = acc - np.outer(mean_total, mean_total)

    return CovarianceDecomposition(terms, const, zero_axes)


def theoretical_field_cov(spec: FieldSpec, lag) -> np.ndarray:
    """Exact d x d covariance matrix of (X(t), X(s)) at t - s = lag.

    Zero lag returns the marginal covariance.
    """
    lag = tuple(int(v) for v in lag)
    if all(v == 0 for v in lag):
        return spec.marginal.covariance()
    dec = covariance_decomposition(spec, lag)
    return dec.evaluate(spec, lag)


def field_cov_oracle(spec: FieldSpec, lag) -> np.ndarray:
    """Brute-force covariance by enumerating all latent pair states.

    Shared axes (zero lag) use one bit with its Bernoulli weight; moving
    axes use the exact pair law of the latent sequence.  This is the
    ground truth the closed forms are tested against; axes capped at 6.
    """
    lag = tuple(int(v) for v in lag)
    n = spec.n
    if n > _ORACLE_AXES_CAP:
        raise SizeGuardExceeded(f"oracle supports up to {_ORACLE_AXES_CAP} axes")
    if all(v == 0 for v in lag):
        return spec.marginal.covariance()
    part = spec.partition
    dmeans = _cell_means(part)
    dim = spec.d

    def pair_prob(axis, a, b):
        if lag[axis] == 0:
            return _axis_prob(part, axis, a) if a == b else 0.0
        base = _axis_prob(part, axis, a) * _axis_prob(part, axis, b)
        return base + (-1.0) ** (a + b) * spec.gbps[axis].cov(abs(lag[axis]))

    second = np.zeros((dim, dim))
    for key_t in itertools.product((0, 1), repeat=n):
        for key_s in itertools.product((0, 1), repeat=n):
            w = 1.0
            for axis in range(n):
                w *= pair_prob(axis, key_t[axis], key_s[axis])
                if w == 0.0:
                    break
            if w:
                second += w * np.outer(dmeans[key_t], dmeans[key_s])
    mean = np.zeros(dim)
    for key in itertools.product((0, 1), repeat=n):
        mean = mean + part.masses[key] * dmeans[key]
    return second - np.outer(mean, mean)


# ----------------------------------------------------------------------
# Zero-covariance certificates
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ZeroConditionReport:
    component: int
    merged_conditions: dict       # axes tuple -> condition holds
    fully_balanced: bool
    product_term_zero: bool | None  # n=2 exact criterion for the product term
    certified_zero: tuple         # frozensets K with row `component` forced to 0
    observed_max: dict            # frozenset K -> max |entry| in the certified row
    consistent: bool

    def describe(self):
        held = sorted(ax for ax, ok in self.merged_conditions.items() if ok)
        cert = sorted(tuple(sorted(K)) for K in self.certified_zero)
        return (
            f"component {self.component}: merged moment condition holds on "
            f"{held}; balanced cells: {self.fully_balanced}; "
            f"product-term criterion: {self.product_term_zero}; "
            f"certified zero rows for K in {cert}; consistent: {self.consistent}"
        )


def check_zero_conditions(spec: FieldSpec, component: int = 0,
                          tol: float = 1e-6) -> ZeroConditionReport:
    """Evaluate the proportional-moment conditions and verify forced zeros.

    For the chosen component, three families of integral conditions are
    evaluated (tolerance ``tol``, scaled):

    * the merged-cell condition over every non-empty axis subset K': each
      merged cell's first-moment integral equals the total mean times its
      Bernoulli mass; when it holds, every coefficient row with K inside
      K' is forced to zero;
    * full per-cell balance, which kills every coefficient row at every
      lag;
    * for two axes, the exact linear combination of centered cell moments
      that makes the product-term coefficient vanish.

    Claimed zeros are then cross-checked against the exact decomposition
    at a generic all-moving lag.
    """
    part = spec.partition
    n = spec.n
    mu = spec.marginal.mean_vector()
    scale = max(1.0, float(np.max(np.abs(mu))),
                *(float(np.max(np.abs(v))) for v in part.means.values()))

    def merged_holds(axes):
        for bits in itertools.product((0, 1), repeat=len(axes)):
            got = part.merged_mean(axes, bits)[component]
            frac = 1.0
            for a, b in zip(axes, bits):
                frac *= _axis_prob(part, a, b)
            if abs(got - mu[component] * frac) > tol * scale:
                return False
        return True

    merged_conditions = {}
    certified = set()
    for r in range(1, n + 1):
        for axes in itertools.combinations(range(n), r):
            ok = merged_holds(axes)
            merged_conditions[axes] = ok
            if ok:
                for rr in range(1, r + 1):
                    certified.update(frozenset(K) for K in itertools.combinations(axes, rr))

    balanced = all(
        abs(part.means[key][component] - mu[component] * part.masses[key]) <= tol * scale
        for key in part.cells
    )
    if balanced:
        for r in range(1, n + 1):
            certified.update(frozenset(K) for K in itertools.combinations(range(n), r))

    product_zero = None
    if n == 2:
        # Centered cell moments; the product-term row vanishes iff the
        # weighted alternating combination below does.
        cen = {k: part.means[k][component] - mu[component] * part.masses[k]
               for k in part.cells}
        p1, p2 = part.probs
        q1, q2 = 1.0 - p1, 1.0 - p2
        crit = (q1 * p2 * cen[(1, 0)] + p1 * q2 * cen[(0, 1)]
                - q1 * q2 * cen[(1, 1)] - p1 * p2 * cen[(0, 0)])
        product_zero = abs(crit) <= tol * scale
        if product_zero:
            certified.add(frozenset({0, 1}))

    generic_lag = tuple(1 for _ in range(n))
    dec = covariance_decomposition(spec, generic_lag)
    observed = {}
    consistent = True
    for K in sorted(certified, key=sorted):
        row = np.abs(dec.terms[K][component, :])
        observed[K] = float(row.max())
        if observed[K] > 1e-9 * max(1.0, scale ** 2):
            consistent = False
    return ZeroConditionReport(
        component, merged_conditions, balanced, product_zero,
        tuple(sorted(certified, key=sorted)), observed, consistent,
    )


# ----------------------------------------------------------------------
# Joint characteristic function
# ----------------------------------------------------------------------

def field_joint_cf(spec: FieldSpec, thetas, sites) -> complex:
    """Joint characteristic function at lattice sites by latent enumeration.

    One latent configuration is enumerated per axis over the distinct
    coordinates appearing among the sites; each configuration contributes
    its exact probability times the product of restricted-cell
    characteristic functions at the sites.  The total enumerated bit count
    is capped at 12.
    """
    sites = [tuple(int(c) for c in s) for s in sites]
    if any(len(s) != spec.n for s in sites):
        raise ValueError("site dimension does not match the number of axes")
    thetas = [np.atleast_1d(np.asarray(t, dtype=float)) for t in thetas]
    if len(thetas) != len(sites):
        raise ValueError("one theta per site is required")
    if any(t.size != spec.d for t in thetas):
        raise ValueError("theta dimension does not match the marginal")

    coords = [sorted({s[i] for s in sites}) for i in range(spec.n)]
    total_bits = sum(len(c) for c in coords)
    if total_bits > _CF_BITS_CAP:
        raise SizeGuardExceeded(f"field CF supports up to {_CF_BITS_CAP} latent bits")

    part = spec.partition
    cell_cf = {}

    def cf_for(key, j):
        tag = (key, j)
        if tag not in cell_cf:
            cell_cf[tag] = (
                cf_integral(spec.marginal, part.cells[key], thetas[j]) / part.masses[key]
            )
        return cell_cf[tag]

    axis_configs = []
    for i in range(spec.n):
        cfgs = []
        cs = coords[i]
        for bits in itertools.product((0, 1), repeat=len(cs)):
            ones = [c for c, b in zip(cs, bits) if b]
            zeros = [c for c, b in zip(cs, bits) if not b]
            prob = config_probability(spec.gbps[i], ones, zeros)
            cfgs.append((dict(zip(cs, bits)), prob))
        axis_configs.append(cfgs)

    total = 0j
    for combo in itertools.product(*axis_configs):
        prob = 1.0
        for _, p in combo:
            prob *= p
        if prob == 0.0:
            continue
        term = complex(prob)
        for j, site in enumerate(sites):
            key = tuple(combo[i][0][site[i]] for i in range(spec.n))
            term *= cf_for(key, j)
        total += term
    return total
