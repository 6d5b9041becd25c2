"""Support partitions indexed by latent bit patterns.

A field over n latent axes needs the marginal's support cut into 2**n
disjoint cells whose masses are Bernoulli products of the axis
probabilities.  Cells may additionally be *mean-matched* on a subset of
axes (their first-moment integrals proportional to their masses), which
kills the corresponding coefficient matrices in the covariance
decomposition.  Three constructions are provided:

* ``UserCells``       - caller supplies all 2**n disjoint cells;
* ``SymmetricNested`` - mirror-symmetric nested refinement around a
                        center of symmetry (symmetric densities);
* ``BalancedNested``  - nested refinement through balanced subsets, which
                        works for any scalar continuous density.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import GbpfError, NotRepresentable
from .marginal import (
    BoxUnion,
    Continuous1D,
    Discrete1D,
    IntegerSet,
    IntervalUnion,
    Marginal,
    ProductContinuous,
    SupportSet,
    WeightedAtoms,
    set_mass,
    set_mean,
)

__all__ = [
    "Partition",
    "UserCells",
    "SymmetricNested",
    "BalancedNested",
    "find_balanced_subset",
    "build_partition",
    "two_set_partition",
]

_MASS_TOL = 1e-8
_MEAN_TOL = 1e-6


# ----------------------------------------------------------------------
# Balanced subsets
# ----------------------------------------------------------------------

def _quantile_window(m: Continuous1D, A: IntervalUnion, a: float, b: float) -> IntervalUnion:
    """Slice of A between conditional-mass fractions a and b (0 <= a < b <= 1)."""
    los = np.asarray([m.cdf(lo) for lo, _ in A.intervals])
    his = np.asarray([m.cdf(hi) for _, hi in A.intervals])
    w = his - los
    cum = np.concatenate([[0.0], np.cumsum(w)])
    total = cum[-1]
    if total <= 0:
        raise GbpfError("window of a zero-mass set")

    def locate(frac):
        target = frac * total
        i = int(np.clip(np.searchsorted(cum, target, side="right") - 1, 0, len(w) - 1))
        u = los[i] + (target - cum[i])
        return i, float(m.quantile(min(max(u, 0.0), 1.0)))

    ia, xa = locate(a)
    ib, xb = locate(b)
    pieces = []
    if ia == ib:
        if xa < xb:
            pieces.append((xa, xb))
    else:
        if xa < A.intervals[ia][1]:
            pieces.append((xa, A.intervals[ia][1]))
        pieces.extend(A.intervals[ia + 1:ib])
        if A.intervals[ib][0] < xb:
            pieces.append((A.intervals[ib][0], xb))
    return IntervalUnion(pieces)


def find_balanced_subset(m: Marginal, A: SupportSet, p: float, g="mass-only") -> SupportSet:
    """A subset of A carrying fraction p of A's mass and, optionally, of its
    first-moment integral along one coordinate.

    The construction slides a window of fixed conditional mass p across A;
    the windowed moment integral is continuous and monotone in the window
    position, so the matching position is located by bisection.  ``g`` is
    either ``"mass-only"`` or a coordinate index.

    Integer-atom sets cannot hit an arbitrary mass fraction; they raise
    :class:`NotRepresentable`.
    """
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    if isinstance(m, Discrete1D) or isinstance(A, (IntegerSet, WeightedAtoms)):
        raise NotRepresentable("discrete atoms cannot be split at an arbitrary mass fraction")
    if isinstance(m, ProductContinuous):
        if g == "mass-only":
            raise GbpfError("product marginals need a coordinate for balancing")
        k = int(g)
        comp = m.components[k]
        win = find_balanced_subset(comp, comp.full_set(), p, g=0)
        sides = [c.full_set() for c in m.components]
        sides[k] = win
        return BoxUnion([tuple(sides)])
    if not isinstance(m, Continuous1D) or not isinstance(A, IntervalUnion):
        raise GbpfError("balanced subsets implemented for scalar continuous marginals")

    if g == "mass-only":
        return _quantile_window(m, A, 0.0, p)

    mass_A = set_mass(m, A)
    target = p * set_mean(m, A)[0]
    scale = max(1.0, math.sqrt(float(m.covariance()[0, 0])))

    def G(s):
        return set_mean(m, _quantile_window(m, A, s, s + p))[0] - target

    lo, hi = 0.0, 1.0 - p
    glo, ghi = G(lo), G(hi)
    if abs(glo) <= _MEAN_TOL * scale:
        s = lo
    elif abs(ghi) <= _MEAN_TOL * scale:
        s = hi
    elif glo > 0 or ghi < 0:
        raise GbpfError("balanced window target not bracketed; integrand inconsistent")
    else:
        s = brentq(G, lo, hi, xtol=1e-14, rtol=8.9e-16)
    window = _quantile_window(m, A, s, s + p)

    got_mass = set_mass(m, window)
    if abs(got_mass - p * mass_A) > _MASS_TOL:
        raise GbpfError("balanced window missed the mass target")
    if abs(set_mean(m, window)[0] - target) > _MEAN_TOL * scale:
        raise GbpfError("balanced window missed the moment target")
    return window


# ----------------------------------------------------------------------
# Partition
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Partition:
    """2**n disjoint cells keyed by bit patterns, with masses and moments.

    ``masses[key]`` matches the Bernoulli product of the axis
    probabilities; ``means[key]`` holds the unnormalized first-moment
    integral over the cell.
    """

    probs: tuple
    cells: dict
    masses: dict
    means: dict

    @property
    def n(self):
        return len(self.probs)

    @property
    def d(self):
        return len(next(iter(self.means.values())))

    def cell_mean_vector(self, key) -> np.ndarray:
        """Conditional mean of the cell (set mean over mass)."""
        return self.means[key] / self.masses[key]

    def product_mass(self, key) -> float:
        out = 1.0
        for p, bit in zip(self.probs, key):
            out *= p if bit else 1.0 - p
        return out

    def merged_mean(self, axes, bits) -> np.ndarray:
        """First-moment integral of the union of cells matching ``bits`` on ``axes``."""
        out = np.zeros(self.d)
        for key, mean in self.means.items():
            if all(key[a] == b for a, b in zip(axes, bits)):
                out += mean
        return out


@dataclass(frozen=True)
class UserCells:
    cells: dict  # bit tuple -> SupportSet


@dataclass(frozen=True)
class SymmetricNested:
    center: float
    axes: tuple | None = None  # mean-matched axes (0-based); None = all


@dataclass(frozen=True)
class BalancedNested:
    axes: tuple | None = None


def _axis_order(n, matched_axes):
    matched = tuple(sorted(matched_axes)) if matched_axes is not None else tuple(range(n))
    if any(a < 0 or a >= n for a in matched):
        raise ValueError("axis index out of range")
    rest = tuple(a for a in range(n) if a not in matched)
    return matched, matched + rest


def _split_mass_only(m, S, p):
    left = _quantile_window(m, S, 0.0, p)
    return left, S.subtract(left)


def build_partition(m: Marginal, probs, mode) -> Partition:
    """Build and validate a support partition for ``n = len(probs)`` axes.

    Cell masses must match the Bernoulli products within 1e-8 and cells
    must be pairwise disjoint.  For the nested modes, every merged cell
    over the mean-matched axes additionally satisfies the proportional
    first-moment condition within 1e-6 (scaled by the marginal's standard
    deviation).
    """
    probs = tuple(float(p) for p in probs)
    if not probs or not all(0 < p < 1 for p in probs):
        raise ValueError("axis probabilities must lie in (0, 1)")
    n = len(probs)

    if isinstance(mode, UserCells):
        cells = {tuple(int(b) for b in k): v for k, v in mode.cells.items()}
        if sorted(cells) != sorted(itertools.product((0, 1), repeat=n)):
            raise ValueError(f"user cells must cover all {2 ** n} bit patterns")
        matched = ()
    elif isinstance(mode, (SymmetricNested, BalancedNested)):
        if not isinstance(m, Continuous1D):
            raise GbpfError("nested partitions are implemented for scalar continuous marginals")
        matched, order = _axis_order(n, mode.axes)
        cells = _build_nested(m, probs, mode, matched, order)
    else:
        raise TypeError(f"unknown partition mode {mode!r}")

    masses = {k: float(set_mass(m, S)) for k, S in cells.items()}
    means = {k: np.atleast_1d(set_mean(m, S)) for k, S in cells.items()}
    part = Partition(probs, cells, masses, means)
    _validate_partition(m, part, matched)
    return part


def _build_nested(m, probs, mode, matched, order):
    symmetric = isinstance(mode, SymmetricNested)
    if symmetric:
        c = float(mode.center)
        lo, hi = m.support
        ts = np.linspace(0.0, (hi - lo) * 0.25 if math.isfinite(hi - lo) else 4.0, 17)[1:]
        asym = max(abs(m.pdf(c + t) - m.pdf(c - t)) for t in ts)
        if asym > 1e-8:
            raise GbpfError("density is not symmetric about the given center")
        upper = IntervalUnion([(c, hi)])
        halves = {(): upper}
    else:
        halves = {(): m.full_set()}

    q = len(matched)
    # Mean-matched stage: refine along matched axes, in the upper
    # half-space (symmetric mode) or with balanced windows (general mode).
    for j in range(q):
        p = probs[order[j]]
        nxt = {}
        for key, S in halves.items():
            if symmetric:
                one = _quantile_window(m, S, 0.0, p)
            else:
                one = find_balanced_subset(m, S, p, g=0)
            nxt[key + (1,)] = one
            nxt[key + (0,)] = S.subtract(one)
        halves = nxt
    if symmetric:
        c = float(mode.center)
        halves = {k: IntervalUnion(list(S.intervals) + list(S.reflect(c).intervals))
                  for k, S in halves.items()}
    # Mass-only stage for the remaining axes.
    for j in range(q, len(order)):
        p = probs[order[j]]
        nxt = {}
        for key, S in halves.items():
            one, zero = _split_mass_only(m, S, p)
            nxt[key + (1,)] = one
            nxt[key + (0,)] = zero
        halves = nxt
    # Reindex from processing order to axis order.
    cells = {}
    for key, S in halves.items():
        full = [0] * len(order)
        for pos, axis in enumerate(order):
            full[axis] = key[pos]
        cells[tuple(full)] = S
    return cells


def _validate_partition(m, part: Partition, matched):
    total = sum(part.masses.values())
    if abs(total - 1.0) > _MASS_TOL:
        raise GbpfError(f"partition masses sum to {total!r}, not 1")
    for key, mass in part.masses.items():
        want = part.product_mass(key)
        if abs(mass - want) > _MASS_TOL:
            raise GbpfError(f"cell {key} mass {mass!r} != Bernoulli product {want!r}")
    _check_disjoint(m, part)
    if matched:
        mu = m.mean_vector()
        scale = max(1.0, math.sqrt(float(np.max(np.diag(m.covariance())))))
        for bits in itertools.product((0, 1), repeat=len(matched)):
            got = part.merged_mean(matched, bits)
            frac = 1.0
            for a, b in zip(matched, bits):
                frac *= part.probs[a] if b else 1.0 - part.probs[a]
            if np.max(np.abs(got - mu * frac)) > _MEAN_TOL * scale:
                raise GbpfError(
                    f"merged cell {dict(zip(matched, bits))} misses the moment condition"
                )


def _check_disjoint(m, part: Partition):
    keys = list(part.cells)
    for i, ki in enumerate(keys):
        for kj in keys[i + 1:]:
            a, b = part.cells[ki], part.cells[kj]
            if isinstance(a, IntervalUnion) and isinstance(b, IntervalUnion):
                overlap = a.intersect(b)
                if overlap.intervals and set_mass(m, overlap) > 1e-10:
                    raise GbpfError(f"cells {ki} and {kj} overlap")
    atoms = {}
    for key, S in part.cells.items():
        if isinstance(S, WeightedAtoms):
            for atom, w in S.weights:
                atoms[atom] = atoms.get(atom, 0.0) + w
        elif isinstance(S, IntegerSet):
            for atom in S.values:
                atoms[atom] = atoms.get(atom, 0.0) + 1.0
    for atom, w in atoms.items():
        if w > 1.0 + 1e-9:
            raise GbpfError(f"atom {atom} oversubscribed across cells (weight {w})")


def two_set_partition(m: Marginal, A: SupportSet, p: float) -> Partition:
    """The n=1 partition {A, complement of A} used by scalar processes."""
    from .marginal import complement_set

    Ac = complement_set(m, A)
    cells = {(1,): A, (0,): Ac}
    masses = {k: float(set_mass(m, S)) for k, S in cells.items()}
    means = {k: np.atleast_1d(set_mean(m, S)) for k, S in cells.items()}
    if abs(masses[(1,)] - p) > _MASS_TOL:
        raise GbpfError(f"set mass {masses[(1,)]!r} does not match p={p!r}")
    return Partition((float(p),), cells, masses, means)
