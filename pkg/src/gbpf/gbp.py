"""Correlated binary sequences with a prescribed covariance.

The latent driver of every process and field in this package is a
stationary {0,1}-valued sequence with P(bit = 1) = p and
cov(bit_i, bit_j) = C(|i-j|).  Its finite-dimensional law is expressed
through two set operators:

* ``l_operator`` multiplies ``p + C(gap)/p`` over consecutive gaps of an
  index set (1/p for the empty set, 1 for singletons);
* ``d_operator`` is the alternating inclusion-exclusion sum of the first
  over subsets of the "zero" positions, and ``p * D(ones, zeros)`` is the
  probability of a configuration.

Sampling uses the sequence's conditioned renewal structure: distances
between successive ones are i.i.d. draws from a gap law recovered by a
quadratic-time recursion, verified here against the exact (exponential)
subset-sum operator.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy import signal

from .covariance import CovarianceFunction, ValidityReport, check_assumption
from .errors import (
    CovarianceNotAdmissible,
    GbpfError,
    NegativeGapProbability,
    SizeGuardExceeded,
)

__all__ = [
    "GbpModel",
    "GapTables",
    "BinaryPath",
    "l_operator",
    "d_operator",
    "config_probability",
    "build_gap_tables",
    "verify_well_defined",
    "sample_path",
]

logger = logging.getLogger(__name__)

# Negative gap-law values in [-CLAMP_TOL, 0) are treated as roundoff and
# clamped to zero; anything below is a model failure, not noise.
_CLAMP_TOL = 1e-9

_D_SIZE_CAP = 20


@dataclass(frozen=True)
class GbpModel:
    """A (p, C) pair together with its admissibility verdict.

    Construct through :meth:`create`, which runs the admissibility check
    and refuses inadmissible pairs unless ``unchecked=True``; unchecked
    models are still gated at sampling time by non-negativity of the gap
    law.
    """

    p: float
    cov: CovarianceFunction
    validity: ValidityReport
    unchecked: bool = False
    _tables: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def create(cls, p, cov, unchecked=False, horizon=10_000):
        if not 0 < p < 1:
            raise ValueError("p must lie in (0, 1)")
        report = check_assumption(cov, p, horizon=horizon)
        if not report.passed and not unchecked:
            raise CovarianceNotAdmissible(report)
        return cls(float(p), cov, report, bool(unchecked))

    def cstar(self, lag):
        """Normalized covariance C(lag)/p."""
        return self.cov(lag) / self.p

    def gap_tables(self, n_max: int) -> "GapTables":
        """Gap tables valid to at least ``n_max``, memoized on the model."""
        best = self._tables.get("tables")
        if best is None or best.n_max < n_max:
            best = build_gap_tables(self, n_max)
            self._tables["tables"] = best
        return best


def _sorted_unique(indices):
    out = sorted(int(i) for i in indices)
    if len(set(out)) != len(out):
        raise ValueError("index set must have distinct elements")
    return out


def l_operator(model: GbpModel, indices) -> float:
    """Product of (p + C*(gap)) over consecutive gaps of a sorted index set.

    By convention the empty set maps to 1/p and singletons to 1.
    """
    b = _sorted_unique(indices)
    if not b:
        return 1.0 / model.p
    if len(b) == 1:
        return 1.0
    p = model.p
    out = 1.0
    for prev, cur in zip(b, b[1:]):
        out *= p + model.cstar(cur - prev)
    return out


def d_operator(model: GbpModel, ones, zeros) -> float:
    """Alternating subset sum of ``l_operator`` over subsets of ``zeros``.

    This is the exactness oracle for the gap-law recursion; the subset sum
    is exponential in ``len(zeros)`` and capped at 20.  The summation is
    compensated (math.fsum) because the terms cancel heavily.
    """
    b = _sorted_unique(ones)
    f = _sorted_unique(zeros)
    if set(b) & set(f):
        raise ValueError("ones and zeros must be disjoint")
    if len(f) > _D_SIZE_CAP:
        raise SizeGuardExceeded(f"d_operator supports |zeros| <= {_D_SIZE_CAP}")
    if not f:
        return l_operator(model, b)
    terms = []
    for j in range(len(f) + 1):
        sign = -1.0 if j % 2 else 1.0
        for sub in combinations(f, j):
            terms.append(sign * l_operator(model, b + list(sub)))
    return math.fsum(terms)


def config_probability(model: GbpModel, ones, zeros) -> float:
    """Probability of ones at ``ones`` and zeros at ``zeros`` (joint law).

    Equals p * D(ones, zeros); the all-zero configuration falls out of the
    1/p convention for the empty set.
    """
    b = _sorted_unique(ones)
    f = _sorted_unique(zeros)
    if not b and not f:
        raise ValueError("configuration must be non-empty")
    if len(b) + len(f) > _D_SIZE_CAP + 1:
        raise SizeGuardExceeded("configuration too large for exact evaluation")
    return model.p * d_operator(model, b, f)


@dataclass(frozen=True)
class GapTables:
    """Gap law of a binary-sequence model, to horizon ``n_max``.

    ``g[k-1]`` is the probability that the next one lands exactly ``k``
    steps after a one; ``h[k-1]`` the probability that the first one in a
    window sits at position ``k``.  ``F`` and ``F0`` are their cumulative
    sums, used for inversion sampling.
    """

    g: np.ndarray
    h: np.ndarray
    F: np.ndarray
    F0: np.ndarray
    n_max: int

    def gap_probability(self, k: int) -> float:
        return float(self.g[k - 1])

    def first_one_probability(self, k: int) -> float:
        return float(self.h[k - 1])


def _renewal_solve(src: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Solve x(k) = src(k) - sum_{j<k} x(j) * kernel(k-j) for k = 1..n.

    Arrays are 0-based (index k-1 holds lag k).  Work is split into blocks:
    contributions from completed blocks enter through one convolution,
    the remainder through short in-block dot products, so the total cost is
    O(n^2) with vectorized inner loops (FFT for the block convolutions).
    """
    n = src.size
    x = np.empty(n)
    kr = kernel[::-1].copy()
    block = 2048
    for lo in range(0, n, block):
        hi = min(lo + block, n)
        if lo:
            head = signal.convolve(x[:lo], kernel[: hi - 1], method="auto")
        for m in range(lo, hi):
            acc = head[m - 1] if lo else 0.0
            ln = m - lo
            if ln > 0:
                acc += float(np.dot(x[lo:m], kr[n - ln:]))
            x[m] = src[m] - acc
    return x


def build_gap_tables(model: GbpModel, n_max: int) -> GapTables:
    """Gap and first-one laws to horizon ``n_max`` via renewal recursion.

    The recursions

        g(k) = (p + C*(k)) - sum_{j<k} g(j) (p + C*(k-j))
        h(k) = p          - sum_{j<k} h(j) (p + C*(k-j))

    reproduce the exact configuration probabilities D({1,k+1},{2..k}) and
    p*D({k},{1..k-1}) (tested against :func:`d_operator`).  Values in
    [-1e-9, 0) are clamped to zero with a logged warning; anything lower
    raises :class:`NegativeGapProbability`, which signals that the (p, C)
    pair does not define a consistent law at this horizon.
    """
    if n_max < 1:
        raise ValueError("n_max must be positive")
    p = model.p
    lags = np.arange(1, n_max + 1)
    kernel = p + np.asarray(model.cov(lags), dtype=float) / p
    g = _renewal_solve(kernel.copy(), kernel)
    h = _renewal_solve(np.full(n_max, p), kernel)

    for name, arr in (("g", g), ("h", h)):
        neg = arr < 0
        if np.any(arr < -_CLAMP_TOL):
            k = int(np.argmax(arr < -_CLAMP_TOL)) + 1
            raise NegativeGapProbability(k, arr[k - 1])
        if np.any(neg):
            logger.warning(
                "clamped %d tiny negative %s values (min %.3e)",
                int(neg.sum()), name, float(arr[neg].min()),
            )
            arr[neg] = 0.0

    F = np.cumsum(g)
    F0 = np.cumsum(h)
    for name, arr in (("F", F), ("F0", F0)):
        if arr[-1] > 1.0 + 1e-9:
            raise GbpfError(f"cumulative {name} exceeds 1 ({arr[-1]!r}); inconsistent model")
    if 1.0 - F[-1] > 1e-3:
        logger.info(
            "gap mass beyond horizon %d is %.3e; window-tail rule applies",
            n_max, float(1.0 - F[-1]),
        )
    return GapTables(g, h, F, F0, int(n_max))


@dataclass(frozen=True)
class WellDefinedness:
    ok: bool
    min_value: float
    witness: tuple  # (ones, zeros, value) at the minimum


def verify_well_defined(model: GbpModel, m: int = 10) -> WellDefinedness:
    """Exhaustively check positivity of D(B, F) over the window {1..m}.

    Enumerates every disjoint pair (B, F) with non-empty union inside
    {1..m} via the recursion D(B, F) = D(B, F\\{i}) - D(B+{i}, F\\{i}),
    and reports the minimal value; ``ok`` iff the minimum is positive.
    ``m`` is capped at 12 (3^m states).
    """
    if not 2 <= m <= 12:
        raise ValueError("m must lie in 2..12")
    p = model.p
    size = 1 << m

    # L over bitmasks; bit i stands for position i+1.
    L = np.empty(size)
    L[0] = 1.0 / p
    top = np.zeros(size, dtype=np.int64)
    for mask in range(1, size):
        t = mask.bit_length() - 1
        top[mask] = t
        rest = mask ^ (1 << t)
        if rest == 0:
            L[mask] = 1.0
        else:
            L[mask] = L[rest] * (p + model.cstar(t - int(top[rest])))

    D = {}
    best = (math.inf, 0, 0)
    for f in range(size):
        comp = (size - 1) ^ f
        low = f & -f
        f_rest = f ^ low
        b = comp
        while True:
            if f == 0:
                val = L[b]
            else:
                val = D[(b, f_rest)] - D[(b | low, f_rest)]
            D[(b, f)] = val
            if (b or f) and val < best[0]:
                best = (val, b, f)
            if b == 0:
                break
            b = (b - 1) & comp

    def unpack(mask):
        return tuple(i + 1 for i in range(m) if mask >> i & 1)

    val, b, f = best
    return WellDefinedness(val > 0, float(val), (unpack(b), unpack(f), float(val)))


@dataclass(frozen=True)
class BinaryPath:
    """A realized binary path with its provenance."""

    bits: np.ndarray
    seed: object
    p: float
    cov: CovarianceFunction

    def __len__(self):
        return self.bits.size


def sample_path(model: GbpModel, n: int, rng: np.random.Generator,
                tables: GapTables | None = None, seed=None) -> BinaryPath:
    """Sample positions 1..n of the binary sequence by gap inversion.

    The first one is placed at min{k : F0(k) > U}; later ones advance by
    gaps min{k : F(k) > U}.  A uniform draw at or beyond the cumulative
    mass within the remaining window places no further one (positions past
    the window are irrelevant).  This inversion convention reproduces the
    gap law exactly and matches the pair probabilities of the joint law.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if tables is None or tables.n_max < n:
        tables = model.gap_tables(n)
    F, F0 = tables.F, tables.F0
    bits = np.zeros(n, dtype=np.int8)
    pos = int(np.searchsorted(F0, rng.random(), side="right")) + 1
    while pos <= n:
        bits[pos - 1] = 1
        pos += int(np.searchsorted(F, rng.random(), side="right")) + 1
    return BinaryPath(bits, seed, model.p, model.cov)
