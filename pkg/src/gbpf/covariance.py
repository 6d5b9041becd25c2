"""Decreasing covariance functions and admissibility checks.

A pair ``(p, C)`` drives a correlated binary sequence (see :mod:`gbpf.gbp`)
only when ``C`` decays no faster than geometrically and its first two lags
are compatible with the success probability ``p``.  This module holds the
parametric covariance families, tabulated covariances, the admissibility
checker, and the closed-form parameter regions for the families.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CovarianceError, OutOfTableError

__all__ = [
    "CovarianceFunction",
    "ClauseViolation",
    "ValidityReport",
    "eval_cov",
    "check_assumption",
    "admissible_region",
    "AdmissibleRegion",
]

# Families carry their parameters in a fixed order (see _FAMILY_PARAMS).
EXPONENTIAL = "exponential"
STRETCHED_EXPONENTIAL = "stretched_exponential"
TWO_EXPONENTIAL = "two_exponential"
POWER_LAW = "power_law"
TABULATED = "tabulated"

_FAMILY_PARAMS = {
    EXPONENTIAL: ("c", "theta"),
    STRETCHED_EXPONENTIAL: ("c", "theta", "alpha"),
    TWO_EXPONENTIAL: ("c1", "rho1", "c2", "rho2"),
    POWER_LAW: ("c", "hurst"),
}

# Values below this are numerically indistinguishable from zero; the
# monotonicity scan stops there to avoid 0/0 ratios from underflow.
_UNDERFLOW_FLOOR = 1e-250


@dataclass(frozen=True)
class CovarianceFunction:
    """A positive, non-increasing covariance function on lags 1, 2, 3, ...

    Instances are built through the family constructors
    (:meth:`exponential`, :meth:`stretched_exponential`,
    :meth:`two_exponential`, :meth:`power_law`, :meth:`tabulated`) and are
    immutable.  Lag 0 is deliberately undefined: the variance of a target
    process comes from its marginal, never from ``C``.
    """

    family: str
    params: dict = field(default_factory=dict)
    table: tuple = ()          # tabulated values for lags 1..len(table)
    tail: str = "geometric"    # "geometric" or "reject", tabulated only

    # -- constructors -------------------------------------------------

    @classmethod
    def exponential(cls, c: float, theta: float) -> "CovarianceFunction":
        """C(x) = c * exp(-theta * x) with c > 0, theta > 0."""
        if not (c > 0 and theta > 0):
            raise CovarianceError("exponential family needs c > 0 and theta > 0")
        return cls(EXPONENTIAL, {"c": float(c), "theta": float(theta)})

    @classmethod
    def stretched_exponential(cls, c: float, theta: float, alpha: float) -> "CovarianceFunction":
        """C(x) = c * exp(-theta * x**alpha) with 0 < alpha < 1."""
        if not (c > 0 and theta > 0 and 0 < alpha < 1):
            raise CovarianceError(
                "stretched exponential needs c > 0, theta > 0, 0 < alpha < 1"
            )
        return cls(
            STRETCHED_EXPONENTIAL,
            {"c": float(c), "theta": float(theta), "alpha": float(alpha)},
        )

    @classmethod
    def two_exponential(cls, c1: float, rho1: float, c2: float, rho2: float) -> "CovarianceFunction":
        """C(x) = c1 * rho1**x + c2 * rho2**x, a two-time-scale decay."""
        if not (c1 > 0 and c2 > 0 and 0 < rho1 < 1 and 0 < rho2 < 1):
            raise CovarianceError(
                "two-exponential needs c1, c2 > 0 and rho1, rho2 in (0, 1)"
            )
        return cls(
            TWO_EXPONENTIAL,
            {"c1": float(c1), "rho1": float(rho1), "c2": float(c2), "rho2": float(rho2)},
        )

    @classmethod
    def power_law(cls, c: float, hurst: float) -> "CovarianceFunction":
        """C(x) = c * x**(2*hurst - 2); long-range dependent for hurst > 1/2."""
        if not (c > 0 and 0 < hurst < 1):
            raise CovarianceError("power law needs c > 0 and hurst in (0, 1)")
        return cls(POWER_LAW, {"c": float(c), "hurst": float(hurst)})

    @classmethod
    def tabulated(cls, values, tail: str = "geometric") -> "CovarianceFunction":
        """Covariance given by a finite table ``{lag: value}`` for lags 1..m.

        ``tail="geometric"`` continues past the table with the last observed
        ratio (which preserves a non-decreasing ratio sequence);
        ``tail="reject"`` makes evaluation past the table an error.
        """
        if isinstance(values, dict):
            lags = sorted(values)
            if lags != list(range(1, len(lags) + 1)):
                raise CovarianceError("tabulated lags must be contiguous from 1")
            vals = tuple(float(values[k]) for k in lags)
        else:
            vals = tuple(float(v) for v in values)
        if not vals:
            raise CovarianceError("empty covariance table")
        arr = np.asarray(vals)
        if not np.all(np.isfinite(arr)) or not np.all(arr > 0):
            raise CovarianceError("tabulated values must be finite and positive")
        if np.any(np.diff(arr) > 0):
            raise CovarianceError("tabulated values must be non-increasing")
        if tail not in ("geometric", "reject"):
            raise CovarianceError("tail must be 'geometric' or 'reject'")
        if tail == "geometric" and len(vals) < 2:
            raise CovarianceError("geometric tail needs at least two table entries")
        return cls(TABULATED, {}, table=vals, tail=tail)

    # -- evaluation ----------------------------------------------------

    @property
    def table_length(self) -> int:
        return len(self.table)

    def __call__(self, lag):
        """Evaluate C at integer lags >= 1 (scalar or array)."""
        arr = np.asarray(lag)
        if np.any(arr < 1):
            raise CovarianceError("covariance is undefined at lag 0 and below")
        x = arr.astype(float)
        p = self.params
        if self.family == EXPONENTIAL:
            out = p["c"] * np.exp(-p["theta"] * x)
        elif self.family == STRETCHED_EXPONENTIAL:
            out = p["c"] * np.exp(-p["theta"] * np.power(x, p["alpha"]))
        elif self.family == TWO_EXPONENTIAL:
            out = p["c1"] * np.power(p["rho1"], x) + p["c2"] * np.power(p["rho2"], x)
        elif self.family == POWER_LAW:
            out = p["c"] * np.power(x, 2.0 * p["hurst"] - 2.0)
        elif self.family == TABULATED:
            out = self._eval_table(arr)
        else:  # pragma: no cover
            raise CovarianceError(f"unknown family {self.family!r}")
        return float(out) if np.isscalar(lag) or arr.ndim == 0 else out

    def _eval_table(self, lags):
        vals = np.asarray(self.table)
        m = len(vals)
        idx = np.asarray(lags, dtype=np.int64)
        out = np.empty(idx.shape, dtype=float)
        inside = idx <= m
        out[inside] = vals[idx[inside] - 1]
        if np.any(~inside):
            if self.tail == "reject":
                bad = int(idx[~inside].flat[0])
                raise OutOfTableError(
                    f"lag {bad} beyond table of length {m} (tail rule: reject)"
                )
            ratio = vals[-1] / vals[-2]
            out[~inside] = vals[-1] * ratio ** (idx[~inside] - m)
        return out

    def ratio_is_monotone(self) -> bool:
        """Whether C(x+1)/C(x) is non-decreasing by construction.

        True for all four parametric families under their parameter
        constraints; a tabulated covariance must be scanned numerically.
        """
        return self.family != TABULATED

    def scan_horizon(self, horizon: int) -> int:
        """Largest lag the numeric monotonicity scan may use."""
        if self.family == TABULATED and self.tail == "reject":
            return min(horizon, self.table_length)
        return horizon


def eval_cov(cov: CovarianceFunction, lag: int) -> float:
    """Evaluate a covariance function at a single positive integer lag."""
    if int(lag) != lag or lag < 1:
        raise CovarianceError(f"lag must be a positive integer, got {lag!r}")
    return float(cov(int(lag)))


# -- admissibility ------------------------------------------------------

CLAUSE_NOT_DECREASING = "NotDecreasing"
CLAUSE_RATIO = "RatioNotNondecreasing"
CLAUSE_C1 = "C1TooLarge"
CLAUSE_C2 = "C2TooSmall"


@dataclass(frozen=True)
class ClauseViolation:
    clause: str
    witness_lag: int
    lhs: float
    rhs: float


@dataclass(frozen=True)
class ValidityReport:
    """Outcome of the admissibility check for a (p, C) pair."""

    passed: bool
    violations: tuple
    horizon: int
    p: float

    def violated_clauses(self):
        return [v.clause for v in self.violations]

    def describe(self) -> str:
        if self.passed:
            return f"pass (horizon {self.horizon}, p={self.p:g})"
        parts = [
            f"{v.clause} at lag {v.witness_lag}: lhs={v.lhs:.6g}, rhs={v.rhs:.6g}"
            for v in self.violations
        ]
        return "fail: " + "; ".join(parts)


# Tolerance for the ratio-monotonicity clause; strict clauses (C1/C2) use
# exact comparisons because the sufficient condition states strict
# inequalities.
_RATIO_TOL = 1e-12


def check_assumption(cov: CovarianceFunction, p: float, horizon: int = 10_000) -> ValidityReport:
    """Decide whether (p, C) is admissible for a correlated binary sequence.

    Four clauses are tested over lags ``1..horizon``:

    a. C is non-increasing,
    b. the ratio C(x+1)/C(x) is non-decreasing in x (tolerance 1e-12),
    c. C(1) < p(1-p) (strict),
    d. C(2) > (p^2 + C(1))^2 / p - p^2 (strict).

    Clauses (a) and (b) hold analytically for the parametric families, so
    their numeric scan stops where values underflow; tabulated input is
    scanned over its data (a geometric tail keeps the ratio sequence
    non-decreasing past the table by construction).

    Parameters
    ----------
    cov : CovarianceFunction
    p : float
        Success probability in (0, 1).
    horizon : int
        Largest lag scanned, at least 3.

    Returns
    -------
    ValidityReport
        ``passed`` is True iff no clause is violated; the first witness per
        violated clause is recorded.
    """
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    if horizon < 3:
        raise ValueError("horizon must be at least 3")
    horizon = cov.scan_horizon(int(horizon))
    if horizon < 3:
        raise ValueError("tabulated covariance with reject tail needs >= 3 entries")

    lags = np.arange(1, horizon + 1)
    vals = np.asarray(cov(lags), dtype=float)

    violations = []

    # Monotonicity clauses on the prefix where values have not underflowed.
    cut = int(np.argmax(vals < _UNDERFLOW_FLOOR)) if np.any(vals < _UNDERFLOW_FLOOR) else horizon
    v = vals[: max(cut, 2)]
    diffs = np.diff(v)
    inc = np.nonzero(diffs > 0)[0]
    if inc.size:
        x = int(inc[0])
        violations.append(ClauseViolation(CLAUSE_NOT_DECREASING, x + 2, float(v[x + 1]), float(v[x])))
    ratios = v[1:] / v[:-1]
    drop = np.nonzero(np.diff(ratios) < -_RATIO_TOL)[0]
    if drop.size:
        x = int(drop[0])
        violations.append(ClauseViolation(CLAUSE_RATIO, x + 2, float(ratios[x + 1]), float(ratios[x])))

    c1 = float(vals[0])
    c2 = float(vals[1])
    bound1 = p * (1.0 - p)
    if not c1 < bound1:
        violations.append(ClauseViolation(CLAUSE_C1, 1, c1, bound1))
    bound2 = (p * p + c1) ** 2 / p - p * p
    if not c2 > bound2:
        violations.append(ClauseViolation(CLAUSE_C2, 2, c2, bound2))

    return ValidityReport(not violations, tuple(violations), horizon, float(p))


@dataclass(frozen=True)
class AdmissibleRegion:
    """Closed-form sufficient parameter region for a family at a given p.

    Every stated region implies the admissibility clauses (for the plain
    exponential family: with u = c*exp(-theta) < p(1-p), the clause-(d)
    margin u^2/(p(1-p)) - (p^2+u)^2/p + p^2 is convex in u, positive at 0,
    and has a double root exactly at the region boundary, so it is
    strictly positive inside).  The runtime checker remains authoritative
    for any concrete pair.
    """

    family: str
    p: float
    bounds: dict
    sufficiency_verified: bool

    def contains(self, **params) -> bool:
        p = self.p
        pq = p * (1.0 - p)
        f = self.family
        if f == EXPONENTIAL:
            c, theta = params["c"], params["theta"]
            return theta > 0 and 0 < c < pq
        if f == STRETCHED_EXPONENTIAL:
            c, theta, alpha = params["c"], params["theta"], params["alpha"]
            if not (c > 0 and theta > 0 and 0 < alpha < 1):
                return False
            if not (pq / 2 < c * math.exp(theta) < pq):
                return False
            lo = math.log2(pq / (c * math.exp(-theta)))
            return lo < alpha < 1
        if f == TWO_EXPONENTIAL:
            c1, rho1, c2, rho2 = (params[k] for k in ("c1", "rho1", "c2", "rho2"))
            if not (c1 > 0 and c2 > 0 and 0 < rho1 < 1 and 0 < rho2 < 1):
                return False
            return c1 * rho1 + c2 * rho2 < p ** 1.5 - p * p
        if f == POWER_LAW:
            c, hurst = params["c"], params["hurst"]
            if not (0 < hurst < 1 and c >= 0):
                return False
            return c < self.power_law_c_max(p, hurst)
        raise CovarianceError(f"no closed-form region for family {f!r}")

    def contains_cov(self, cov: CovarianceFunction) -> bool:
        if cov.family != self.family:
            raise CovarianceError("covariance family does not match region")
        return self.contains(**cov.params)

    @staticmethod
    def power_law_c_max(p: float, hurst: float) -> float:
        u = 2.0 ** (2.0 * hurst - 2.0)
        root = (p / 2.0) * (-2.0 * p + u + math.sqrt(4.0 * p - p * 2.0 ** (2.0 * hurst) + u * u))
        return min(p * (1.0 - p), root)


def admissible_region(family: str, p: float) -> AdmissibleRegion:
    """Closed-form sufficient region for one of the parametric families.

    The tabulated family has no closed region; use :func:`check_assumption`
    on the table instead.
    """
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    pq = p * (1.0 - p)
    if family == EXPONENTIAL:
        bounds = {"theta": "theta > 0", "c": f"0 < c < p(1-p) = {pq:.6g}"}
        return AdmissibleRegion(family, p, bounds, sufficiency_verified=True)
    if family == STRETCHED_EXPONENTIAL:
        bounds = {
            "c*exp(theta)": f"in ({pq / 2:.6g}, {pq:.6g})",
            "alpha": "in (log2(p(1-p)/(c*exp(-theta))), 1)",
        }
        return AdmissibleRegion(family, p, bounds, sufficiency_verified=True)
    if family == TWO_EXPONENTIAL:
        bounds = {"c1*rho1 + c2*rho2": f"< p^(3/2) - p^2 = {p ** 1.5 - p * p:.6g}"}
        return AdmissibleRegion(family, p, bounds, sufficiency_verified=True)
    if family == POWER_LAW:
        bounds = {"hurst": "in (0, 1)", "c": "0 <= c < min(p(1-p), half-root bound)"}
        return AdmissibleRegion(family, p, bounds, sufficiency_verified=True)
    if family == TABULATED:
        raise CovarianceError("tabulated covariances have no closed-form region; run check_assumption")
    raise CovarianceError(f"unknown family {family!r}")
