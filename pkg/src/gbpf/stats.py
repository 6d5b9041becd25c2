"""Empirical estimators used to verify the simulators.

Lagged auto- and cross-covariances use the biased 1/n normalization
common in correlogram practice; lattice correlograms average over the
exact pair set at each lag vector.  Standard errors always come from
independent replicates, never from within-path asymptotics, because
long-memory paths break the classical formulas.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GbpfError

__all__ = [
    "LagStatistics",
    "autocovariance",
    "cross_covariance",
    "replicate_lag_stats",
    "field_correlogram",
    "ks_distance",
    "KsResult",
    "empirical_cf",
    "CfEstimate",
]

KS_CRITICAL_SCALE = {0.10: 1.224, 0.05: 1.358, 0.01: 1.628}


@dataclass(frozen=True)
class LagStatistics:
    """Per-lag estimates with optional replicate standard errors."""

    lags: np.ndarray
    estimates: np.ndarray   # (L,) for scalars, (L, d, d) for vector series
    se: np.ndarray | None
    n: int
    replicates: int

    def at(self, lag):
        i = int(np.searchsorted(self.lags, lag))
        if i >= len(self.lags) or self.lags[i] != lag:
            raise KeyError(f"lag {lag} not estimated")
        return self.estimates[i]


def _as_series(path):
    x = np.asarray(path, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValueError("series must be 1- or 2-dimensional")
    return x


def autocovariance(path, max_lag: int, normalization: str = "biased") -> LagStatistics:
    """Lagged covariance of one path, lags 0..max_lag.

    ``normalization="biased"`` divides every lag by n (the common
    correlogram convention); ``"pairs"`` divides by the exact pair count
    n - k, which matches the lattice correlogram on a one-axis field.
    Scalar series give scalar estimates; vector series give d x d
    matrices.  ``max_lag`` must stay below n/4 so every lag keeps a
    reasonable pair count.
    """
    x = _as_series(path)
    n, d = x.shape
    if not 0 <= max_lag < n / 4:
        raise GbpfError("max_lag must satisfy 0 <= max_lag < n/4")
    if normalization not in ("biased", "pairs"):
        raise ValueError("normalization must be 'biased' or 'pairs'")
    if float(np.max(x.std(axis=0))) == 0.0:
        raise GbpfError("degenerate series: zero variance")
    xc = x - x.mean(axis=0)
    out = np.empty((max_lag + 1, d, d))
    for k in range(max_lag + 1):
        denom = n if normalization == "biased" else n - k
        out[k] = xc[: n - k].T @ xc[k:] / denom
    est = out[:, 0, 0] if d == 1 else out
    return LagStatistics(np.arange(max_lag + 1), est, None, n, 1)


def cross_covariance(path_a, path_b, max_lag: int) -> LagStatistics:
    """Biased lagged cross-covariance c(k) = cov(a_t, b_{t+k}), k = 0..max_lag."""
    a = _as_series(path_a)[:, 0]
    b = _as_series(path_b)[:, 0]
    if a.shape != b.shape:
        raise GbpfError("aligned series of equal length are required")
    n = a.size
    if not 0 <= max_lag < n / 4:
        raise GbpfError("max_lag must satisfy 0 <= max_lag < n/4")
    ac = a - a.mean()
    bc = b - b.mean()
    est = np.asarray([float(ac[: n - k] @ bc[k:]) / n for k in range(max_lag + 1)])
    return LagStatistics(np.arange(max_lag + 1), est, None, n, 1)


def replicate_lag_stats(per_replicate) -> LagStatistics:
    """Combine per-replicate LagStatistics into mean estimates with SEs."""
    reps = list(per_replicate)
    if not reps:
        raise ValueError("no replicates")
    lags = reps[0].lags
    stack = np.stack([r.estimates for r in reps])
    mean = stack.mean(axis=0)
    if len(reps) > 1:
        se = stack.std(axis=0, ddof=1) / math.sqrt(len(reps))
    else:
        se = np.full_like(mean, np.nan)
    return LagStatistics(lags, mean, se, reps[0].n, len(reps))


def field_correlogram(values, window) -> dict:
    """Lattice correlogram over the lag box prod [-w_i, w_i].

    Returns a map from lag vector to the pair-set average of centered
    products; the pair count at each lag is exact, and symmetric lags get
    equal estimates by construction.
    """
    v = np.asarray(values, dtype=float)
    if v.ndim == 0:
        raise GbpfError("field values must be an array")
    # trailing component axis is allowed only for scalar fields here
    if v.ndim >= 2 and v.shape[-1] == 1:
        v = v[..., 0]
    extents = v.shape
    n_axes = v.ndim
    window = tuple(int(w) for w in window)
    if len(window) != n_axes:
        raise GbpfError("one window bound per axis is required")
    if any(w < 0 or 2 * w >= t for w, t in zip(window, extents)):
        raise GbpfError("window must lie within half the extents")
    xc = v - v.mean()

    out = {}
    ranges = [range(-w, w + 1) for w in window]
    import itertools as _it

    for lag in _it.product(*ranges):
        src = []
        dst = []
        for s, t in zip(lag, extents):
            if s >= 0:
                src.append(slice(s, t))
                dst.append(slice(0, t - s))
            else:
                src.append(slice(0, t + s))
                dst.append(slice(-s, t))
        prod = xc[tuple(src)] * xc[tuple(dst)]
        out[lag] = float(prod.mean())
    return out


@dataclass(frozen=True)
class KsResult:
    statistic: float
    n: int
    critical: dict

    def passes(self, alpha: float) -> bool:
        return self.statistic < self.critical[alpha]


def ks_distance(samples, cdf) -> KsResult:
    """Kolmogorov-Smirnov distance of a sample to a target CDF.

    Uses the asymptotic critical values c(alpha)/sqrt(n) with
    c = 1.224 / 1.358 / 1.628 at the 10/5/1 percent levels.  At least 100
    scalar samples are required.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n < 100:
        raise GbpfError("KS distance needs at least 100 samples")
    try:
        f = np.asarray(cdf(x), dtype=float)
        if f.shape != x.shape:
            raise TypeError
    except (TypeError, ValueError):
        f = np.asarray([cdf(v) for v in x], dtype=float)
    i = np.arange(1, n + 1)
    d_plus = float(np.max(i / n - f))
    d_minus = float(np.max(f - (i - 1) / n))
    d = max(d_plus, d_minus)
    crit = {a: c / math.sqrt(n) for a, c in KS_CRITICAL_SCALE.items()}
    return KsResult(d, n, crit)


@dataclass(frozen=True)
class CfEstimate:
    value: complex
    error_scale: float
    n: int


def empirical_cf(samples, theta) -> CfEstimate:
    """Monte Carlo characteristic function: mean of exp(i theta . x)."""
    x = np.asarray(samples, dtype=float)
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[1] != th.size:
        raise ValueError("theta dimension does not match the samples")
    val = complex(np.mean(np.exp(1j * (x @ th))))
    return CfEstimate(val, 1.0 / math.sqrt(x.shape[0]), x.shape[0])
