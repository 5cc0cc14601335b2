"""Periodicity filtering, bipower variation, and theoretical PV thresholds.

These support the robustness variant of the partial-variance split:
returns are standardized by a deterministic intraday periodicity
profile, a jump-robust variance level is estimated by bipower
variation, and quantile thresholds are replaced by Gaussian-theoretical
ones that are slot-specific and day-specific.

The periodicity estimator here is a robust stand-in (scaled cross-day
median absolute return per slot), not a reimplementation of weighted
standard deviation filtering; it is deterministic and exact to test.
"""

from __future__ import annotations

import numpy as np
from scipy import stats

from .errors import ConfigError, DataError


def estimate_periodicity(returns_matrix, min_days: int = 50) -> np.ndarray:
    """Per-slot scale profile sigma_i from a days x N return matrix.

    sigma_i = 1.4826 * median over days of |r_{i,t}|, renormalized so
    that (1/N) * sum(sigma_i^2) = 1. Requires at least ``min_days``
    days; a slot whose returns are zero in at least half the days has
    an undefined (zero) scale and raises DataError naming the slot.
    """
    r = np.asarray(returns_matrix, dtype=float)
    if r.ndim != 2:
        raise DataError(f"expected a days x slots matrix, got shape {r.shape}")
    if r.shape[0] < min_days:
        raise DataError(
            f"periodicity estimation needs >= {min_days} days, got {r.shape[0]}"
        )
    if not np.all(np.isfinite(r)):
        raise DataError("returns contain non-finite values")
    sigma = 1.4826 * np.median(np.abs(r), axis=0)
    if np.any(sigma <= 0.0):
        slot = int(np.argmax(sigma <= 0.0))
        raise DataError(f"slot {slot} has zero median absolute return")
    norm = np.sqrt(np.mean(sigma * sigma))
    return sigma / norm


def bipower_variation(filtered_returns) -> float:
    """Jump-robust variance level from adjacent absolute-return products.

    BPV = (pi/2) * (N/(N-1)) * sum_{i=2..N} |r_i| * |r_{i-1}|. The
    adjacent-lag product is the standard estimator; a displayed form
    multiplying a term by itself circulates in places and is not used.
    """
    r = np.asarray(filtered_returns, dtype=float)
    if r.ndim != 1 or r.size < 2:
        raise DataError("bipower variation needs a 1-d vector with N >= 2")
    if not np.all(np.isfinite(r)):
        raise DataError("returns contain non-finite values")
    a = np.abs(r)
    n = r.size
    return float((np.pi / 2.0) * (n / (n - 1.0)) * np.sum(a[1:] * a[:-1]))


def pv_star_thresholds(sigma, bpv: float, n_slots: int, taus) -> np.ndarray:
    """Slot-specific Gaussian thresholds c_{i,j} = sigma_i * sqrt(bpv/N) * z(tau_j).

    ``sigma`` is the periodicity profile (length N), ``bpv`` the day's
    bipower variation, and ``taus`` the strictly increasing interior
    probabilities. Returns an N x len(taus) schedule, monotone in j
    for every slot.
    """
    s = np.asarray(sigma, dtype=float)
    if s.ndim != 1 or s.size != n_slots:
        raise DataError(f"sigma must have length {n_slots}, got shape {s.shape}")
    if np.any(s <= 0.0):
        raise DataError("sigma entries must be strictly positive")
    if bpv < 0.0:
        raise DataError(f"bpv must be non-negative, got {bpv!r}")
    t = np.asarray(taus, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ConfigError("taus must be a non-empty 1-d vector")
    if np.any(t <= 0.0) or np.any(t >= 1.0) or np.any(np.diff(t) <= 0.0):
        raise ConfigError(
            f"taus must be strictly increasing inside (0, 1), got {t.tolist()}"
        )
    z = stats.norm.ppf(t)
    return np.sqrt(bpv / n_slots) * np.outer(s, z)


def pv_star_components(returns, schedule) -> np.ndarray:
    """Partial variances under a per-slot threshold schedule.

    ``schedule`` is the N x (p-1) matrix from :func:`pv_star_thresholds`;
    return r_i falls in bin l when schedule[i, l-1] < r_i <= schedule[i, l]
    (outer bins unbounded). Components sum to RV.
    """
    r = np.asarray(returns, dtype=float)
    c = np.asarray(schedule, dtype=float)
    if r.ndim != 1 or c.ndim != 2 or c.shape[0] != r.size:
        raise DataError(
            f"schedule shape {c.shape} does not match {r.size} returns"
        )
    # count of thresholds strictly below r (left-open bins, as in the
    # generic threshold decomposition)
    bins = np.sum(c < r[:, None], axis=1)
    out = np.zeros(c.shape[1] + 1)
    np.add.at(out, bins, r * r)
    return out
