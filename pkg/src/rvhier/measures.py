"""Realized variance and its intraday decompositions.

All functions operate on one day's vector of intraday log-returns and
partition the day's realized variance RV = sum(r_i^2) into non-negative
components:

* semivariances        -- sign split, r >= 0 vs r < 0
* partial variances    -- quantile bins of the standardized returns
* threshold components -- bins (c_{l-1}, c_l] for explicit thresholds
* temporal components  -- consecutive fixed-length intraday segments
* combined components  -- threshold-by-segment (or sign-by-segment) grid

Conventions: zero returns count toward the positive semivariance
(indicator r >= 0), while the generic threshold rule assigns r = 0 to
the lower bin at a threshold of 0 (half-open intervals open on the
left). Both conventions are intentional and tested.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError

#: default intraday grid size (1-minute returns over a 6.5 hour session)
DEFAULT_GRID_SIZE = 390
#: default segment length for the temporal decomposition (five segments)
DEFAULT_SEGMENT_LENGTH = 78
#: default quantile probabilities for partial variances
DEFAULT_ALPHAS = (0.10, 0.75)

DECOMPOSITION_KINDS = (
    "RV",
    "SV",
    "PV",
    "THRESHOLD",
    "TEMPORAL",
    "COMBINED",
    "PV_STAR",
)


def _as_returns(returns) -> np.ndarray:
    r = np.asarray(returns, dtype=float)
    if r.ndim != 1:
        raise DataError(f"returns must be a 1-d vector, got shape {r.shape}")
    if r.size == 0:
        raise DataError("returns vector is empty")
    if not np.all(np.isfinite(r)):
        raise DataError("returns contain non-finite values")
    return r


def log_returns(prices) -> np.ndarray:
    """Log-returns r_i = log(P_i) - log(P_{i-1}) from a price path.

    ``prices`` has length N+1 (opening price plus N interval ends); the
    result has length N. Raises DataError on non-positive prices.
    """
    p = np.asarray(prices, dtype=float)
    if p.ndim != 1 or p.size < 2:
        raise DataError("prices must be a 1-d vector of length >= 2")
    if not np.all(np.isfinite(p)):
        raise DataError("prices contain non-finite values")
    if np.any(p <= 0.0):
        bad = int(np.argmax(p <= 0.0))
        raise DataError(f"non-positive price {p[bad]!r} at position {bad}")
    return np.diff(np.log(p))


def realized_variance(returns) -> float:
    """RV = sum of squared intraday returns; non-negative scalar."""
    r = _as_returns(returns)
    return float(np.sum(r * r))


def semivariances(returns) -> tuple[float, float]:
    """(SV+, SV-): squared-return sums for r >= 0 and r < 0.

    Zero returns count in SV+ (indicator r >= 0). SV+ + SV- equals RV
    exactly up to float summation order.
    """
    r = _as_returns(returns)
    sq = r * r
    pos = r >= 0.0
    sv_plus = float(np.sum(sq[pos]))
    sv_minus = float(np.sum(sq[~pos]))
    return sv_plus, sv_minus


def _check_alphas(alphas) -> np.ndarray:
    a = np.asarray(alphas, dtype=float)
    if a.ndim != 1:
        raise ConfigError("alphas must be a flat sequence of probabilities")
    if a.size and (np.any(a <= 0.0) or np.any(a >= 1.0) or np.any(np.diff(a) <= 0.0)):
        raise ConfigError(
            f"alphas must be strictly increasing inside (0, 1), got {a.tolist()}"
        )
    return a


def quantile_thresholds(returns, alphas=DEFAULT_ALPHAS) -> np.ndarray:
    """Return thresholds Q_r(alpha_l) for the partial-variance bins.

    Standardizes by sqrt(RV/N), takes empirical quantiles of the
    standardized returns (linear interpolation at position 1+(n-1)tau),
    and maps back to return units. Raises DataError when RV = 0, where
    the standardization is undefined.
    """
    r = _as_returns(returns)
    a = _check_alphas(alphas)
    rv = float(np.sum(r * r))
    if rv == 0.0:
        raise DataError("RV is zero; quantile thresholds are undefined")
    scale = np.sqrt(rv / r.size)
    z = r / scale
    qz = np.quantile(z, a) if a.size else np.empty(0)
    return scale * qz


def partial_variances(returns, alphas=DEFAULT_ALPHAS) -> np.ndarray:
    """Partial variances: squared-return sums over quantile bins.

    Bin l covers (Q_r(alpha_{l-1}), Q_r(alpha_l)] with Q_r(alpha_0) =
    -inf and Q_r(alpha_p) = +inf, so p = len(alphas) + 1 components are
    returned and they sum to RV. An all-zero day returns all-zero
    components by convention (standardization is skipped).
    """
    r = _as_returns(returns)
    a = _check_alphas(alphas)
    if float(np.sum(r * r)) == 0.0:
        return np.zeros(a.size + 1)
    cuts = quantile_thresholds(r, a)
    return threshold_components(r, cuts)


def threshold_components(returns, thresholds) -> np.ndarray:
    """Squared-return sums over bins (c_{l-1}, c_l], ends at -inf/+inf.

    ``thresholds`` are the p-1 interior cut points c_1 <= ... <= c_{p-1};
    the result has p components summing to RV. At a threshold of 0 the
    return r = 0 lands in the lower bin (left-open rule), unlike the
    semivariance sign split. Tied cut points (possible when empirical
    quantiles coincide) make the bin between them empty, component 0.
    """
    r = _as_returns(returns)
    c = np.asarray(thresholds, dtype=float)
    if c.ndim != 1:
        raise DataError("thresholds must be a 1-d vector")
    if c.size and np.any(np.diff(c) < 0.0):
        raise DataError(f"thresholds must be non-decreasing, got {c.tolist()}")
    sq = r * r
    # np.searchsorted with side="left" puts r == c in the lower bin,
    # matching the half-open (c_{l-1}, c_l] intervals.
    bins = np.searchsorted(c, r, side="left")
    out = np.zeros(c.size + 1)
    np.add.at(out, bins, sq)
    return out


def temporal_components(returns, segment_length=DEFAULT_SEGMENT_LENGTH) -> np.ndarray:
    """Squared-return sums over N/m consecutive segments of length m."""
    r = _as_returns(returns)
    m = int(segment_length)
    if m <= 0:
        raise ConfigError(f"segment length must be positive, got {m}")
    if r.size % m != 0:
        raise DataError(
            f"segment length {m} does not divide the grid size {r.size}"
        )
    sq = r * r
    return sq.reshape(-1, m).sum(axis=1)


def combined_components(
    returns,
    thresholds=None,
    alphas=None,
    segment_length=DEFAULT_SEGMENT_LENGTH,
) -> np.ndarray:
    """p x K matrix of threshold-by-segment squared-return sums.

    Exactly one of ``thresholds`` (explicit cut points) or ``alphas``
    (quantile probabilities) must be given. Quantile thresholds are
    computed once from the full day's returns and then applied within
    each segment, so row sums reproduce the day-level threshold or
    partial-variance components and column sums reproduce the temporal
    components.
    """
    r = _as_returns(returns)
    if (thresholds is None) == (alphas is None):
        raise ConfigError("pass exactly one of thresholds= or alphas=")
    if alphas is not None:
        a = _check_alphas(alphas)
        if float(np.sum(r * r)) == 0.0:
            m = int(segment_length)
            if m <= 0 or r.size % m != 0:
                raise DataError(
                    f"segment length {segment_length} does not divide {r.size}"
                )
            return np.zeros((a.size + 1, r.size // m))
        cuts = quantile_thresholds(r, a)
    else:
        cuts = np.asarray(thresholds, dtype=float)
        if cuts.ndim != 1 or (cuts.size and np.any(np.diff(cuts) < 0.0)):
            raise DataError("thresholds must be a non-decreasing 1-d vector")
    m = int(segment_length)
    if m <= 0:
        raise ConfigError(f"segment length must be positive, got {m}")
    if r.size % m != 0:
        raise DataError(f"segment length {m} does not divide the grid size {r.size}")
    n_seg = r.size // m
    out = np.empty((cuts.size + 1, n_seg))
    for k in range(n_seg):
        out[:, k] = threshold_components(r[k * m : (k + 1) * m], cuts)
    return out


def sign_temporal_components(
    returns, segment_length=DEFAULT_SEGMENT_LENGTH
) -> np.ndarray:
    """2 x K matrix of sign-by-segment squared-return sums.

    Row 0 collects r < 0 and row 1 collects r >= 0, matching the
    semivariance convention (zero returns are positive), so row sums
    equal (SV-, SV+) exactly.
    """
    r = _as_returns(returns)
    m = int(segment_length)
    if m <= 0:
        raise ConfigError(f"segment length must be positive, got {m}")
    if r.size % m != 0:
        raise DataError(f"segment length {m} does not divide the grid size {r.size}")
    n_seg = r.size // m
    out = np.empty((2, n_seg))
    for k in range(n_seg):
        seg = r[k * m : (k + 1) * m]
        sq = seg * seg
        neg = seg < 0.0
        out[0, k] = np.sum(sq[neg])
        out[1, k] = np.sum(sq[~neg])
    return out


@dataclass(frozen=True)
class DecompositionSpec:
    """Parameters selecting one decomposition of daily RV.

    ``kind`` is one of RV, SV, PV, THRESHOLD, TEMPORAL, COMBINED or
    PV_STAR. ``alphas`` apply to PV/PV_STAR and quantile-based COMBINED;
    ``segment_length`` to TEMPORAL/COMBINED; ``thresholds`` to
    THRESHOLD and threshold-based COMBINED.
    """

    kind: str = "RV"
    alphas: tuple[float, ...] = DEFAULT_ALPHAS
    segment_length: int = DEFAULT_SEGMENT_LENGTH
    thresholds: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in DECOMPOSITION_KINDS:
            raise ConfigError(
                f"unknown decomposition kind {self.kind!r}; "
                f"valid kinds: {', '.join(DECOMPOSITION_KINDS)}"
            )
        _check_alphas(self.alphas)
        if self.segment_length <= 0:
            raise ConfigError("segment_length must be positive")
        if self.thresholds is not None:
            t = np.asarray(self.thresholds, dtype=float)
            if t.size and np.any(np.diff(t) < 0.0):
                raise ConfigError("thresholds must be non-decreasing")


@dataclass(frozen=True)
class DailyMeasures:
    """One day's RV together with a labeled non-negative partition of it."""

    date: str
    rv: float
    labels: tuple[str, ...]
    components: np.ndarray = field(repr=False)

    def __post_init__(self):
        comp = np.asarray(self.components, dtype=float)
        if comp.shape != (len(self.labels),):
            raise DataError(
                f"{len(self.labels)} labels but component shape {comp.shape}"
            )
        if np.any(comp < 0.0):
            raise DataError("components must be non-negative")
        total = float(comp.sum())
        if abs(total - self.rv) > 1e-12 * max(1.0, abs(self.rv)):
            raise DataError(
                f"components sum to {total!r} but rv is {self.rv!r}"
            )


def decompose_day(returns, spec: DecompositionSpec, date: str = "") -> DailyMeasures:
    """Apply ``spec`` to one day's returns and label the components."""
    r = _as_returns(returns)
    rv = realized_variance(r)
    kind = spec.kind
    if kind == "RV":
        labels, comp = ("RV",), np.array([rv])
    elif kind == "SV":
        sv_plus, sv_minus = semivariances(r)
        labels, comp = ("SV-", "SV+"), np.array([sv_minus, sv_plus])
    elif kind == "PV":
        comp = partial_variances(r, spec.alphas)
        labels = tuple(f"PV{i + 1}" for i in range(comp.size))
    elif kind == "THRESHOLD":
        if spec.thresholds is None:
            raise ConfigError("THRESHOLD decomposition needs spec.thresholds")
        comp = threshold_components(r, spec.thresholds)
        labels = tuple(f"Z{i + 1}" for i in range(comp.size))
    elif kind == "TEMPORAL":
        comp = temporal_components(r, spec.segment_length)
        labels = tuple(f"T{i + 1}" for i in range(comp.size))
    elif kind == "COMBINED":
        grid = combined_components(
            r,
            thresholds=spec.thresholds,
            alphas=spec.alphas if spec.thresholds is None else None,
            segment_length=spec.segment_length,
        )
        p, n_seg = grid.shape
        labels = tuple(
            f"T{k + 1}PV{l + 1}" for l in range(p) for k in range(n_seg)
        )
        comp = grid.reshape(-1)
    else:
        raise ConfigError(f"decompose_day does not handle kind {kind!r}")
    return DailyMeasures(date=date, rv=rv, labels=labels, components=comp)
