"""HAR-family linear models and h-step base forecasts.

Every model regresses an h-period forward average on an intercept plus
lagged daily/weekly/monthly information:

* HAR       RV on RV lag-1, trailing 5-mean, trailing 22-mean
* SV_HAR    daily lag split into SV+ and SV- (weekly/monthly stay RV)
* PV3_HAR   daily lag split into PV1, PV2, PV3
* NODE_HAR  any single component series on its own three lags

Estimation is least squares; rank-deficient designs are resolved by the
minimum-norm solution so degenerate inputs stay deterministic. Robust
standard errors are reporting-only and never touch the forecast path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

LAG_DAILY = 1
LAG_WEEKLY = 5
LAG_MONTHLY = 22

MODEL_SPECS = ("HAR", "SV_HAR", "PV3_HAR", "NODE_HAR")

#: regressor layout per model: (column name, source series, lag window)
_DAILY_COLUMNS = {
    "HAR": (("RV_d", "RV"),),
    "SV_HAR": (("SV+_d", "SV+"), ("SV-_d", "SV-")),
    "PV3_HAR": (("PV1_d", "PV1"), ("PV2_d", "PV2"), ("PV3_d", "PV3")),
}

DEFAULT_FLOOR = 1e-10


def trailing_mean(x, m: int) -> np.ndarray:
    """Aligned trailing means: out[t] = mean(x[t-m .. t-1]).

    The output has length len(x) + 1 so that index len(x) is the
    regressor value available one step after the sample ends. Entries
    with fewer than m lags are NaN (full windows only).
    """
    x = np.asarray(x, dtype=float)
    c = np.concatenate(([0.0], np.cumsum(x)))
    out = np.full(x.size + 1, np.nan)
    if x.size + 1 > m:
        out[m:] = (c[m:] - c[:-m]) / m
    return out


def forward_mean(x, h: int) -> np.ndarray:
    """Aligned forward averages: out[t] = mean(x[t .. t+h-1]), NaN in the tail."""
    x = np.asarray(x, dtype=float)
    c = np.concatenate(([0.0], np.cumsum(x)))
    out = np.full(x.size, np.nan)
    if h <= x.size:
        out[: x.size - h + 1] = (c[h:] - c[: x.size - h + 1]) / h
    return out


@dataclass(frozen=True)
class HARDesign:
    """Target vector, regressor matrix, and bookkeeping for one fit."""

    spec: str
    horizon: int
    target: np.ndarray = field(repr=False)
    regressors: np.ndarray = field(repr=False)
    column_names: tuple[str, ...] = ()
    origin_dates: tuple = ()

    def __post_init__(self):
        y = np.asarray(self.target, dtype=float)
        X = np.asarray(self.regressors, dtype=float)
        if y.ndim != 1 or X.ndim != 2 or X.shape[0] != y.size:
            raise DataError(
                f"design shapes disagree: target {y.shape}, regressors {X.shape}"
            )
        if y.size == 0:
            raise DataError("design is empty")
        if self.column_names and len(self.column_names) != X.shape[1]:
            raise DataError("column_names do not match regressor count")
        object.__setattr__(self, "target", y)
        object.__setattr__(self, "regressors", X)


def _series(series_map, key: str, length: int | None) -> np.ndarray:
    if key not in series_map:
        raise DataError(f"series map is missing {key!r}")
    x = np.asarray(series_map[key], dtype=float)
    if x.ndim != 1:
        raise DataError(f"series {key!r} must be 1-d")
    if length is not None and x.size != length:
        raise DataError(
            f"series {key!r} has length {x.size}, expected {length}"
        )
    return x


def build_design(series_map, spec: str, h: int, node: str | None = None,
                 dates=None) -> HARDesign:
    """Build the in-sample design for one model over a full series span.

    ``series_map`` maps component labels to equal-length daily vectors;
    the target at origin t is the mean of the dependent series over
    t..t+h-1, and rows run from t = 22 to T - h (full trailing windows
    only), giving T - 22 - h + 1 rows.
    """
    if spec not in MODEL_SPECS:
        raise DataError(f"unknown model spec {spec!r}; valid: {MODEL_SPECS}")
    if h < 1:
        raise DataError(f"horizon must be >= 1, got {h}")
    if spec == "NODE_HAR":
        if node is None:
            raise DataError("NODE_HAR needs node=<component label>")
        dep_key = node
        daily = ((f"{node}_d", node),)
        base_key = node
    else:
        dep_key = "RV"
        daily = _DAILY_COLUMNS[spec]
        base_key = "RV"
    dep = _series(series_map, dep_key, None)
    T = dep.size
    need = LAG_MONTHLY + h + 1
    if T < need:
        raise DataError(
            f"series length {T} too short for spec {spec} at h={h}; "
            f"need at least {need} days"
        )
    rows = np.arange(LAG_MONTHLY, T - h + 1)
    cols = [np.ones(rows.size)]
    names = ["const"]
    for name, key in daily:
        x = _series(series_map, key, T)
        cols.append(x[rows - 1])
        names.append(name)
    base = _series(series_map, base_key, T)
    w = trailing_mean(base, LAG_WEEKLY)
    m = trailing_mean(base, LAG_MONTHLY)
    cols.append(w[rows])
    names.append(f"{base_key}_w")
    cols.append(m[rows])
    names.append(f"{base_key}_m")
    fwd = forward_mean(dep, h)
    origin_dates = tuple(np.asarray(dates)[rows]) if dates is not None else tuple(rows)
    return HARDesign(
        spec=spec,
        horizon=h,
        target=fwd[rows],
        regressors=np.column_stack(cols),
        column_names=tuple(names),
        origin_dates=origin_dates,
    )


@dataclass(frozen=True)
class ModelFit:
    """Least-squares fit: coefficients, residuals, and diagnostics."""

    spec: str
    horizon: int
    column_names: tuple[str, ...]
    coefficients: np.ndarray = field(repr=False)
    fitted: np.ndarray = field(repr=False)
    residuals: np.ndarray = field(repr=False)
    rank: int = 0
    regressors: np.ndarray = field(repr=False, default=None)
    origin_dates: tuple = ()

    @property
    def n_obs(self) -> int:
        return int(self.residuals.size)

    @property
    def n_params(self) -> int:
        return int(self.coefficients.size)

    @property
    def full_rank(self) -> bool:
        return self.rank == self.n_params


def ols_fit(design: HARDesign) -> ModelFit:
    """Minimum-norm least squares via a rank-revealing factorization."""
    X, y = design.regressors, design.target
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DataError("design contains non-finite entries")
    beta, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    fitted = X @ beta
    return ModelFit(
        spec=design.spec,
        horizon=design.horizon,
        column_names=design.column_names,
        coefficients=beta,
        fitted=fitted,
        residuals=y - fitted,
        rank=int(rank),
        regressors=X,
        origin_dates=design.origin_dates,
    )


def robust_se(fit: ModelFit) -> np.ndarray:
    """HC1 heteroskedasticity-consistent standard errors (diagnostics only).

    Rank-deficient fits return NaN throughout: under the minimum-norm
    convention no individual coefficient is identified, so standard
    errors are flagged unavailable rather than guessed.
    """
    X = fit.regressors
    if X is None:
        raise DataError("fit does not carry its regressor matrix")
    n, p = X.shape
    if not fit.full_rank:
        return np.full(p, np.nan)
    e2 = fit.residuals**2
    xtx_inv = np.linalg.inv(X.T @ X)
    meat = X.T @ (X * e2[:, None])
    cov = xtx_inv @ meat @ xtx_inv
    if n > p:
        cov = cov * (n / (n - p))
    return np.sqrt(np.maximum(np.diag(cov), 0.0))


def classical_se(fit: ModelFit) -> np.ndarray:
    """Homoskedastic OLS standard errors, for diagnostics comparisons."""
    X = fit.regressors
    n, p = X.shape
    if not fit.full_rank:
        return np.full(p, np.nan)
    sigma2 = float(fit.residuals @ fit.residuals) / max(n - p, 1)
    xtx_inv = np.linalg.inv(X.T @ X)
    return np.sqrt(np.maximum(sigma2 * np.diag(xtx_inv), 0.0))


def forecast(fit: ModelFit, regressor_row) -> float:
    """Inner product of the coefficient vector with one regressor row."""
    row = np.asarray(regressor_row, dtype=float)
    if row.shape != fit.coefficients.shape:
        raise DataError(
            f"regressor row shape {row.shape} does not match "
            f"{fit.coefficients.shape} for spec {fit.spec}"
        )
    return float(row @ fit.coefficients)


def forecast_row(series_map, spec: str, node: str | None = None) -> np.ndarray:
    """Out-of-sample regressor row using the last 22 days of the window."""
    if spec == "NODE_HAR":
        if node is None:
            raise DataError("NODE_HAR needs node=<component label>")
        daily = ((f"{node}_d", node),)
        base_key = node
    elif spec in _DAILY_COLUMNS:
        daily = _DAILY_COLUMNS[spec]
        base_key = "RV"
    else:
        raise DataError(f"unknown model spec {spec!r}; valid: {MODEL_SPECS}")
    first = _series(series_map, daily[0][1], None)
    T = first.size
    if T < LAG_MONTHLY:
        raise DataError(f"need at least {LAG_MONTHLY} days, got {T}")
    row = [1.0]
    for _, key in daily:
        row.append(_series(series_map, key, T)[-1])
    base = _series(series_map, base_key, T)
    row.append(float(np.mean(base[-LAG_WEEKLY:])))
    row.append(float(np.mean(base[-LAG_MONTHLY:])))
    return np.array(row)


def floor_forecast(value: float, floor: float = DEFAULT_FLOOR) -> float:
    """Clamp a forecast at the strictly positive floor used by QLIKE."""
    return float(max(value, floor))


class FloorPolicy:
    """Floor with a counter, so runs can report how often it engaged."""

    def __init__(self, floor: float = DEFAULT_FLOOR):
        self.floor = float(floor)
        self.count = 0

    def __call__(self, value: float) -> float:
        if value < self.floor:
            self.count += 1
            return self.floor
        return float(value)
