"""Rolling-window forecasting experiment: config, synthetic data, driver.

The driver refits every configured model on a fixed-length trailing
window at each forecast origin, produces direct and reconciled
top-level variance forecasts for each horizon, floors them, and scores
them against realized multi-day averages. All randomness flows from a
single master seed; reruns with the same config and seed are
byte-identical regardless of worker count.
"""

from __future__ import annotations

import concurrent.futures
import csv
import hashlib
import json
import logging
import os
from dataclasses import dataclass, field, fields

import numpy as np
import pandas as pd

from . import har, reconcile
from .errors import ConfigError, DataError
from .evaluate import LOSS_KINDS, MCS_STATISTICS, QLIKE_FORMS, mse_loss, qlike_loss
from .hierarchy import (
    CATALOG,
    HierarchyStructure,
    NodeSeriesSet,
    assemble_node_series,
    build_hierarchy,
    is_coherent,
)
from .measures import DEFAULT_ALPHAS, DEFAULT_GRID_SIZE, DEFAULT_SEGMENT_LENGTH, _check_alphas
from .panels import IntradayPanel, panel_components

logger = logging.getLogger(__name__)

#: the seven core procedures; the T* variants add the grouped hierarchies
DEFAULT_PROCEDURES = ("HAR", "SV", "PV3", "SV_bu", "PV3_bu", "SV_shr", "PV3_shr")

#: procedure name -> (kind, family direct model, hierarchy name or None)
PROCEDURE_SPECS: dict[str, tuple[str, str, str | None]] = {
    "HAR": ("direct", "HAR", None),
    "SV": ("direct", "SV_HAR", None),
    "PV3": ("direct", "PV3_HAR", None),
    "SV_bu": ("bu", "SV_HAR", "SSV"),
    "PV3_bu": ("bu", "PV3_HAR", "SPV3"),
    "SV_shr": ("shr", "SV_HAR", "SSV"),
    "PV3_shr": ("shr", "PV3_HAR", "SPV3"),
    "TSV_bu": ("bu", "SV_HAR", "STSV"),
    "TSV_shr": ("shr", "SV_HAR", "CTSV"),
    "TPV3_bu": ("bu", "PV3_HAR", "STPV3"),
    "TPV3_shr": ("shr", "PV3_HAR", "CTPV3"),
}

PROCEDURES = tuple(PROCEDURE_SPECS)

VALID_HORIZONS = (1, 5, 22)

DATA_SOURCES = ("synthetic", "panels")

GENERATORS = ("intraday", "nodes")

_SYNTHETIC_START = "2006-01-02"


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated settings for one rolling-window run."""

    assets: tuple[str, ...]
    procedures: tuple[str, ...] = DEFAULT_PROCEDURES
    horizons: tuple[int, ...] = (1, 5, 22)
    window: int = 1007
    step: int = 1
    alphas: tuple[float, ...] = DEFAULT_ALPHAS
    segment_length: int = DEFAULT_SEGMENT_LENGTH
    grid_size: int = DEFAULT_GRID_SIZE
    seed: int = 0
    loss_kinds: tuple[str, ...] = LOSS_KINDS
    qlike_form: str = "patton"
    n_boot: int = 10_000
    block_length: float = 22.0
    mcs_alpha: float = 0.2
    mcs_statistic: str = "TR"
    nemenyi_alpha: float = 0.05
    floor: float = har.DEFAULT_FLOOR
    hierarchy: str = "CTPV3"
    data_source: str = "synthetic"
    data_dir: str = ""
    synthetic_days: int = 1200
    synthetic_generator: str = "intraday"
    noise_scale: float = 0.4
    subperiods: tuple[tuple[str, str, str], ...] = ()
    jobs: int = 0

    def __post_init__(self):
        if not self.assets:
            raise ConfigError("assets must list at least one asset id")
        if len(set(self.assets)) != len(self.assets):
            raise ConfigError(f"duplicate asset ids in {self.assets}")
        for proc in self.procedures:
            if proc not in PROCEDURE_SPECS:
                raise ConfigError(
                    f"unknown procedure {proc!r}; valid: {PROCEDURES}"
                )
        if not self.procedures:
            raise ConfigError("procedures must not be empty")
        if len(set(self.procedures)) != len(self.procedures):
            raise ConfigError(f"duplicate procedures in {self.procedures}")
        if not self.horizons:
            raise ConfigError("horizons must not be empty")
        for h in self.horizons:
            if h not in VALID_HORIZONS:
                raise ConfigError(
                    f"unsupported horizon {h}; valid: {VALID_HORIZONS}"
                )
        object.__setattr__(self, "horizons", tuple(sorted(set(self.horizons))))
        min_window = har.LAG_MONTHLY + 1 + max(self.horizons)
        if self.window < min_window:
            raise ConfigError(
                f"window {self.window} too short; need >= 23 + max horizon "
                f"= {min_window}"
            )
        if self.step < 1:
            raise ConfigError(f"step must be >= 1, got {self.step}")
        try:
            _check_alphas(self.alphas)
        except DataError as exc:
            raise ConfigError(str(exc)) from exc
        if self.segment_length < 1 or self.grid_size % self.segment_length != 0:
            raise ConfigError(
                f"segment length {self.segment_length} must divide grid size "
                f"{self.grid_size}"
            )
        for kind in self.loss_kinds:
            if kind not in LOSS_KINDS:
                raise ConfigError(f"unknown loss kind {kind!r}; valid: {LOSS_KINDS}")
        if self.qlike_form not in QLIKE_FORMS:
            raise ConfigError(
                f"unknown qlike form {self.qlike_form!r}; valid: {QLIKE_FORMS}"
            )
        if self.mcs_statistic not in MCS_STATISTICS:
            raise ConfigError(
                f"unknown MCS statistic {self.mcs_statistic!r}; "
                f"valid: {MCS_STATISTICS}"
            )
        if not 0.0 < self.mcs_alpha < 1.0 or not 0.0 < self.nemenyi_alpha < 1.0:
            raise ConfigError("alpha levels must lie in (0, 1)")
        if self.n_boot < 100:
            raise ConfigError(f"bootstrap.n must be >= 100, got {self.n_boot}")
        if self.block_length < 1.0:
            raise ConfigError(
                f"bootstrap.block must be >= 1, got {self.block_length}"
            )
        if self.floor <= 0.0:
            raise ConfigError(f"floor must be positive, got {self.floor}")
        if self.hierarchy.upper() not in CATALOG:
            raise ConfigError(
                f"unknown hierarchy {self.hierarchy!r}; valid: {CATALOG}"
            )
        if self.data_source not in DATA_SOURCES:
            raise ConfigError(
                f"unknown data source {self.data_source!r}; valid: {DATA_SOURCES}"
            )
        if self.data_source == "panels" and not self.data_dir:
            raise ConfigError("data.source=panels requires data.dir")
        if self.synthetic_generator not in GENERATORS:
            raise ConfigError(
                f"unknown generator {self.synthetic_generator!r}; "
                f"valid: {GENERATORS}"
            )
        if (self.data_source == "synthetic"
                and self.synthetic_days < self.window + max(self.horizons)):
            raise ConfigError(
                f"synthetic.days {self.synthetic_days} gives no forecast "
                f"origins; need >= window + max horizon = "
                f"{self.window + max(self.horizons)}"
            )
        if self.noise_scale <= 0.0:
            raise ConfigError(f"noise scale must be positive, got {self.noise_scale}")
        seen = set()
        for name, start, end in self.subperiods:
            if name in seen:
                raise ConfigError(f"duplicate sub-period name {name!r}")
            seen.add(name)
            if start > end:
                raise ConfigError(
                    f"sub-period {name!r} has start {start} after end {end}"
                )
        if self.jobs < 0:
            raise ConfigError(f"jobs must be >= 0, got {self.jobs}")

    def as_dict(self) -> dict:
        """Plain-JSON view, used for the run manifest."""
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = [list(x) if isinstance(x, tuple) else x for x in v]
            out[f.name] = v
        return out


def _parse_scalar(key, raw, kind):
    try:
        return kind(raw)
    except ValueError as exc:
        raise ConfigError(f"config key {key!r}: cannot parse {raw!r}") from exc


def _parse_list(raw: str) -> list[str]:
    return [tok.strip() for tok in raw.split(",") if tok.strip()]


def _parse_subperiods(raw: str) -> tuple[tuple[str, str, str], ...]:
    out = []
    for chunk in raw.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = [p.strip() for p in chunk.split(":")]
        if len(parts) != 3:
            raise ConfigError(
                f"sub-period {chunk!r} must be name:start:end "
                f"(e.g. early:2006-01-02:2008-12-31)"
            )
        out.append(tuple(parts))
    return tuple(out)


#: config-file key -> (ExperimentConfig field, parser)
_CONFIG_KEYS = {
    "assets": ("assets", lambda k, v: tuple(_parse_list(v))),
    "procedures": ("procedures", lambda k, v: tuple(_parse_list(v))),
    "horizons": (
        "horizons",
        lambda k, v: tuple(_parse_scalar(k, t, int) for t in _parse_list(v)),
    ),
    "window": ("window", lambda k, v: _parse_scalar(k, v, int)),
    "step": ("step", lambda k, v: _parse_scalar(k, v, int)),
    "seed": ("seed", lambda k, v: _parse_scalar(k, v, int)),
    "alphas": (
        "alphas",
        lambda k, v: tuple(_parse_scalar(k, t, float) for t in _parse_list(v)),
    ),
    "segment.length": ("segment_length", lambda k, v: _parse_scalar(k, v, int)),
    "grid.size": ("grid_size", lambda k, v: _parse_scalar(k, v, int)),
    "loss.kinds": ("loss_kinds", lambda k, v: tuple(t.upper() for t in _parse_list(v))),
    "qlike.mode": ("qlike_form", lambda k, v: v.strip().lower()),
    "bootstrap.n": ("n_boot", lambda k, v: _parse_scalar(k, v, int)),
    "bootstrap.block": ("block_length", lambda k, v: _parse_scalar(k, v, float)),
    "mcs.alpha": ("mcs_alpha", lambda k, v: _parse_scalar(k, v, float)),
    "mcs.statistic": ("mcs_statistic", lambda k, v: v.strip()),
    "nemenyi.alpha": ("nemenyi_alpha", lambda k, v: _parse_scalar(k, v, float)),
    "floor": ("floor", lambda k, v: _parse_scalar(k, v, float)),
    "hierarchy": ("hierarchy", lambda k, v: v.strip()),
    "data.source": ("data_source", lambda k, v: v.strip().lower()),
    "data.dir": ("data_dir", lambda k, v: v.strip()),
    "synthetic.days": ("synthetic_days", lambda k, v: _parse_scalar(k, v, int)),
    "synthetic.generator": ("synthetic_generator", lambda k, v: v.strip().lower()),
    "synthetic.noise": ("noise_scale", lambda k, v: _parse_scalar(k, v, float)),
    "subperiods": ("subperiods", lambda k, v: _parse_subperiods(v)),
    "jobs": ("jobs", lambda k, v: _parse_scalar(k, v, int)),
}


def parse_config_text(text: str) -> ExperimentConfig:
    """Parse flat ``key = value`` config text into an ExperimentConfig.

    Lines starting with '#' (or blank) are skipped; keys are the dotted
    names documented in the README; unknown or duplicate keys are
    rejected with the offending line number.
    """
    settings: dict[str, object] = {}
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().lower()
        value = value.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(
                f"config line {lineno}: unknown key {key!r}; "
                f"valid keys: {sorted(_CONFIG_KEYS)}"
            )
        if key in seen:
            raise ConfigError(f"config line {lineno}: duplicate key {key!r}")
        seen.add(key)
        dest, parser = _CONFIG_KEYS[key]
        settings[dest] = parser(key, value)
    if "assets" not in settings:
        raise ConfigError("config must set 'assets'")
    return ExperimentConfig(**settings)


def load_config(path) -> ExperimentConfig:
    """Read and parse a config file; missing file is a config error."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_config_text(text)


# ---------------------------------------------------------------------------
# synthetic data


def _synthetic_dates(n_days: int) -> tuple[str, ...]:
    days = np.busday_offset(_SYNTHETIC_START, np.arange(n_days), roll="forward")
    return tuple(np.datetime_as_string(days, unit="D"))


def _log_har_path(rng, T: int, mu: float, phi=(0.36, 0.28, 0.28),
                  sigma: float = 0.4, burn: int = 150) -> np.ndarray:
    """Persistent Gaussian log-variance path driven by HAR-style lags."""
    n = T + burn
    level = np.full(n, mu)
    const = mu * (1.0 - float(sum(phi)))
    eps = rng.standard_normal(n) * sigma
    for t in range(1, n):
        d = level[t - 1]
        w = level[max(0, t - 5):t].mean()
        m = level[max(0, t - 22):t].mean()
        level[t] = const + phi[0] * d + phi[1] * w + phi[2] * m + eps[t]
    return level[burn:]


def synthetic_panel(seed, n_days: int, grid_size: int = DEFAULT_GRID_SIZE,
                    asset_id: str = "SYN", noise_scale: float = 0.4) -> IntradayPanel:
    """Intraday Gaussian returns with a U-shaped periodicity profile and a
    persistent stochastic daily variance level."""
    if n_days < 30:
        raise DataError(f"need at least 30 days, got {n_days}")
    rng = np.random.default_rng(seed)
    daily_var = np.exp(_log_har_path(rng, n_days, mu=np.log(1e-4),
                                     sigma=noise_scale))
    u = (np.arange(grid_size) + 0.5) / grid_size
    shape = 1.0 + 1.5 * (2.0 * u - 1.0) ** 2
    profile = shape / shape.mean()
    sd = np.sqrt(np.outer(daily_var, profile) / grid_size)
    returns = rng.standard_normal((n_days, grid_size)) * sd
    return IntradayPanel(asset_id=asset_id, dates=_synthetic_dates(n_days),
                         returns=returns)


def synthetic_node_series(seed, T: int, hierarchy: str = "CTPV3",
                          noise_scale: float = 0.4) -> NodeSeriesSet:
    """Coherent node series: exponentiated HAR-driven Gaussian bottoms,
    uppers built through S (heteroskedastic levels across bottoms)."""
    if T < 30:
        raise DataError(f"need at least 30 days, got {T}")
    structure = build_hierarchy(hierarchy)
    rng = np.random.default_rng(seed)
    n_b = structure.n_b
    base_mu = np.log(1e-4 / n_b)
    offsets = np.linspace(-0.6, 0.6, n_b) if n_b > 1 else np.zeros(1)
    bottoms = np.column_stack([
        np.exp(_log_har_path(rng, T, base_mu + offsets[j], sigma=noise_scale))
        for j in range(n_b)
    ])
    return assemble_node_series(_synthetic_dates(T), bottoms, structure)


def synthetic_dgp(seed, T: int, hierarchy: str = "CTPV3",
                  noise_scale: float = 0.4, generator: str = "nodes"):
    """Dispatch to one of the two generators.

    "nodes" returns (NodeSeriesSet, None): coherent by construction.
    "intraday" returns (NodeSeriesSet, IntradayPanel): node series are
    measured from the simulated returns, exercising the decomposition
    stack end to end.
    """
    if generator == "nodes":
        return synthetic_node_series(seed, T, hierarchy, noise_scale), None
    if generator == "intraday":
        panel = synthetic_panel(seed, T, noise_scale=noise_scale)
        comps = panel_components(panel)
        structure = build_hierarchy(hierarchy)
        values = comps[list(structure.node_labels)].to_numpy(dtype=float)
        series = NodeSeriesSet(hierarchy=structure, dates=tuple(panel.dates),
                               values=values)
        return series, panel
    raise ConfigError(f"unknown generator {generator!r}; valid: {GENERATORS}")


# ---------------------------------------------------------------------------
# forecast store


class ForecastStore:
    """Keyed, append-only forecast records.

    Keys are (asset, origin_date, horizon, node, procedure); appending a
    duplicate key is an error. Rows serialize sorted by key so that the
    on-disk artifact is independent of append order and worker count.
    """

    COLUMNS = ("asset", "origin_date", "horizon", "node", "procedure", "value")

    def __init__(self):
        self._rows: dict[tuple[str, str, int, str, str], float] = {}

    def __len__(self) -> int:
        return len(self._rows)

    def append(self, asset, origin_date, horizon, node, procedure, value) -> None:
        key = (str(asset), str(origin_date), int(horizon), str(node), str(procedure))
        if key in self._rows:
            raise DataError(f"duplicate forecast key {key}")
        self._rows[key] = float(value)

    def extend(self, records) -> None:
        for rec in records:
            self.append(*rec)

    def records(self):
        """Sorted (asset, origin_date, horizon, node, procedure, value) tuples."""
        return [key + (val,) for key, val in sorted(self._rows.items())]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.records(), columns=list(self.COLUMNS))

    def value(self, asset, origin_date, horizon, node, procedure) -> float:
        key = (str(asset), str(origin_date), int(horizon), str(node), str(procedure))
        if key not in self._rows:
            raise DataError(f"no forecast stored under key {key}")
        return self._rows[key]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.COLUMNS)
            for asset, date, h, node, proc, val in self.records():
                writer.writerow([asset, date, h, node, proc, repr(float(val))])

    @classmethod
    def read_csv(cls, path) -> "ForecastStore":
        store = cls()
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(header) != cls.COLUMNS:
                raise DataError(
                    f"{path}: expected header {','.join(cls.COLUMNS)}, got {header}"
                )
            for row in reader:
                if len(row) != 6:
                    raise DataError(f"{path}: malformed row {row}")
                asset, date, h, node, proc, val = row
                store.append(asset, date, int(h), node, proc, float(val))
        return store

    def coherence_audit(self, tol: float = 1e-8) -> int:
        """Check every reconciled record group against its hierarchy.

        Groups records by (asset, origin, horizon, procedure) for the
        procedures that carry a hierarchy and verifies C y = 0 within
        ``tol`` (relative to the vector scale). Returns the number of
        groups checked; the first incoherent group raises.
        """
        structures: dict[str, HierarchyStructure] = {}
        groups: dict[tuple, dict[str, float]] = {}
        for (asset, date, h, node, proc), val in self._rows.items():
            spec = PROCEDURE_SPECS.get(proc)
            if spec is None or spec[0] == "direct":
                continue
            groups.setdefault((asset, date, h, proc), {})[node] = val
        checked = 0
        for (asset, date, h, proc), by_node in sorted(groups.items()):
            hname = PROCEDURE_SPECS[proc][2]
            structure = structures.setdefault(hname, build_hierarchy(hname))
            missing = [lab for lab in structure.node_labels if lab not in by_node]
            if missing:
                raise DataError(
                    f"store group ({asset}, {date}, h={h}, {proc}) is missing "
                    f"nodes {missing}"
                )
            y = np.array([by_node[lab] for lab in structure.node_labels])
            if not is_coherent(y, structure, tol):
                raise DataError(
                    f"incoherent reconciled forecast for ({asset}, {date}, "
                    f"h={h}, {proc})"
                )
            checked += 1
        return checked


# ---------------------------------------------------------------------------
# rolling driver


def _required_models(procedures) -> tuple[set[str], set[str]]:
    """Direct model specs and NODE_HAR labels needed by the procedures."""
    direct: set[str] = set()
    nodes: set[str] = set()
    for proc in procedures:
        kind, family, hname = PROCEDURE_SPECS[proc]
        if kind == "direct":
            direct.add(family)
        elif kind == "bu":
            nodes.update(build_hierarchy(hname).bottom_labels)
        else:
            direct.add(family)
            labels = build_hierarchy(hname).node_labels
            nodes.update(lab for lab in labels if lab != "RV")
    return direct, nodes


_MODEL_SOURCES = {
    "HAR": ("RV",),
    "SV_HAR": ("SV+", "SV-"),
    "PV3_HAR": ("PV1", "PV2", "PV3"),
}


class _AssetEngine:
    """Per-asset precomputed arrays and window-sliced OLS fits."""

    def __init__(self, components: pd.DataFrame, direct_models, node_models,
                 horizons):
        needed = {"RV"}
        for spec in direct_models:
            needed.update(_MODEL_SOURCES[spec])
        needed.update(node_models)
        missing = [lab for lab in sorted(needed) if lab not in components.columns]
        if missing:
            raise DataError(f"component table lacks columns {missing}")
        self.dates = np.asarray(components.index.astype(str))
        self.T = len(components)
        self.x = {lab: np.ascontiguousarray(components[lab].to_numpy(dtype=float))
                  for lab in sorted(needed)}
        self.lag1 = {lab: np.concatenate(([np.nan], v)) for lab, v in self.x.items()}
        self.m5 = {lab: har.trailing_mean(v, har.LAG_WEEKLY)
                   for lab, v in self.x.items()}
        self.m22 = {lab: har.trailing_mean(v, har.LAG_MONTHLY)
                    for lab, v in self.x.items()}
        self.fwd = {h: {lab: har.forward_mean(v, h) for lab, v in self.x.items()}
                    for h in sorted(set(horizons) | {1})}
        self.model_keys = tuple(
            sorted((spec, None) for spec in direct_models)
            + sorted(("NODE_HAR", lab) for lab in node_models)
        )

    def _columns(self, spec: str, node: str | None):
        if spec == "NODE_HAR":
            return ((node, node),), node, node
        daily = tuple((src, src) for _, src in har._DAILY_COLUMNS[spec])
        return daily, "RV", "RV"

    def design(self, spec, node, h, s, f):
        """Window design: rows t in [s+22, f-h], same layout as the
        full-span builder."""
        daily, base, dep = self._columns(spec, node)
        idx = np.arange(s + har.LAG_MONTHLY, f - h + 1)
        cols = [np.ones(idx.size)]
        for _, src in daily:
            cols.append(self.lag1[src][idx])
        cols.append(self.m5[base][idx])
        cols.append(self.m22[base][idx])
        X = np.column_stack(cols)
        y = self.fwd[h][dep][idx]
        return X, y

    def fit(self, spec, node, h, s, f):
        X, y = self.design(spec, node, h, s, f)
        coef, _, _, _ = np.linalg.lstsq(X, y, rcond=None)
        resid = y - X @ coef
        return coef, resid

    def forecast_row(self, spec, node, f):
        daily, base, _ = self._columns(spec, node)
        row = [1.0]
        for _, src in daily:
            row.append(self.lag1[src][f])
        row.append(self.m5[base][f])
        row.append(self.m22[base][f])
        return np.asarray(row)


@dataclass(frozen=True)
class RunResult:
    """Outputs of one rolling run: the store, loss rows, audit counters."""

    store: ForecastStore
    losses: pd.DataFrame
    floor_count: int
    config: ExperimentConfig = field(repr=False)


LOSS_COLUMNS = ("asset", "origin_date", "horizon", "procedure",
                "actual", "forecast", "mse", "qlike")


def _run_asset(asset: str, components: pd.DataFrame, config: ExperimentConfig):
    """All forecast and loss rows for one asset; pure function of inputs."""
    direct_models, node_models = _required_models(config.procedures)
    engine = _AssetEngine(components, direct_models, node_models, config.horizons)
    T = engine.T
    max_h = max(config.horizons)
    required = config.window + max_h
    if T < required:
        raise DataError(
            f"asset {asset}: need at least {required} days "
            f"(window {config.window} + max horizon {max_h}), have {T}"
        )
    structures = {
        PROCEDURE_SPECS[p][2]: build_hierarchy(PROCEDURE_SPECS[p][2])
        for p in config.procedures if PROCEDURE_SPECS[p][2] is not None
    }
    need_w = any(PROCEDURE_SPECS[p][0] == "shr" for p in config.procedures)
    floor = har.FloorPolicy(config.floor)
    store_rows = []
    loss_rows = []
    rv_fwd = {h: engine.fwd[h]["RV"] for h in config.horizons}

    def base_key(proc: str, label: str):
        family = PROCEDURE_SPECS[proc][1]
        return (family, None) if label == "RV" else ("NODE_HAR", label)

    need_fits1 = need_w or 1 in config.horizons
    for f in range(config.window, T, config.step):
        s = f - config.window
        fits1 = {}
        if need_fits1:
            fits1 = {key: engine.fit(key[0], key[1], 1, s, f)
                     for key in engine.model_keys}
        w_cache: dict[str, np.ndarray] = {}
        if need_w:
            for proc in config.procedures:
                kind, family, hname = PROCEDURE_SPECS[proc]
                if kind != "shr" or hname in w_cache:
                    continue
                structure = structures[hname]
                E = np.column_stack([
                    fits1[base_key(proc, lab)][1]
                    for lab in structure.node_labels
                ])
                w_cache[hname] = reconcile.shrink_covariance(
                    E, node_labels=structure.node_labels
                ).W
        frows = {key: engine.forecast_row(key[0], key[1], f)
                 for key in engine.model_keys}
        for h in config.horizons:
            if f > T - h:
                continue
            fits = fits1 if h == 1 else {
                key: engine.fit(key[0], key[1], h, s, f)
                for key in engine.model_keys
            }
            base_val = {key: float(frows[key] @ fits[key][0])
                        for key in engine.model_keys}
            date = engine.dates[f]
            actual = float(rv_fwd[h][f])
            for proc in config.procedures:
                kind, family, hname = PROCEDURE_SPECS[proc]
                if kind == "direct":
                    rv_hat = base_val[(family, None)]
                    store_rows.append((asset, date, h, "RV", proc, rv_hat))
                else:
                    structure = structures[hname]
                    if kind == "bu":
                        bottoms = np.array([
                            base_val[("NODE_HAR", lab)]
                            for lab in structure.bottom_labels
                        ])
                        y = reconcile.bottom_up(bottoms, structure)
                    else:
                        yhat = np.array([
                            base_val[base_key(proc, lab)]
                            for lab in structure.node_labels
                        ])
                        y = reconcile.mint_reconcile(
                            yhat, w_cache[hname], structure
                        )
                    for lab, val in zip(structure.node_labels, y):
                        store_rows.append((asset, date, h, lab, proc, float(val)))
                    rv_hat = float(y[0])
                floored = floor(rv_hat)
                mse = float(mse_loss(actual, floored))
                qlike = float(qlike_loss(max(actual, config.floor), floored,
                                         form=config.qlike_form))
                loss_rows.append((asset, date, h, proc, actual, floored,
                                  mse, qlike))
    return store_rows, loss_rows, floor.count


def run_rolling(config: ExperimentConfig, data: dict[str, pd.DataFrame]) -> RunResult:
    """Run the rolling experiment over every configured asset.

    ``data`` maps asset id to its daily component table (as produced by
    ``panel_components``). Assets run in parallel worker threads; the
    merged outputs are sorted, so results do not depend on the worker
    count. QLIKE scoring floors the realized average alongside the
    forecast, keeping the loss finite on zero-variance days.
    """
    missing = [a for a in config.assets if a not in data]
    if missing:
        raise DataError(f"no component data supplied for assets {missing}")
    jobs = config.jobs or min(len(config.assets), os.cpu_count() or 1)
    results = {}
    if jobs > 1 and len(config.assets) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = {
                asset: pool.submit(_run_asset, asset, data[asset], config)
                for asset in config.assets
            }
            results = {asset: fut.result() for asset, fut in futures.items()}
    else:
        results = {asset: _run_asset(asset, data[asset], config)
                   for asset in config.assets}
    store = ForecastStore()
    loss_rows = []
    floor_count = 0
    for asset in config.assets:
        rows, losses, floored = results[asset]
        store.extend(rows)
        loss_rows.extend(losses)
        floor_count += floored
    loss_rows.sort(key=lambda r: (r[0], r[1], r[2], r[3]))
    losses = pd.DataFrame(loss_rows, columns=list(LOSS_COLUMNS))
    logger.info(
        "rolling run complete: %d forecast records, %d loss rows, "
        "%d forecasts floored", len(store), len(losses), floor_count,
    )
    return RunResult(store=store, losses=losses, floor_count=floor_count,
                     config=config)


def write_losses_csv(losses: pd.DataFrame, path) -> None:
    """Serialize loss rows with full-precision reprs (rerun-stable)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(LOSS_COLUMNS)
        for row in losses.itertuples(index=False):
            writer.writerow([
                row.asset, row.origin_date, int(row.horizon), row.procedure,
                repr(float(row.actual)), repr(float(row.forecast)),
                repr(float(row.mse)), repr(float(row.qlike)),
            ])


def read_losses_csv(path) -> pd.DataFrame:
    try:
        losses = pd.read_csv(path, dtype={"asset": str, "origin_date": str,
                                          "procedure": str},
                             float_precision="round_trip")
    except OSError as exc:
        raise DataError(f"cannot read losses file {path}: {exc}") from exc
    missing = [c for c in LOSS_COLUMNS if c not in losses.columns]
    if missing:
        raise DataError(f"{path}: losses table lacks columns {missing}")
    return losses


# ---------------------------------------------------------------------------
# run manifest


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


#: manifest fields ignored by the digest (volatile or output-derived)
_VOLATILE_MANIFEST_KEYS = ("created", "outputs", "digest")


def manifest_digest(manifest: dict) -> str:
    """Digest over the input-identifying fields only.

    Two runs with equal digests consumed identical config, seed, code
    version, and input files, and therefore produce equal outputs.
    """
    stable = {k: v for k, v in manifest.items()
              if k not in _VOLATILE_MANIFEST_KEYS}
    blob = json.dumps(stable, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def build_manifest(config: ExperimentConfig, inputs: dict[str, str],
                   outputs: dict[str, str], floor_count: int,
                   created: str = "") -> dict:
    from . import __version__

    manifest = {
        "artifact": "rvhier",
        "version": __version__,
        "seed": config.seed,
        "config": config.as_dict(),
        "inputs": dict(sorted(inputs.items())),
        "outputs": dict(sorted(outputs.items())),
        "floor_count": int(floor_count),
        "versions": {
            "numpy": np.__version__,
            "pandas": pd.__version__,
        },
        "created": created,
    }
    manifest["digest"] = manifest_digest(manifest)
    return manifest


def write_manifest(manifest: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# data acquisition for runs


def synthetic_components(config: ExperimentConfig) -> dict[str, pd.DataFrame]:
    """Component tables for each configured asset from the intraday DGP.

    Per-asset seeds derive from the master seed as [seed, asset index],
    so the panel set is a pure function of the config.
    """
    if config.synthetic_generator != "intraday":
        raise ConfigError(
            "runs need the full component vocabulary; only the 'intraday' "
            "generator provides it (synthetic.generator=intraday)"
        )
    out = {}
    for i, asset in enumerate(config.assets):
        panel = synthetic_panel(
            seed=[config.seed, i], n_days=config.synthetic_days,
            grid_size=config.grid_size, asset_id=asset,
            noise_scale=config.noise_scale,
        )
        out[asset] = panel_components(
            panel, alphas=config.alphas, segment_length=config.segment_length
        )
        logger.info("generated synthetic asset %s: %d days", asset,
                    config.synthetic_days)
    return out
