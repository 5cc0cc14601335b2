"""Intraday panels: validated per-asset grids of 1-minute log-returns.

Input files are delimited text with one row per intraday observation
(ISO-8601 timestamp, price). A trading day is a contiguous block of
grid_size + 1 prices (the open plus one price per interval end);
malformed days are skipped with a warning so one bad day never kills a
backfill.
"""

from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from . import measures
from .errors import DataError
from .measures import DEFAULT_ALPHAS, DEFAULT_GRID_SIZE, DEFAULT_SEGMENT_LENGTH

logger = logging.getLogger(__name__)

_SPLIT = re.compile(r"[,;\t ]+")


@dataclass(frozen=True)
class IntradayPanel:
    """Per-asset matrix of intraday log-returns, one row per day."""

    asset_id: str
    dates: tuple[str, ...]
    returns: np.ndarray = field(repr=False)

    def __post_init__(self):
        r = np.asarray(self.returns, dtype=float)
        if r.ndim != 2 or r.shape[0] != len(self.dates):
            raise DataError(
                f"returns shape {r.shape} does not match {len(self.dates)} dates"
            )
        if not np.all(np.isfinite(r)):
            raise DataError("panel returns contain non-finite values")
        if any(a >= b for a, b in zip(self.dates, self.dates[1:])):
            raise DataError("panel dates must be strictly increasing")
        object.__setattr__(self, "returns", r)

    @property
    def n_days(self) -> int:
        return len(self.dates)

    @property
    def grid_size(self) -> int:
        return int(self.returns.shape[1])


def read_price_file(path, grid_size: int = DEFAULT_GRID_SIZE, asset_id=None) -> IntradayPanel:
    """Parse a timestamp/price file into an IntradayPanel.

    Days with the wrong observation count, duplicate timestamps,
    unparseable rows, or non-positive prices are skipped; each skip is
    logged with the reason and the offending line number where
    applicable. Raises DataError when no valid day remains.
    """
    path = Path(path)
    if asset_id is None:
        asset_id = path.stem.split(".")[0]
    # day date -> list of (timestamp, price, line_no); insertion ordered
    blocks: dict[str, list[tuple[str, float, int]]] = {}
    flagged: dict[str, str] = {}
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read price file {path}: {exc}") from exc
    with fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = _SPLIT.split(line)
            if len(parts) < 2:
                logger.warning("%s:%d: unparseable row %r", path, line_no, line)
                continue
            stamp = parts[0]
            if "T" not in stamp and len(parts) >= 3 and ":" in parts[1]:
                # date and time split by whitespace: rejoin
                stamp = parts[0] + "T" + parts[1]
                price_text = parts[2]
            else:
                price_text = parts[1]
            day = stamp[:10]
            if len(day) != 10 or day[4] != "-" or day[7] != "-":
                logger.warning(
                    "%s:%d: timestamp %r is not ISO-8601", path, line_no, stamp
                )
                continue
            try:
                price = float(price_text)
            except ValueError:
                logger.warning(
                    "%s:%d: unparseable price %r", path, line_no, price_text
                )
                flagged.setdefault(day, f"unparseable price at line {line_no}")
                continue
            rows = blocks.setdefault(day, [])
            if any(stamp == seen for seen, _, _ in rows):
                logger.warning(
                    "%s:%d: duplicate timestamp %r, row rejected", path, line_no, stamp
                )
                flagged.setdefault(day, f"duplicate timestamp at line {line_no}")
                continue
            rows.append((stamp, price, line_no))

    dates, day_returns = [], []
    n_prices = grid_size + 1
    for day, rows in blocks.items():
        if day in flagged:
            logger.warning("%s: skipped day %s: %s", path, day, flagged[day])
            continue
        if len(rows) != n_prices:
            reason = "short day" if len(rows) < n_prices else "long day"
            logger.warning(
                "%s: skipped day %s: %s (%d prices, expected %d)",
                path, day, reason, len(rows), n_prices,
            )
            continue
        prices = np.array([p for _, p, _ in rows])
        if np.any(prices <= 0.0):
            logger.warning("%s: skipped day %s: non-positive price", path, day)
            continue
        if dates and day <= dates[-1]:
            logger.warning("%s: skipped day %s: out of order", path, day)
            continue
        dates.append(day)
        day_returns.append(measures.log_returns(prices))
    if not dates:
        raise DataError(f"{path}: no valid {n_prices}-price day found")
    return IntradayPanel(asset_id, tuple(dates), np.vstack(day_returns))


def write_panel(panel: IntradayPanel, path) -> None:
    """Write a normalized panel file: date column plus one return per slot."""
    n = panel.grid_size
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date"] + [f"r{i + 1}" for i in range(n)])
        for day, row in zip(panel.dates, panel.returns):
            writer.writerow([day] + [repr(float(v)) for v in row])


def read_panel(path, asset_id=None) -> IntradayPanel:
    """Read a normalized panel file written by :func:`write_panel`."""
    path = Path(path)
    if asset_id is None:
        asset_id = path.stem.split(".")[0]
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"cannot read panel file {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "date":
            raise DataError(f"{path}: not a panel file (missing date header)")
        dates, rows = [], []
        for rec in reader:
            if not rec:
                continue
            dates.append(rec[0])
            rows.append([float(v) for v in rec[1:]])
    if not dates:
        raise DataError(f"{path}: panel file has no rows")
    return IntradayPanel(asset_id, tuple(dates), np.array(rows))


def component_labels(
    n_pv: int = len(DEFAULT_ALPHAS) + 1, n_segments: int = 5
) -> tuple[str, ...]:
    """All node labels the standard decompositions produce, in catalog order."""
    labels = ["RV", "SV-", "SV+"]
    labels += [f"PV{l + 1}" for l in range(n_pv)]
    labels += [f"T{k + 1}" for k in range(n_segments)]
    labels += [f"T{k + 1}SV{s}" for s in ("-", "+") for k in range(n_segments)]
    labels += [
        f"T{k + 1}PV{l + 1}" for l in range(n_pv) for k in range(n_segments)
    ]
    return tuple(labels)


def panel_components(
    panel: IntradayPanel,
    alphas=DEFAULT_ALPHAS,
    segment_length: int = DEFAULT_SEGMENT_LENGTH,
) -> pd.DataFrame:
    """Daily series of every standard component, indexed by date.

    Columns cover the full catalog vocabulary: RV, the semivariances,
    partial variances, temporal segments, and both combined grids
    (sign by time, quantile by time). Zero-RV days get all-zero
    quantile components by convention.
    """
    r = panel.returns
    n = panel.grid_size
    if n % segment_length != 0:
        raise DataError(
            f"segment length {segment_length} does not divide grid size {n}"
        )
    n_seg = n // segment_length
    n_pv = len(tuple(alphas)) + 1
    cols: dict[str, np.ndarray] = {}
    sq = r * r
    neg = r < 0.0
    cols["RV"] = sq.sum(axis=1)
    cols["SV-"] = np.where(neg, sq, 0.0).sum(axis=1)
    cols["SV+"] = np.where(~neg, sq, 0.0).sum(axis=1)
    seg_sq = sq.reshape(panel.n_days, n_seg, segment_length)
    tvals = seg_sq.sum(axis=2)
    for k in range(n_seg):
        cols[f"T{k + 1}"] = tvals[:, k]
    seg_neg = np.where(neg, sq, 0.0).reshape(panel.n_days, n_seg, segment_length)
    seg_pos = np.where(~neg, sq, 0.0).reshape(panel.n_days, n_seg, segment_length)
    tsv_minus = seg_neg.sum(axis=2)
    tsv_plus = seg_pos.sum(axis=2)
    for k in range(n_seg):
        cols[f"T{k + 1}SV-"] = tsv_minus[:, k]
    for k in range(n_seg):
        cols[f"T{k + 1}SV+"] = tsv_plus[:, k]
    pv = np.zeros((panel.n_days, n_pv))
    tpv = np.zeros((panel.n_days, n_pv, n_seg))
    for t in range(panel.n_days):
        day = r[t]
        if cols["RV"][t] == 0.0:
            continue
        cuts = measures.quantile_thresholds(day, alphas)
        pv[t] = measures.threshold_components(day, cuts)
        tpv[t] = measures.combined_components(
            day, thresholds=cuts, segment_length=segment_length
        )
    for l in range(n_pv):
        cols[f"PV{l + 1}"] = pv[:, l]
    for l in range(n_pv):
        for k in range(n_seg):
            cols[f"T{k + 1}PV{l + 1}"] = tpv[:, l, k]
    frame = pd.DataFrame(cols, index=pd.Index(panel.dates, name="date"))
    return frame[list(component_labels(n_pv, n_seg))]
