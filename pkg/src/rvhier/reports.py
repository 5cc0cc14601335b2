"""Report tables over stored loss rows.

Inputs are the long-format loss tables produced by the rolling driver
(columns asset, origin_date, horizon, procedure, actual, forecast, mse,
qlike). Outputs are benchmark-ratio tables (rows = procedures, columns
= horizon x loss), pairwise DM p-value matrices, MCS membership tables,
Nemenyi mean-rank interval tables, and per-sub-period reruns of all of
the above. All CSVs serialize floats via repr, so identical inputs give
identical bytes.
"""

from __future__ import annotations

import csv
import logging

import numpy as np
import pandas as pd

from .errors import ConfigError, DataError
from .evaluate import (
    DEFAULT_BLOCK_LENGTH,
    DEFAULT_N_BOOT,
    LOSS_KINDS,
    dm_test,
    geo_mean_ratio,
    mcb_nemenyi,
    mcs,
)

logger = logging.getLogger(__name__)

_LOSS_COLUMN = {"MSE": "mse", "QLIKE": "qlike"}


def _check_kind(kind: str) -> str:
    kind = kind.upper()
    if kind not in _LOSS_COLUMN:
        raise ConfigError(f"unknown loss kind {kind!r}; valid: {LOSS_KINDS}")
    return kind


def _procedure_order(losses: pd.DataFrame, procedures=None) -> tuple[str, ...]:
    present = list(dict.fromkeys(losses["procedure"]))
    if procedures is None:
        return tuple(sorted(present))
    missing = [p for p in procedures if p not in present]
    if missing:
        raise DataError(f"loss table has no rows for procedures {missing}")
    return tuple(procedures)


def loss_pivot(losses: pd.DataFrame, asset: str, horizon: int, kind: str,
               procedures=None) -> pd.DataFrame:
    """Days x procedures loss matrix for one asset and horizon."""
    kind = _check_kind(kind)
    sub = losses[(losses["asset"] == asset) & (losses["horizon"] == horizon)]
    if sub.empty:
        raise DataError(f"no loss rows for asset {asset!r} at h={horizon}")
    order = _procedure_order(sub, procedures)
    piv = sub.pivot(index="origin_date", columns="procedure",
                    values=_LOSS_COLUMN[kind])
    piv = piv.reindex(columns=list(order)).sort_index()
    if piv.isna().any().any():
        bad = piv.columns[piv.isna().any()].tolist()
        raise DataError(
            f"unbalanced loss rows for asset {asset!r} at h={horizon}: "
            f"procedures {bad} are missing origins"
        )
    return piv


def ratio_table(losses: pd.DataFrame, benchmark: str = "HAR",
                kinds=LOSS_KINDS, horizons=None, procedures=None,
                assets=None) -> pd.DataFrame:
    """Mean-loss ratios versus the benchmark, geometric-mean across assets.

    Rows are procedures; columns are named ``<KIND>_h<horizon>``. Each
    cell is the geometric mean over assets of (procedure mean loss /
    benchmark mean loss); values below 1 beat the benchmark.
    """
    if assets is None:
        assets = tuple(sorted(losses["asset"].unique()))
    if horizons is None:
        horizons = tuple(sorted(losses["horizon"].unique()))
    order = _procedure_order(losses, procedures)
    if benchmark not in order:
        raise DataError(
            f"benchmark {benchmark!r} has no loss rows; present: {list(order)}"
        )
    out = {}
    for kind in kinds:
        kind = _check_kind(kind)
        for h in horizons:
            ratios = {proc: [] for proc in order}
            for asset in assets:
                piv = loss_pivot(losses, asset, h, kind, order)
                means = piv.mean(axis=0)
                bench = float(means[benchmark])
                if bench <= 0.0:
                    raise DataError(
                        f"benchmark {benchmark!r} mean loss is not positive "
                        f"for asset {asset!r} at h={h}"
                    )
                for proc in order:
                    ratios[proc].append(float(means[proc]) / bench)
            out[f"{kind}_h{h}"] = [geo_mean_ratio(ratios[proc]) for proc in order]
    return pd.DataFrame(out, index=pd.Index(order, name="procedure"))


def dm_table(losses: pd.DataFrame, asset: str, horizon: int, kind: str,
             procedures=None) -> pd.DataFrame:
    """Pairwise one-sided DM p-values: entry (i, j) small means row
    procedure i forecast significantly better than column procedure j."""
    piv = loss_pivot(losses, asset, horizon, kind, procedures)
    k = piv.shape[1]
    out = np.full((k, k), np.nan)
    cols = piv.to_numpy()
    for i in range(k):
        for j in range(k):
            if i == j:
                continue
            out[i, j] = dm_test(cols[:, i], cols[:, j], h=horizon).pvalue
    return pd.DataFrame(out, index=piv.columns, columns=piv.columns)


def mcs_table(losses: pd.DataFrame, asset: str, horizon: int, kind: str,
              alpha: float = 0.2, n_boot: int = DEFAULT_N_BOOT,
              block_length: float = DEFAULT_BLOCK_LENGTH,
              statistic: str = "TR", seed: int = 0,
              procedures=None) -> pd.DataFrame:
    """Model Confidence Set membership for one asset/horizon/loss.

    The bootstrap seed is derived deterministically from (seed, horizon,
    loss kind, asset name), so every table is reproducible in isolation.
    """
    kind = _check_kind(kind)
    piv = loss_pivot(losses, asset, horizon, kind, procedures)
    sub_seed = [int(seed), int(horizon), LOSS_KINDS.index(kind),
                *(ord(c) for c in str(asset))]
    result = mcs(piv.to_numpy(), alpha=alpha, n_boot=n_boot,
                 expected_block_len=block_length, statistic=statistic,
                 seed=sub_seed, labels=tuple(piv.columns))
    in_set = {lab: lab in result.survivors for lab in result.labels}
    return pd.DataFrame(
        {
            "mean_loss": piv.mean(axis=0).to_numpy(),
            "pvalue": result.pvalues,
            "in_set": [int(in_set[lab]) for lab in result.labels],
        },
        index=pd.Index(result.labels, name="procedure"),
    )


def nemenyi_table(losses: pd.DataFrame, horizon: int, kind: str,
                  alpha: float = 0.05, asset=None,
                  procedures=None) -> pd.DataFrame:
    """Mean ranks with critical-distance intervals, pooled across assets.

    Ranks are computed within each (asset, origin) row, so pooling
    simply stacks the per-asset day panels.
    """
    kind = _check_kind(kind)
    assets = [asset] if asset is not None else sorted(losses["asset"].unique())
    pivots = [loss_pivot(losses, a, horizon, kind, procedures) for a in assets]
    order = pivots[0].columns
    for piv in pivots[1:]:
        if not piv.columns.equals(order):
            raise DataError("procedure sets differ across assets")
    stacked = np.vstack([piv.to_numpy() for piv in pivots])
    result = mcb_nemenyi(stacked, alpha=alpha, labels=tuple(order))
    return pd.DataFrame(
        {
            "mean_rank": result.mean_ranks,
            "lower": result.lower,
            "upper": result.upper,
        },
        index=pd.Index(result.labels, name="procedure"),
    )


# ---------------------------------------------------------------------------
# sub-periods


def _validate_splits(splits) -> tuple[tuple[str, str, str], ...]:
    splits = tuple(tuple(s) for s in splits)
    for s in splits:
        if len(s) != 3:
            raise ConfigError(f"sub-period {s!r} must be (name, start, end)")
    ordered = sorted(splits, key=lambda s: s[1])
    for prev, cur in zip(ordered, ordered[1:]):
        if cur[1] <= prev[2]:
            raise DataError(
                f"sub-periods {prev[0]!r} and {cur[0]!r} overlap: "
                f"{prev[1]}..{prev[2]} vs {cur[1]}..{cur[2]}"
            )
    return splits


def sub_period_report(losses: pd.DataFrame, splits, benchmark: str = "HAR",
                      kinds=LOSS_KINDS, procedures=None) -> dict[str, pd.DataFrame]:
    """Ratio tables recomputed on date-filtered slices of the loss rows.

    ``splits`` is a sequence of (name, start_date, end_date) with
    inclusive ISO-date bounds; overlapping periods are an error, empty
    periods are skipped with a warning.
    """
    _validate_splits(splits)
    out: dict[str, pd.DataFrame] = {}
    for name, start, end in splits:
        sub = losses[(losses["origin_date"] >= start)
                     & (losses["origin_date"] <= end)]
        if sub.empty:
            logger.warning("sub-period %r (%s..%s) has no loss rows; omitted",
                           name, start, end)
            continue
        out[name] = ratio_table(sub, benchmark=benchmark, kinds=kinds,
                                procedures=procedures)
    return out


# ---------------------------------------------------------------------------
# table serialization


def write_frame_csv(frame: pd.DataFrame, path) -> None:
    """CSV with repr-serialized floats (byte-stable across reruns)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        index_name = frame.index.name or "index"
        writer.writerow([index_name, *frame.columns])
        for idx, row in zip(frame.index, frame.itertuples(index=False)):
            cells = [repr(float(v)) if isinstance(v, (float, np.floating))
                     else v for v in row]
            writer.writerow([idx, *cells])


def write_report_tables(losses: pd.DataFrame, out_dir, benchmark: str = "HAR",
                        kinds=LOSS_KINDS, procedures=None,
                        mcs_alpha: float = 0.2, n_boot: int = DEFAULT_N_BOOT,
                        block_length: float = DEFAULT_BLOCK_LENGTH,
                        statistic: str = "TR", nemenyi_alpha: float = 0.05,
                        seed: int = 0, subperiods=()) -> dict[str, str]:
    """Emit the full report set into ``out_dir``; returns name -> path.

    Statistics with sample-size preconditions (DM, MCS, Nemenyi) are
    skipped with a warning when a slice is too short instead of failing
    the whole report run.
    """
    import os

    os.makedirs(out_dir, exist_ok=True)
    written: dict[str, str] = {}

    def emit(name: str, frame: pd.DataFrame) -> None:
        path = os.path.join(out_dir, name)
        write_frame_csv(frame, path)
        written[name] = path

    assets = tuple(sorted(losses["asset"].unique()))
    horizons = tuple(sorted(losses["horizon"].unique()))
    emit("ratio_table.csv", ratio_table(losses, benchmark=benchmark,
                                        kinds=kinds, procedures=procedures))
    if len(assets) > 1:
        for asset in assets:
            emit(f"ratio_table_{asset}.csv",
                 ratio_table(losses, benchmark=benchmark, kinds=kinds,
                             procedures=procedures, assets=(asset,)))
    for kind in kinds:
        kind = _check_kind(kind)
        for h in horizons:
            for asset in assets:
                tag = f"{asset}_h{h}_{kind}"
                try:
                    emit(f"dm_{tag}.csv",
                         dm_table(losses, asset, h, kind, procedures))
                except DataError as exc:
                    logger.warning("skipping DM table %s: %s", tag, exc)
                try:
                    emit(f"mcs_{tag}.csv",
                         mcs_table(losses, asset, h, kind, alpha=mcs_alpha,
                                   n_boot=n_boot, block_length=block_length,
                                   statistic=statistic, seed=seed,
                                   procedures=procedures))
                except DataError as exc:
                    logger.warning("skipping MCS table %s: %s", tag, exc)
            try:
                emit(f"nemenyi_h{h}_{kind}.csv",
                     nemenyi_table(losses, h, kind, alpha=nemenyi_alpha,
                                   procedures=procedures))
            except DataError as exc:
                logger.warning("skipping Nemenyi table h%d %s: %s", h, kind, exc)
    if subperiods:
        tables = sub_period_report(losses, subperiods, benchmark=benchmark,
                                   kinds=kinds, procedures=procedures)
        for name, frame in tables.items():
            emit(f"subperiod_{name}_ratio_table.csv", frame)
    return written
