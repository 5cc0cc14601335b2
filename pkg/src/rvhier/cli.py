"""Command-line front door.

Subcommands: ingest / decompose / fit / forecast / reconcile /
evaluate / run / describe / simulate; ``run`` composes the rest into a
reproducible experiment directory. Exit codes: 0 success, 2 config or
usage error, 3 data error, 4 numerical failure. All diagnostics go to
standard error with level prefixes; results go to files or stdout.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from datetime import datetime, timezone

import numpy as np
import pandas as pd

from . import __version__, har, reconcile, reports
from .errors import ConfigError, DataError, NumericalError
from .experiment import (
    ExperimentConfig,
    ForecastStore,
    _parse_subperiods,
    build_manifest,
    load_config,
    read_losses_csv,
    run_rolling,
    sha256_file,
    synthetic_components,
    synthetic_node_series,
    synthetic_panel,
    write_losses_csv,
    write_manifest,
)
from .hierarchy import CATALOG, build_hierarchy
from .measures import DEFAULT_ALPHAS, DEFAULT_GRID_SIZE, DEFAULT_SEGMENT_LENGTH
from .panels import panel_components, read_panel, read_price_file, write_panel

logger = logging.getLogger("rvhier")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

#: hierarchy -> direct model used for its top (RV) base forecast
FAMILY_OF = {
    "ST": "HAR",
    "SSV": "SV_HAR", "STSV": "SV_HAR", "SV-T": "SV_HAR", "T-SV": "SV_HAR",
    "CTSV": "SV_HAR",
    "SPV3": "PV3_HAR", "STPV3": "PV3_HAR", "PV3-T": "PV3_HAR",
    "T-PV3": "PV3_HAR", "CTPV3": "PV3_HAR",
}


def _hierarchy(name: str):
    """Resolve a catalog name; unknown names are usage errors."""
    try:
        return build_hierarchy(name)
    except DataError as exc:
        raise ConfigError(str(exc)) from exc


def _parse_alphas(raw: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in raw.split(",") if tok.strip())
    except ValueError as exc:
        raise ConfigError(f"cannot parse alphas {raw!r}") from exc


def _read_components(path) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, dtype={"date": str},
                            float_precision="round_trip")
    except FileNotFoundError as exc:
        raise DataError(f"component file not found: {path}") from exc
    if "date" not in frame.columns:
        raise DataError(f"{path}: component tables need a 'date' column")
    return frame.set_index("date")


def _series_map(frame: pd.DataFrame) -> dict[str, np.ndarray]:
    return {c: frame[c].to_numpy(dtype=float) for c in frame.columns}


def _write_node_values(labels, values, path) -> None:
    frame = pd.DataFrame({"value": np.asarray(values, dtype=float)},
                         index=pd.Index(labels, name="node"))
    reports.write_frame_csv(frame, path)


def _read_node_values(path) -> dict[str, float]:
    frame = pd.read_csv(path, float_precision="round_trip")
    if "node" not in frame.columns or "value" not in frame.columns:
        raise DataError(f"{path}: expected columns node,value")
    return dict(zip(frame["node"].astype(str), frame["value"].astype(float)))


# ---------------------------------------------------------------------------
# subcommands


def cmd_ingest(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    report_rows = []
    for path in args.paths:
        panel = read_price_file(path, grid_size=args.grid_size)
        out_path = os.path.join(args.out, f"{panel.asset_id}.csv")
        write_panel(panel, out_path)
        logger.info("ingested %s: %d complete days -> %s", panel.asset_id,
                    panel.n_days, out_path)
        report_rows.append((panel.asset_id, panel.n_days, panel.grid_size))
    report = pd.DataFrame(report_rows, columns=["asset", "days", "grid_size"])
    report_path = os.path.join(args.out, "ingest_report.csv")
    report.to_csv(report_path, index=False)
    logger.info("wrote completeness report %s", report_path)
    return EXIT_OK


def cmd_decompose(args) -> int:
    panel = read_panel(args.panel)
    comps = panel_components(panel, alphas=args.alphas,
                             segment_length=args.segment_length)
    if args.hierarchy:
        structure = _hierarchy(args.hierarchy)
        comps = comps[list(structure.node_labels)]
        resid = np.abs(comps.to_numpy() @ structure.C.T.astype(float)).max()
        logger.info("coherence audit for %s: max residual %.3e",
                    structure.name, resid)
    reports.write_frame_csv(comps, args.out)
    logger.info("wrote %d days x %d columns -> %s", comps.shape[0],
                comps.shape[1], args.out)
    return EXIT_OK


def cmd_fit(args) -> int:
    comps = _read_components(args.components)
    design = har.build_design(_series_map(comps), args.model, args.h,
                              node=args.node, dates=comps.index.to_numpy())
    fit = har.ols_fit(design)
    ses = har.robust_se(fit)
    rows = pd.DataFrame({"coefficient": fit.coefficients, "hc1_se": ses},
                        index=pd.Index(design.column_names, name="regressor"))
    print(rows.to_string())
    print(f"n_obs={fit.n_obs} rank={fit.rank} full_rank={fit.full_rank}")
    if args.dump_fits:
        reports.write_frame_csv(rows, args.dump_fits)
        logger.info("dumped fit -> %s", args.dump_fits)
    return EXIT_OK


def cmd_forecast(args) -> int:
    """Base forecasts trained on every supplied day; the rolling loop
    lives in ``run``."""
    comps = _read_components(args.components)
    series = _series_map(comps)
    if args.hierarchy:
        structure = _hierarchy(args.hierarchy)
        family = FAMILY_OF[structure.name]
        labels, values = [], []
        for label in structure.node_labels:
            spec, node = (family, None) if label == "RV" else ("NODE_HAR", label)
            design = har.build_design(series, spec, args.h, node=node,
                                      dates=comps.index.to_numpy())
            fit = har.ols_fit(design)
            values.append(har.forecast(fit, har.forecast_row(series, spec, node=node)))
            labels.append(label)
    else:
        design = har.build_design(series, args.model, args.h, node=args.node,
                                  dates=comps.index.to_numpy())
        fit = har.ols_fit(design)
        value = har.forecast(fit, har.forecast_row(series, args.model,
                                                   node=args.node))
        labels, values = [args.node or "RV"], [value]
    if args.out:
        _write_node_values(labels, values, args.out)
        logger.info("wrote %d base forecasts -> %s", len(labels), args.out)
    else:
        for label, value in zip(labels, values):
            print(f"{label},{repr(float(value))}")
    return EXIT_OK


def cmd_reconcile(args) -> int:
    structure = _hierarchy(args.hierarchy)
    base = _read_node_values(args.base)
    if args.method == "bu":
        missing = [b for b in structure.bottom_labels if b not in base]
        if missing:
            raise DataError(f"base file lacks bottom nodes {missing}")
        bottoms = np.array([base[b] for b in structure.bottom_labels])
        y = reconcile.bottom_up(bottoms, structure)
    else:
        missing = [lab for lab in structure.node_labels if lab not in base]
        if missing:
            raise DataError(f"base file lacks nodes {missing}")
        if not args.components:
            raise ConfigError(
                "--method shr needs --components to estimate the error "
                "covariance from one-step in-sample fits"
            )
        comps = _read_components(args.components)
        series = _series_map(comps)
        family = FAMILY_OF[structure.name]
        fits = {}
        for label in structure.node_labels:
            spec, node = (family, None) if label == "RV" else ("NODE_HAR", label)
            design = har.build_design(series, spec, 1, node=node,
                                      dates=comps.index.to_numpy())
            fits[label] = har.ols_fit(design)
        E = reconcile.insample_error_matrix(fits, structure.node_labels)
        cov = reconcile.shrink_covariance(E, node_labels=structure.node_labels)
        logger.info("shrinkage intensity lambda = %.4f", cov.lam)
        yhat = np.array([base[lab] for lab in structure.node_labels])
        y = reconcile.mint_reconcile(yhat, cov.W, structure)
    from .hierarchy import coherence_residual

    logger.info("coherence residual after reconcile: %.3e",
                coherence_residual(y, structure))
    if args.out:
        _write_node_values(structure.node_labels, y, args.out)
        logger.info("wrote reconciled forecasts -> %s", args.out)
    else:
        for label, value in zip(structure.node_labels, y):
            print(f"{label},{repr(float(value))}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    losses = read_losses_csv(args.losses)
    subperiods = _parse_subperiods(args.subperiods) if args.subperiods else ()
    kinds = tuple(k.strip().upper() for k in args.kinds.split(",") if k.strip())
    procedures = None
    if args.procedures:
        procedures = tuple(p.strip() for p in args.procedures.split(",")
                           if p.strip())
    written = reports.write_report_tables(
        losses, args.out, benchmark=args.benchmark, kinds=kinds,
        procedures=procedures,
        mcs_alpha=args.mcs_alpha, n_boot=args.n_boot,
        block_length=args.block, statistic=args.statistic,
        nemenyi_alpha=args.nemenyi_alpha, seed=args.seed,
        subperiods=subperiods,
    )
    logger.info("wrote %d report tables -> %s", len(written), args.out)
    return EXIT_OK


def _load_panel_components(config: ExperimentConfig) -> dict[str, pd.DataFrame]:
    out = {}
    for asset in config.assets:
        path = os.path.join(config.data_dir, f"{asset}.csv")
        if not os.path.exists(path):
            raise DataError(f"asset file not found: {path}")
        panel = read_panel(path, asset_id=asset)
        out[asset] = panel_components(panel, alphas=config.alphas,
                                      segment_length=config.segment_length)
        logger.info("loaded %s: %d days", asset, panel.n_days)
    return out


def cmd_run(args) -> int:
    config = load_config(args.config)
    if args.jobs is not None:
        from dataclasses import replace

        config = replace(config, jobs=args.jobs)
    os.makedirs(args.out, exist_ok=True)
    if config.data_source == "synthetic":
        data = synthetic_components(config)
        inputs = {os.path.basename(args.config): sha256_file(args.config)}
    else:
        data = _load_panel_components(config)
        inputs = {os.path.basename(args.config): sha256_file(args.config)}
        for asset in config.assets:
            path = os.path.join(config.data_dir, f"{asset}.csv")
            inputs[f"{asset}.csv"] = sha256_file(path)
    result = run_rolling(config, data)

    forecasts_path = os.path.join(args.out, "forecasts.csv")
    losses_path = os.path.join(args.out, "losses.csv")
    result.store.write_csv(forecasts_path)
    write_losses_csv(result.losses, losses_path)

    # read-back audits: round-trip equality and per-row coherence
    reread = ForecastStore.read_csv(forecasts_path)
    if reread.records() != result.store.records():
        raise DataError("forecast store did not round-trip losslessly")
    checked = reread.coherence_audit()
    logger.info("read-back audit: %d reconciled groups coherent", checked)

    report_dir = os.path.join(args.out, "reports")
    written = reports.write_report_tables(
        result.losses, report_dir, benchmark="HAR" if "HAR" in config.procedures
        else config.procedures[0],
        kinds=config.loss_kinds, procedures=config.procedures,
        mcs_alpha=config.mcs_alpha, n_boot=config.n_boot,
        block_length=config.block_length, statistic=config.mcs_statistic,
        nemenyi_alpha=config.nemenyi_alpha, seed=config.seed,
        subperiods=config.subperiods,
    )

    outputs = {"forecasts.csv": sha256_file(forecasts_path),
               "losses.csv": sha256_file(losses_path)}
    for name, path in sorted(written.items()):
        outputs[f"reports/{name}"] = sha256_file(path)
    manifest = build_manifest(
        config, inputs, outputs, result.floor_count,
        created=datetime.now(timezone.utc).isoformat(),
    )
    write_manifest(manifest, os.path.join(args.out, "manifest.json"))
    logger.info("run complete: %d forecasts, %d loss rows, %d floored, "
                "manifest digest %s", len(result.store), len(result.losses),
                result.floor_count, manifest["digest"])
    return EXIT_OK


def cmd_describe(args) -> int:
    if args.hierarchy:
        structure = _hierarchy(args.hierarchy)
        print(f"name: {structure.name}")
        print(f"n_a: {structure.n_a}")
        print(f"n_b: {structure.n_b}")
        print(f"n: {structure.n}")
        print(f"upper: {' '.join(structure.upper_labels)}")
        print(f"bottom: {' '.join(structure.bottom_labels)}")
    else:
        for name in CATALOG:
            structure = build_hierarchy(name)
            print(f"{name} n_a={structure.n_a} n_b={structure.n_b} "
                  f"n={structure.n}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.generator == "intraday":
        panel = synthetic_panel(args.seed, args.days, grid_size=args.grid_size,
                                asset_id=args.asset_id, noise_scale=args.noise)
        write_panel(panel, args.out)
        logger.info("wrote %d-day intraday panel -> %s", panel.n_days, args.out)
    else:
        series = synthetic_node_series(args.seed, args.days,
                                       hierarchy=args.hierarchy,
                                       noise_scale=args.noise)
        frame = pd.DataFrame(series.values, columns=list(series.hierarchy.node_labels),
                             index=pd.Index(series.dates, name="date"))
        reports.write_frame_csv(frame, args.out)
        logger.info("wrote %d-day coherent node series (%s) -> %s",
                    len(series.dates), series.hierarchy.name, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rvhier",
        description="Realized-variance decomposition, hierarchical HAR "
                    "forecasting, reconciliation, and evaluation.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="debug-level logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="normalize raw 1-minute price files")
    p.add_argument("paths", nargs="+", help="raw timestamp,price files")
    p.add_argument("--grid-size", type=int, default=DEFAULT_GRID_SIZE)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("decompose", help="daily component series from a panel")
    p.add_argument("panel", help="normalized panel CSV")
    p.add_argument("--hierarchy", help="restrict columns to one catalog entry")
    p.add_argument("--alphas", type=_parse_alphas, default=DEFAULT_ALPHAS)
    p.add_argument("--segment-length", type=int, default=DEFAULT_SEGMENT_LENGTH)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("fit", help="fit one model on a component table")
    p.add_argument("components", help="component CSV from decompose")
    p.add_argument("--model", default="HAR",
                   choices=list(har.MODEL_SPECS))
    p.add_argument("--h", type=int, default=1, help="forecast horizon in days")
    p.add_argument("--node", help="component label for NODE_HAR")
    p.add_argument("--dump-fits", help="write coefficients to this CSV")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("forecast", help="out-of-sample base forecasts at the "
                                        "end of a component table")
    p.add_argument("components")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--model", choices=list(har.MODEL_SPECS))
    group.add_argument("--hierarchy", help="emit a full base vector")
    p.add_argument("--h", type=int, default=1)
    p.add_argument("--node", help="component label for NODE_HAR")
    p.add_argument("--out", help="node,value CSV (default: stdout)")
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("reconcile", help="make a base vector coherent")
    p.add_argument("--base", required=True, help="node,value CSV")
    p.add_argument("--hierarchy", required=True)
    p.add_argument("--method", choices=("bu", "shr"), default="shr")
    p.add_argument("--components", help="component CSV (needed for shr)")
    p.add_argument("--out", help="node,value CSV (default: stdout)")
    p.set_defaults(func=cmd_reconcile)

    p = sub.add_parser("evaluate", help="report tables from stored losses")
    p.add_argument("--losses", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--benchmark", default="HAR")
    p.add_argument("--kinds", default="MSE,QLIKE")
    p.add_argument("--procedures", help="comma list pinning the row order "
                   "(default: alphabetical)")
    p.add_argument("--mcs-alpha", type=float, default=0.2)
    p.add_argument("--n-boot", type=int, default=10_000)
    p.add_argument("--block", type=float, default=22.0)
    p.add_argument("--statistic", choices=("TR", "Tmax"), default="TR")
    p.add_argument("--nemenyi-alpha", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--subperiods", help="name:start:end;name:start:end ...")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("run", help="full rolling experiment from a config file")
    p.add_argument("config")
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--jobs", type=int, help="worker threads (results "
                                            "independent of this)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("describe", help="hierarchy catalog details")
    p.add_argument("hierarchy", nargs="?", help="catalog name (omit to list all)")
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("simulate", help="write synthetic data")
    p.add_argument("--generator", choices=("intraday", "nodes"),
                   default="intraday")
    p.add_argument("--days", type=int, default=1200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid-size", type=int, default=DEFAULT_GRID_SIZE)
    p.add_argument("--asset-id", default="SYN")
    p.add_argument("--hierarchy", default="CTPV3",
                   help="structure for the nodes generator")
    p.add_argument("--noise", type=float, default=0.4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return int(args.func(args) or EXIT_OK)
    except ConfigError as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    except DataError as exc:
        logger.error("%s", exc)
        return EXIT_DATA
    except NumericalError as exc:
        logger.error("%s", exc)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
