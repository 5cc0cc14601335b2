"""Tests for the report tables built from long-format loss rows."""

import logging

import numpy as np
import pandas as pd
import pytest

from rvhier import reports
from rvhier.errors import ConfigError, DataError

COLS = ("asset", "origin_date", "horizon", "procedure", "mse", "qlike")


def flat_losses(n=60):
    """Constant losses with hand-computable ratios.

    asset A: HAR mse 2, SV mse 1 (ratio 0.5); qlike 1.0 vs 0.5
    asset B: HAR mse 4, SV mse 8 (ratio 2.0); qlike 1.0 vs 0.125
    """
    rows = []
    spec = {"A": {"HAR": (2.0, 1.0), "SV": (1.0, 0.5)},
            "B": {"HAR": (4.0, 1.0), "SV": (8.0, 0.125)}}
    for asset, procs in spec.items():
        for proc, (mse, qlike) in procs.items():
            for i in range(n):
                rows.append((asset, f"2006-{i:03d}", 1, proc, mse, qlike))
    return pd.DataFrame(rows, columns=COLS)


def noisy_losses(n=60, seed=0):
    rng = np.random.default_rng(seed)
    rows = []
    for asset in ("A", "B"):
        base = 1.0 + 0.2 * rng.random(n)
        for proc, scale in (("HAR", 1.0), ("SV", 0.5)):
            vals = base * scale * (1.0 + 0.05 * rng.random(n))
            for i in range(n):
                rows.append((asset, f"2006-{i:03d}", 1, proc,
                             vals[i], vals[i] / 2.0))
    return pd.DataFrame(rows, columns=COLS)


def test_loss_pivot_shape_and_order():
    piv = reports.loss_pivot(flat_losses(), "A", 1, "mse")
    assert list(piv.columns) == ["HAR", "SV"]  # alphabetical by default
    assert piv.shape == (60, 2)
    np.testing.assert_allclose(piv["HAR"], 2.0)
    explicit = reports.loss_pivot(flat_losses(), "A", 1, "MSE",
                                  procedures=("SV", "HAR"))
    assert list(explicit.columns) == ["SV", "HAR"]


def test_loss_pivot_guards():
    losses = flat_losses()
    with pytest.raises(DataError, match="no loss rows for asset 'C'"):
        reports.loss_pivot(losses, "C", 1, "MSE")
    with pytest.raises(DataError, match="no rows for procedures \\['PV3'\\]"):
        reports.loss_pivot(losses, "A", 1, "MSE", procedures=("HAR", "PV3"))
    with pytest.raises(ConfigError, match="unknown loss kind"):
        reports.loss_pivot(losses, "A", 1, "MAE")
    unbalanced = losses.drop(losses.index[0])
    with pytest.raises(DataError, match="missing origins"):
        reports.loss_pivot(unbalanced, "A", 1, "MSE")


def test_ratio_table_hand_oracle():
    table = reports.ratio_table(flat_losses(), benchmark="HAR")
    assert list(table.columns) == ["MSE_h1", "QLIKE_h1"]
    assert table.index.name == "procedure"
    np.testing.assert_allclose(table.loc["HAR"], 1.0)
    # geometric means across the two assets: sqrt(0.5 * 2) and sqrt(0.5 * 0.125)
    assert table.loc["SV", "MSE_h1"] == pytest.approx(1.0, rel=1e-12)
    assert table.loc["SV", "QLIKE_h1"] == pytest.approx(0.25, rel=1e-12)


def test_ratio_table_single_asset():
    table = reports.ratio_table(flat_losses(), benchmark="HAR", assets=("A",))
    assert table.loc["SV", "MSE_h1"] == pytest.approx(0.5, rel=1e-12)
    assert table.loc["SV", "QLIKE_h1"] == pytest.approx(0.5, rel=1e-12)


def test_ratio_table_guards():
    losses = flat_losses()
    with pytest.raises(DataError, match="benchmark 'PV3' has no loss rows"):
        reports.ratio_table(losses, benchmark="PV3")
    zeroed = losses.copy()
    zeroed.loc[zeroed["procedure"] == "HAR", "mse"] = 0.0
    with pytest.raises(DataError, match="mean loss is not positive"):
        reports.ratio_table(zeroed, benchmark="HAR", kinds=("MSE",))


def test_dm_table_conventions():
    # constant loss gap: p = 0 when the row procedure dominates, 1 when
    # it is dominated, NaN on the diagonal
    table = reports.dm_table(flat_losses(), "A", 1, "MSE")
    assert np.isnan(table.loc["HAR", "HAR"])
    assert table.loc["SV", "HAR"] == 0.0
    assert table.loc["HAR", "SV"] == 1.0


def test_dm_table_noisy_direction():
    table = reports.dm_table(noisy_losses(), "A", 1, "MSE")
    assert table.loc["SV", "HAR"] < 0.01
    assert table.loc["HAR", "SV"] > 0.99


def test_mcs_table_flat_hand_case():
    table = reports.mcs_table(flat_losses(), "A", 1, "MSE", n_boot=100)
    assert list(table.columns) == ["mean_loss", "pvalue", "in_set"]
    np.testing.assert_allclose(table["mean_loss"], [2.0, 1.0])
    assert table.loc["HAR", "pvalue"] == 0.0
    assert table.loc["SV", "pvalue"] == 1.0
    assert list(table["in_set"]) == [0, 1]


def test_mcs_table_deterministic_per_slice():
    losses = noisy_losses()
    t1 = reports.mcs_table(losses, "B", 1, "QLIKE", n_boot=150, seed=4)
    t2 = reports.mcs_table(losses, "B", 1, "QLIKE", n_boot=150, seed=4)
    pd.testing.assert_frame_equal(t1, t2, check_exact=True)
    assert ((t1["pvalue"] >= 0.2) == t1["in_set"].astype(bool)).all()


def test_nemenyi_table_pools_assets():
    # SV wins every day on A and loses every day on B: pooled ranks tie
    table = reports.nemenyi_table(flat_losses(), 1, "MSE")
    np.testing.assert_allclose(table["mean_rank"], [1.5, 1.5])
    np.testing.assert_allclose(table["upper"] - table["lower"],
                               2 * (table["mean_rank"] - table["lower"]))
    only_a = reports.nemenyi_table(flat_losses(), 1, "MSE", asset="A")
    np.testing.assert_allclose(only_a["mean_rank"], [2.0, 1.0])


def test_nemenyi_table_procedure_set_mismatch():
    losses = flat_losses()
    losses = losses[~((losses["asset"] == "B") & (losses["procedure"] == "SV"))]
    with pytest.raises(DataError, match="procedure sets differ"):
        reports.nemenyi_table(losses, 1, "MSE")


def test_validate_splits():
    ok = (("early", "2006-000", "2006-029"), ("late", "2006-030", "2006-059"))
    assert reports._validate_splits(ok) == ok
    with pytest.raises(DataError, match="overlap"):
        reports._validate_splits((("a", "2006-000", "2006-030"),
                                  ("b", "2006-030", "2006-059")))
    with pytest.raises(ConfigError, match="must be \\(name, start, end\\)"):
        reports._validate_splits((("a", "2006-000"),))


def test_sub_period_report_slices_and_warns(caplog):
    losses = flat_losses()
    splits = (("early", "2006-000", "2006-029"),
              ("late", "2006-030", "2006-059"),
              ("hole", "2007-000", "2007-010"))
    with caplog.at_level(logging.WARNING, logger="rvhier.reports"):
        tables = reports.sub_period_report(losses, splits)
    assert sorted(tables) == ["early", "late"]
    assert any("'hole'" in r.message and "omitted" in r.message
               for r in caplog.records)
    # constant losses: every slice reproduces the full-sample ratios
    assert tables["early"].loc["SV", "MSE_h1"] == pytest.approx(1.0, rel=1e-12)


def test_write_frame_csv_repr_floats(tmp_path):
    frame = pd.DataFrame({"x": [1.0 / 3.0, 2.0]},
                         index=pd.Index(["a", "b"], name="procedure"))
    path = tmp_path / "t.csv"
    reports.write_frame_csv(frame, path)
    text = path.read_text()
    assert text.splitlines()[0] == "procedure,x"
    assert repr(1.0 / 3.0) in text
    reports.write_frame_csv(frame, tmp_path / "t2.csv")
    assert (tmp_path / "t2.csv").read_bytes() == path.read_bytes()


def test_write_report_tables_full_set(tmp_path):
    losses = noisy_losses()
    splits = (("early", "2006-000", "2006-029"),)
    written = reports.write_report_tables(
        losses, tmp_path, n_boot=120, subperiods=splits)
    assert "ratio_table.csv" in written
    assert "ratio_table_A.csv" in written and "ratio_table_B.csv" in written
    for tag in ("A_h1_MSE", "B_h1_QLIKE"):
        assert f"dm_{tag}.csv" in written
        assert f"mcs_{tag}.csv" in written
    assert "nemenyi_h1_MSE.csv" in written
    assert "subperiod_early_ratio_table.csv" in written
    for path in written.values():
        assert (tmp_path / path).exists() or pd.io.common.os.path.exists(path)


def test_write_report_tables_skips_short_slices(tmp_path, caplog):
    losses = noisy_losses(n=40)  # enough for DM, too short for MCS
    with caplog.at_level(logging.WARNING, logger="rvhier.reports"):
        written = reports.write_report_tables(losses, tmp_path, n_boot=120)
    assert not any(name.startswith("mcs_") for name in written)
    assert any(name.startswith("dm_") for name in written)
    assert any("skipping MCS table" in r.message for r in caplog.records)
