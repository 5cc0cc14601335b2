"""Panel ingestion, normalized round-trips, and daily component tables."""

import logging

import numpy as np
import pytest

from rvhier import measures, panels
from rvhier.errors import DataError


def _price_day(date: str, n_prices: int, start: float = 100.0):
    lines = []
    price = start
    for i in range(n_prices):
        minute = f"{9 + (30 + i) // 60:02d}:{(30 + i) % 60:02d}:00"
        lines.append(f"{date}T{minute},{price}")
        price *= 1.0 + (0.0002 if i % 2 else -0.0001)
    return lines


def test_read_price_file_accepts_complete_day(tmp_path):
    raw = tmp_path / "ABC.txt"
    raw.write_text("\n".join(_price_day("2006-01-03", 11)) + "\n")
    panel = panels.read_price_file(raw, grid_size=10)
    assert panel.asset_id == "ABC"
    assert panel.dates == ("2006-01-03",)
    assert panel.returns.shape == (1, 10)


def test_read_price_file_skips_short_day(tmp_path, caplog):
    raw = tmp_path / "x.txt"
    lines = _price_day("2006-01-03", 10) + _price_day("2006-01-04", 11)
    raw.write_text("\n".join(lines) + "\n")
    with caplog.at_level(logging.WARNING):
        panel = panels.read_price_file(raw, grid_size=10)
    assert panel.dates == ("2006-01-04",)
    assert any("short day" in rec.message for rec in caplog.records)


def test_read_price_file_flags_duplicate_timestamp(tmp_path, caplog):
    raw = tmp_path / "x.txt"
    lines = _price_day("2006-01-03", 11)
    lines.insert(5, lines[4])  # duplicate timestamp row
    lines += _price_day("2006-01-04", 11)
    raw.write_text("\n".join(lines) + "\n")
    with caplog.at_level(logging.WARNING):
        panel = panels.read_price_file(raw, grid_size=10)
    # the duplicated day is flagged and dropped, the clean day survives
    assert panel.dates == ("2006-01-04",)
    assert any("duplicate timestamp" in rec.message for rec in caplog.records)


def test_read_price_file_line_numbered_diagnostics(tmp_path, caplog):
    raw = tmp_path / "x.txt"
    lines = _price_day("2006-01-03", 11)
    lines.insert(3, "2006-01-03T09:59:00,not-a-price")
    lines += _price_day("2006-01-04", 11)
    raw.write_text("\n".join(lines) + "\n")
    with caplog.at_level(logging.WARNING):
        panel = panels.read_price_file(raw, grid_size=10)
    assert panel.dates == ("2006-01-04",)
    assert any(":4:" in rec.message for rec in caplog.records)


def test_read_price_file_space_separated_timestamps(tmp_path):
    raw = tmp_path / "x.txt"
    lines = [ln.replace("T", " ").replace(",", " ") for ln in _price_day("2006-01-03", 11)]
    raw.write_text("\n".join(lines) + "\n")
    panel = panels.read_price_file(raw, grid_size=10)
    assert panel.dates == ("2006-01-03",)


def test_read_price_file_no_valid_day(tmp_path):
    raw = tmp_path / "x.txt"
    raw.write_text("\n".join(_price_day("2006-01-03", 9)) + "\n")
    with pytest.raises(DataError, match="no valid 11-price day"):
        panels.read_price_file(raw, grid_size=10)


def test_panel_roundtrip_exact(tmp_path):
    rng = np.random.default_rng(2)
    panel = panels.IntradayPanel(
        "RT", ("2006-01-03", "2006-01-04"), rng.standard_normal((2, 20)) * 1e-3
    )
    path = tmp_path / "RT.csv"
    panels.write_panel(panel, path)
    back = panels.read_panel(path)
    assert back.asset_id == "RT"
    assert back.dates == panel.dates
    np.testing.assert_array_equal(back.returns, panel.returns)


def test_intraday_panel_validation():
    with pytest.raises(DataError, match="increasing"):
        panels.IntradayPanel("X", ("2006-01-04", "2006-01-03"),
                             np.zeros((2, 5)))
    with pytest.raises(DataError):
        panels.IntradayPanel("X", ("2006-01-03",), np.array([[np.nan, 0.0]]))


def test_component_labels_catalog_order():
    labels = panels.component_labels(n_pv=3, n_segments=5)
    assert labels[:3] == ("RV", "SV-", "SV+")
    assert labels[3:6] == ("PV1", "PV2", "PV3")
    assert labels[6:11] == ("T1", "T2", "T3", "T4", "T5")
    assert labels[11:16] == ("T1SV-", "T2SV-", "T3SV-", "T4SV-", "T5SV-")
    assert labels[16:21] == ("T1SV+", "T2SV+", "T3SV+", "T4SV+", "T5SV+")
    assert labels[21:26] == ("T1PV1", "T2PV1", "T3PV1", "T4PV1", "T5PV1")
    assert len(labels) == 36


def test_panel_components_match_single_day_functions():
    rng = np.random.default_rng(11)
    returns = rng.standard_normal((6, 390)) * 1e-3
    panel = panels.IntradayPanel(
        "CMP", tuple(f"2006-01-{d:02d}" for d in range(3, 9)), returns
    )
    table = panels.panel_components(panel)
    for t in range(6):
        day = returns[t]
        assert table["RV"].iloc[t] == pytest.approx(
            measures.realized_variance(day), rel=1e-14
        )
        sv_plus, sv_minus = measures.semivariances(day)
        assert table["SV+"].iloc[t] == pytest.approx(sv_plus, rel=1e-14)
        assert table["SV-"].iloc[t] == pytest.approx(sv_minus, rel=1e-14)
        np.testing.assert_allclose(
            table[["PV1", "PV2", "PV3"]].iloc[t],
            measures.partial_variances(day), rtol=1e-13,
        )
        np.testing.assert_allclose(
            table[[f"T{k}" for k in range(1, 6)]].iloc[t],
            measures.temporal_components(day), rtol=1e-13,
        )
        grid = measures.combined_components(day, alphas=(0.10, 0.75))
        np.testing.assert_allclose(
            table[[f"T{k}PV2" for k in range(1, 6)]].iloc[t], grid[1], rtol=1e-13
        )


def test_panel_components_zero_day_convention():
    returns = np.zeros((2, 10))
    returns[1] = 1e-3
    panel = panels.IntradayPanel("Z", ("2006-01-03", "2006-01-04"), returns)
    table = panels.panel_components(panel, alphas=(0.10, 0.75), segment_length=5)
    assert table.loc["2006-01-03"].sum() == 0.0
    assert table.loc["2006-01-04", "RV"] == pytest.approx(1e-5, rel=1e-13)
