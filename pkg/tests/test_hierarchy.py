"""Tests for the hierarchy catalog: matrices, labels, coherence."""

import numpy as np
import pytest

from rvhier import hierarchy
from rvhier.errors import DataError

# (name, n_a, n_b) for every catalog entry; n = n_a + n_b
EXPECTED_SIZES = [
    ("ST", 1, 5),
    ("SSV", 1, 2),
    ("STSV", 1, 10),
    ("SV-T", 3, 10),
    ("T-SV", 6, 10),
    ("CTSV", 8, 10),
    ("SPV3", 1, 3),
    ("STPV3", 1, 15),
    ("PV3-T", 4, 15),
    ("T-PV3", 6, 15),
    ("CTPV3", 9, 15),
]


def test_catalog_is_complete():
    assert sorted(hierarchy.CATALOG) == sorted(name for name, _, _ in EXPECTED_SIZES)


@pytest.mark.parametrize("name,n_a,n_b", EXPECTED_SIZES)
def test_structure_sizes(name, n_a, n_b):
    h = hierarchy.build_hierarchy(name)
    assert (h.n_a, h.n_b, h.n) == (n_a, n_b, n_a + n_b)
    assert h.A.shape == (n_a, n_b)
    assert h.S.shape == (n_a + n_b, n_b)
    assert h.C.shape == (n_a, n_a + n_b)


@pytest.mark.parametrize("name", hierarchy.CATALOG)
def test_cs_is_exactly_zero(name):
    # integer matrices, so C S = 0 must hold without tolerance
    h = hierarchy.build_hierarchy(name)
    prod = h.C @ h.S
    assert prod.dtype.kind == "i"
    assert np.array_equal(prod, np.zeros((h.n_a, h.n_b), dtype=np.int64))


@pytest.mark.parametrize("name", hierarchy.CATALOG)
def test_matrices_are_integer_zero_one(name):
    h = hierarchy.build_hierarchy(name)
    assert h.A.dtype.kind == "i"
    assert set(np.unique(h.A)) <= {0, 1}


def test_node_labels_ctpv3_frozen():
    h = hierarchy.build_hierarchy("CTPV3")
    assert h.upper_labels == (
        "RV", "PV1", "PV2", "PV3", "T1", "T2", "T3", "T4", "T5",
    )
    # bottoms are quantile-major, time-minor
    assert h.bottom_labels == (
        "T1PV1", "T2PV1", "T3PV1", "T4PV1", "T5PV1",
        "T1PV2", "T2PV2", "T3PV2", "T4PV2", "T5PV2",
        "T1PV3", "T2PV3", "T3PV3", "T4PV3", "T5PV3",
    )
    assert h.node_labels == h.upper_labels + h.bottom_labels


def test_node_labels_ctsv_frozen():
    h = hierarchy.build_hierarchy("CTSV")
    assert h.upper_labels == ("RV", "SV-", "SV+", "T1", "T2", "T3", "T4", "T5")
    assert h.bottom_labels == (
        "T1SV-", "T2SV-", "T3SV-", "T4SV-", "T5SV-",
        "T1SV+", "T2SV+", "T3SV+", "T4SV+", "T5SV+",
    )


def test_aggregation_rows_select_the_right_bottoms():
    h = hierarchy.build_hierarchy("CTPV3")
    rows = {u: h.A[i] for i, u in enumerate(h.upper_labels)}
    assert rows["RV"].sum() == h.n_b
    # PV2 sums exactly the five T*PV2 bottoms
    pv2 = [b.endswith("PV2") for b in h.bottom_labels]
    assert np.array_equal(rows["PV2"], np.array(pv2, dtype=np.int64))
    # T3 sums exactly the three T3PV* bottoms
    t3 = [b.startswith("T3") for b in h.bottom_labels]
    assert np.array_equal(rows["T3"], np.array(t3, dtype=np.int64))


def test_t1_row_does_not_capture_t1_prefix_collisions():
    # in ST the bottoms are the segment labels themselves
    h = hierarchy.build_hierarchy("ST")
    assert h.bottom_labels == ("T1", "T2", "T3", "T4", "T5")
    assert np.array_equal(h.A, np.ones((1, 5), dtype=np.int64))


def test_build_hierarchy_case_insensitive():
    assert hierarchy.build_hierarchy("ctpv3").name == "CTPV3"
    assert hierarchy.build_hierarchy("sv-t").name == "SV-T"


def test_build_hierarchy_unknown_name():
    with pytest.raises(DataError, match="unknown hierarchy"):
        hierarchy.build_hierarchy("STV9")


def test_coherence_residual_zero_for_structural_vectors():
    h = hierarchy.build_hierarchy("CTSV")
    rng = np.random.default_rng(7)
    b = rng.uniform(0.5, 2.0, size=h.n_b)
    y = h.S @ b
    # summation order differs between S @ b and C @ y, so only
    # rounding-level residual is guaranteed
    assert hierarchy.coherence_residual(y, h) < 1e-13
    assert hierarchy.is_coherent(y, h)


def test_coherence_residual_detects_breakage():
    h = hierarchy.build_hierarchy("SSV")
    y = h.S @ np.array([1.0, 2.0])
    y[0] += 0.5
    assert hierarchy.coherence_residual(y, h) == pytest.approx(0.5)
    assert not hierarchy.is_coherent(y, h)


def test_coherence_residual_shape_guard():
    h = hierarchy.build_hierarchy("ST")
    with pytest.raises(DataError, match="does not match n=6"):
        hierarchy.coherence_residual(np.ones(5), h)


def test_is_coherent_tolerance_scales_with_magnitude():
    # residual 2e-7 on values of size 1e2: relative 2e-9 passes,
    # the same absolute residual on unit-size values fails
    h = hierarchy.build_hierarchy("SSV")
    big = h.S @ np.array([60.0, 40.0])
    big[0] += 2e-7
    assert hierarchy.is_coherent(big, h)
    small = h.S @ np.array([0.6, 0.4])
    small[0] += 2e-7
    assert not hierarchy.is_coherent(small, h)


def test_node_series_set_accepts_coherent_matrix():
    h = hierarchy.build_hierarchy("SPV3")
    b = np.array([[1.0, 2.0, 3.0], [0.5, 0.25, 0.25]])
    values = b @ h.S.T
    s = hierarchy.NodeSeriesSet(h, ("2015-01-02", "2015-01-05"), values)
    assert s.values.shape == (2, 4)
    assert np.array_equal(s.column("RV"), np.array([6.0, 1.0]))
    assert np.array_equal(s.column("PV2"), np.array([2.0, 0.25]))


def test_node_series_set_reports_first_incoherent_row():
    h = hierarchy.build_hierarchy("SPV3")
    b = np.array([[1.0, 2.0, 3.0], [0.5, 0.25, 0.25]])
    values = b @ h.S.T
    values[1, 0] += 1e-3
    with pytest.raises(DataError, match=r"row 1 \(2015-01-05\) is incoherent"):
        hierarchy.NodeSeriesSet(h, ("2015-01-02", "2015-01-05"), values)


def test_node_series_set_shape_guard():
    h = hierarchy.build_hierarchy("SPV3")
    with pytest.raises(DataError, match="does not match"):
        hierarchy.NodeSeriesSet(h, ("2015-01-02",), np.ones((1, 3)))


def test_node_series_set_unknown_column():
    h = hierarchy.build_hierarchy("SPV3")
    s = hierarchy.NodeSeriesSet(h, (), np.zeros((0, 4)))
    with pytest.raises(DataError, match="not a node of SPV3"):
        s.column("SV-")


def test_assemble_node_series_builds_coherent_set():
    h = hierarchy.build_hierarchy("T-SV")
    rng = np.random.default_rng(11)
    b = rng.uniform(0.0, 1.0, size=(4, h.n_b))
    dates = tuple(f"2015-01-0{d}" for d in range(2, 6))
    s = hierarchy.assemble_node_series(dates, b, h)
    assert s.dates == dates
    np.testing.assert_allclose(s.values[:, h.n_a:], b)
    np.testing.assert_allclose(s.column("RV"), b.sum(axis=1))
    for row in s.values:
        assert hierarchy.is_coherent(row, h)


def test_assemble_node_series_label_mismatch_names_offender():
    h = hierarchy.build_hierarchy("SSV")
    wrong = ("SV+", "SV-")
    with pytest.raises(DataError, match="first offender 'SV\\+'"):
        hierarchy.assemble_node_series(
            ("2015-01-02",), np.ones((1, 2)), h, bottom_labels=wrong
        )


def test_assemble_node_series_shape_guard():
    h = hierarchy.build_hierarchy("SSV")
    with pytest.raises(DataError, match="bottom values shape"):
        hierarchy.assemble_node_series(("2015-01-02",), np.ones((1, 3)), h)
