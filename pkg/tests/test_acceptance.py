"""Acceptance gate: ten end-to-end properties with runtime budgets.

Each test prints one summary line on success; a failed assertion marks
the criterion failed. Criterion 10 is a reported diagnostic, never a
failure.
"""

import filecmp
import json
import math
import time

import numpy as np
import pytest

from rvhier import cli, evaluate, har, hierarchy, measures, reconcile
from rvhier.errors import NumericalError

EXPECTED_SIZES = {
    "ST": (1, 5), "SSV": (1, 2), "STSV": (1, 10), "SV-T": (3, 10),
    "T-SV": (6, 10), "CTSV": (8, 10), "SPV3": (1, 3), "STPV3": (1, 15),
    "PV3-T": (4, 15), "T-PV3": (6, 15), "CTPV3": (9, 15),
}

DESK_CONFIG = """\
assets = S1, S2, S3
horizons = 1, 5, 22
window = 1007
synthetic.days = 1200
bootstrap.n = 1000
seed = 11
"""


def _report(num: int, detail: str, elapsed: float, budget: float) -> None:
    print(f"criterion {num:02d} PASS: {detail} "
          f"({elapsed:.2f}s, budget {budget:.0f}s)")
    assert elapsed < budget, f"criterion {num} exceeded its runtime budget"


@pytest.fixture(scope="module")
def desk_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("desk")
    cfg = root / "desk.cfg"
    cfg.write_text(DESK_CONFIG)
    start = time.perf_counter()
    first, second = root / "one", root / "two"
    assert cli.main(["run", str(cfg), "--out", str(first)]) == 0
    assert cli.main(["run", str(cfg), "--out", str(second)]) == 0
    return first, second, time.perf_counter() - start


def test_criterion_01_hierarchy_algebra():
    start = time.perf_counter()
    for name, (n_a, n_b) in EXPECTED_SIZES.items():
        h = hierarchy.build_hierarchy(name)
        assert (h.n_a, h.n_b, h.n) == (n_a, n_b, n_a + n_b)
        prod = h.C @ h.S
        assert prod.dtype.kind == "i"
        assert np.count_nonzero(prod) == 0
    _report(1, "11 structures sized as catalogued, C S = 0 exactly",
            time.perf_counter() - start, 1.0)


def test_criterion_02_decomposition_exactness():
    start = time.perf_counter()
    rng = np.random.default_rng(202)
    worst_sum, worst_marginal = 0.0, 0.0
    for _ in range(1000):
        r = rng.normal(0.0, 1e-3, 390)
        rv = float(np.sum(r * r))
        cuts = measures.quantile_thresholds(r)
        parts = [
            measures.semivariances(r),
            measures.partial_variances(r),
            measures.threshold_components(r, [-1e-3, 0.0, 1e-3]),
            measures.temporal_components(r),
            measures.combined_components(r, alphas=measures.DEFAULT_ALPHAS),
            measures.sign_temporal_components(r),
        ]
        for comp in parts:
            gap = abs(float(np.sum(comp)) - rv) / max(rv, 1e-300)
            worst_sum = max(worst_sum, gap)
        grid = measures.combined_components(r, alphas=measures.DEFAULT_ALPHAS)
        row_gap = np.abs(grid.sum(axis=1)
                         - measures.threshold_components(r, cuts)).max()
        col_gap = np.abs(grid.sum(axis=0) - measures.temporal_components(r)).max()
        sign = measures.sign_temporal_components(r)
        # sign rows are (SV-, SV+); semivariances returns (SV+, SV-)
        sv_gap = np.abs(sign.sum(axis=1)
                        - np.asarray(measures.semivariances(r))[::-1]).max()
        worst_marginal = max(worst_marginal, row_gap, col_gap, sv_gap)
    assert worst_sum <= 1e-12
    assert worst_marginal <= 1e-14
    _report(2, f"1000 days: sum-to-RV rel err {worst_sum:.2e} <= 1e-12, "
               f"marginal err {worst_marginal:.2e} <= 1e-14",
            time.perf_counter() - start, 5.0)


def test_criterion_03_reconciliation_identities():
    start = time.perf_counter()
    rng = np.random.default_rng(303)
    worst_fix, worst_idem, worst_route = 0.0, 0.0, 0.0
    for name in hierarchy.CATALOG:
        h = hierarchy.build_hierarchy(name)
        S = h.S.astype(float)
        for _ in range(200):
            a = rng.normal(size=(h.n, h.n))
            W = a @ a.T + h.n * np.eye(h.n)
            M = reconcile.mint_projection(W, h)
            worst_fix = max(worst_fix, np.abs(M @ S - S).max())
            worst_idem = max(worst_idem, np.abs(M @ M - M).max())
            y = rng.uniform(0.0, 2.0, h.n)
            p = reconcile.mint_reconcile(y, W, h)
            q = reconcile.structural_reconcile(y, W, h)
            scale = max(1.0, float(np.abs(p).max()))
            worst_route = max(worst_route, float(np.abs(p - q).max()) / scale)
    assert worst_fix <= 1e-8
    assert worst_idem <= 1e-8
    assert worst_route <= 1e-8
    out = reconcile.mint_reconcile([10.0, 4.0, 5.0], np.eye(3),
                                   hierarchy.build_hierarchy("SSV"))
    np.testing.assert_allclose(out, [29 / 3, 13 / 3, 16 / 3], atol=1e-10)
    _report(3, f"2200 draws: |MS-S| {worst_fix:.2e}, |M^2-M| {worst_idem:.2e}, "
               f"route gap {worst_route:.2e}, all <= 1e-8",
            time.perf_counter() - start, 30.0)


def test_criterion_04_mint_dominance():
    start = time.perf_counter()
    h = hierarchy.build_hierarchy("CTPV3")
    S = h.S.astype(float)
    rng = np.random.default_rng(404)
    sigma = 0.3
    W = sigma**2 * np.eye(h.n)
    M = reconcile.mint_projection(W, h)
    reps = 500
    truth_b = rng.uniform(0.5, 2.0, size=(reps, h.n_b))
    truth = truth_b @ S.T
    eps = rng.normal(0.0, sigma, size=(reps, h.n))
    base_sse = float((eps**2).sum(axis=1).mean())
    rec_err = (truth + eps) @ M.T - truth
    rec_sse = float((rec_err**2).sum(axis=1).mean())
    assert rec_sse <= 0.99 * base_sse
    bu = reconcile.bottom_up(truth_b + eps[:, h.n_a:], h)
    resid = np.abs(bu @ h.C.T.astype(float)).max(axis=1)
    scale = np.maximum(1.0, np.abs(bu).max(axis=1))
    coherent = float(np.mean(resid <= 1e-8 * scale))
    assert coherent == 1.0
    _report(4, f"500 reps: reconciled/base SSE = {rec_sse / base_sse:.3f} "
               f"<= 0.99, bottom-up coherent in 100% of rows",
            time.perf_counter() - start, 60.0)


def test_criterion_05_har_recovery():
    start = time.perf_counter()
    # moderate persistence and a small stationary mean keep the O(1/T)
    # autoregression bias far below the Monte-Carlo band
    beta = np.array([0.05, 0.2, 0.15, 0.1])
    T, reps = 3000, 200
    rng = np.random.default_rng(505)
    lead = 22
    path = np.empty((T + lead, reps))
    mean = beta[0] / (1.0 - beta[1:].sum())
    path[:lead] = rng.uniform(0.5 * mean, 1.5 * mean, size=(lead, reps))
    noise = rng.normal(0.0, 1.0, size=(T + lead, reps))
    for t in range(lead, T + lead):
        d = path[t - 1]
        w = path[t - 5:t].mean(axis=0)
        m = path[t - 22:t].mean(axis=0)
        path[t] = beta[0] + beta[1] * d + beta[2] * w + beta[3] * m + noise[t]
    estimates = np.empty((reps, 4))
    for j in range(reps):
        design = har.build_design({"RV": path[lead:, j]}, "HAR", 1)
        estimates[j] = har.ols_fit(design).coefficients
    mean_est = estimates.mean(axis=0)
    mc_se = estimates.std(axis=0, ddof=1) / math.sqrt(reps)
    gap = np.abs(mean_est - beta)
    assert np.all(gap <= 3.0 * mc_se)
    _report(5, "200 reps at T=3000: every coefficient within "
               f"{np.max(gap / mc_se):.2f} (<= 3) MC SEs of truth",
            time.perf_counter() - start, 60.0)


def test_criterion_06_dm_size():
    start = time.perf_counter()
    rng = np.random.default_rng(606)
    sims, T = 2000, 1000
    zeros = np.zeros(T)
    rejections = 0
    for _ in range(sims):
        d = rng.standard_normal(T)
        if evaluate.dm_test(d, zeros).pvalue <= 0.05:
            rejections += 1
    rate = rejections / sims
    assert 0.03 <= rate <= 0.07
    _report(6, f"one-sided 5% DM rejection rate {rate:.3f} in [0.03, 0.07]",
            time.perf_counter() - start, 60.0)


def test_criterion_07_mcs_behavior():
    start = time.perf_counter()
    rng = np.random.default_rng(707)
    # (a) identical columns are all retained with p = 1
    col = rng.uniform(1.0, 2.0, 100)
    r = evaluate.mcs(np.column_stack([col, col, col]), n_boot=1000,
                     expected_block_len=2.0, seed=1)
    assert np.all(r.pvalues == 1.0)
    # (b) exchangeable losses: a fixed model stays in the 80% set often
    keep = 0
    reps_b = 500
    for i in range(reps_b):
        L = rng.standard_normal((200, 3))
        res = evaluate.mcs(L, alpha=0.2, n_boot=1000, expected_block_len=2.0,
                           seed=[2, i])
        keep += res.pvalues[0] >= 0.2
    coverage = keep / reps_b
    assert coverage >= 0.77
    # (c) a +1 sigma shifted model is almost always eliminated
    out = 0
    reps_c = 200
    for i in range(reps_c):
        L = rng.standard_normal((200, 3))
        L[:, 0] += 1.0
        res = evaluate.mcs(L, alpha=0.2, n_boot=1000, expected_block_len=2.0,
                           seed=[3, i])
        out += res.pvalues[0] < 0.2
    elimination = out / reps_c
    assert elimination >= 0.95
    _report(7, f"identical p=1; coverage {coverage:.3f} >= 0.77; "
               f"shift eliminated {elimination:.3f} >= 0.95 (1000 resamples)",
            time.perf_counter() - start, 300.0)


def test_criterion_08_qlike_contract():
    start = time.perf_counter()
    y = np.linspace(1e-8, 1e-2, 10_000)
    assert np.all(evaluate.qlike_loss(y, y) == 0.0)
    assert np.all(evaluate.qlike_loss(y, 1.01 * y) > 0.0)
    assert np.all(evaluate.qlike_loss(y, 0.99 * y) > 0.0)
    rng = np.random.default_rng(808)
    ys = rng.uniform(1e-6, 1e-2, 100)
    under = evaluate.qlike_loss(ys, ys / 2)
    over = evaluate.qlike_loss(ys, 2 * ys)
    assert np.all(under > over)
    lit = evaluate.qlike_loss([math.e**2, math.e**4], [math.e, math.e**2],
                              form="literal")
    np.testing.assert_allclose(lit, [math.e - 3.0, math.e**2 - 3.0], rtol=1e-12)
    with pytest.raises(NumericalError):
        evaluate.qlike_loss([2.0], [1.0], form="literal")
    _report(8, "QLIKE zero iff equal on 1e4 grid, under > over on 100 draws, "
               "literal form matches hand cases",
            time.perf_counter() - start, 1.0)


def test_criterion_09_end_to_end_desk_run(desk_run):
    first, second, elapsed = desk_run
    from rvhier.experiment import ForecastStore

    start = time.perf_counter()
    store = ForecastStore.read_csv(first / "forecasts.csv")
    checked = store.coherence_audit()
    assert checked > 0
    for name in ("forecasts.csv", "losses.csv"):
        assert filecmp.cmp(first / name, second / name, shallow=False)
    assert filecmp.cmp(first / "reports" / "ratio_table.csv",
                       second / "reports" / "ratio_table.csv", shallow=False)
    table = (first / "reports" / "ratio_table.csv").read_text().splitlines()
    assert table[0] == ("procedure,MSE_h1,MSE_h5,MSE_h22,"
                        "QLIKE_h1,QLIKE_h5,QLIKE_h22")
    procs = [line.split(",")[0] for line in table[1:]]
    assert procs == ["HAR", "SV", "PV3", "SV_bu", "PV3_bu", "SV_shr", "PV3_shr"]
    m1 = json.loads((first / "manifest.json").read_text())
    m2 = json.loads((second / "manifest.json").read_text())
    assert m1["digest"] == m2["digest"] and m1["outputs"] == m2["outputs"]
    total = elapsed + time.perf_counter() - start
    _report(9, f"3 assets x 1200 days, window 1007, h in (1,5,22), 7 "
               f"procedures: {checked} coherent groups, rerun byte-identical",
            total, 600.0)


def test_criterion_10_directional_diagnostic(desk_run):
    # reported, not asserted: do reconciled procedures beat direct HAR on
    # QLIKE in this synthetic world, as they did on the real panel?
    first, _, _ = desk_run
    lines = (first / "reports" / "ratio_table.csv").read_text().splitlines()
    header = lines[0].split(",")
    qlike_cols = [i for i, name in enumerate(header) if name.startswith("QLIKE")]
    rows = {parts[0]: parts for parts in (ln.split(",") for ln in lines[1:])}
    print("criterion 10 REPORT (non-binding): geometric-mean QLIKE ratios "
          "vs HAR, values < 1 favor reconciliation")
    wins = 0
    cells = 0
    for proc in ("SV_bu", "PV3_bu", "SV_shr", "PV3_shr"):
        vals = [float(rows[proc][i]) for i in qlike_cols]
        cells += len(vals)
        wins += sum(v < 1.0 for v in vals)
        pretty = ", ".join(f"{header[i].split('_h')[1]}d: {v:.3f}"
                           for i, v in zip(qlike_cols, vals))
        print(f"  {proc}: {pretty}")
    print(f"criterion 10 REPORT: reconciled QLIKE ratio < 1 in "
          f"{wins}/{cells} horizon cells")
