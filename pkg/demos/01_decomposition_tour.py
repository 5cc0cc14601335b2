"""Tour of the daily variance decompositions.

One simulated trading day of 390 one-minute returns is cut up every way
the library supports: by sign, by quantile bin, by fixed thresholds, by
time-of-day segment, and by the combined quantile-by-time grid. Every
decomposition is additive, so each section ends by showing that the
components recover the day's realized variance exactly.
"""

import numpy as np

from rvhier import measures

rng = np.random.default_rng(42)
np.set_printoptions(precision=6, suppress=True)

# A day with a volatile morning and a quiet afternoon.
n = measures.DEFAULT_GRID_SIZE
sd = np.where(np.arange(n) < n // 2, 2e-3, 8e-4)
returns = rng.normal(0.0, sd)

rv = measures.realized_variance(returns)
print(f"realized variance over {n} returns: {rv:.6e}")

print("\n-- by sign ------------------------------------------------")
sv_plus, sv_minus = measures.semivariances(returns)
print(f"SV+ = {sv_plus:.6e}  (squared returns with r >= 0)")
print(f"SV- = {sv_minus:.6e}  (squared returns with r < 0)")
print(f"SV+ + SV- - RV = {sv_plus + sv_minus - rv:.2e}")

print("\n-- by quantile bin ----------------------------------------")
alphas = measures.DEFAULT_ALPHAS
cuts = measures.quantile_thresholds(returns, alphas)
pv = measures.partial_variances(returns, alphas)
print(f"alphas {alphas} give thresholds {cuts}")
print(f"partial variances {pv}")
print(f"sum - RV = {pv.sum() - rv:.2e}")

print("\n-- by fixed thresholds ------------------------------------")
fixed = [-1e-3, 0.0, 1e-3]
tc = measures.threshold_components(returns, fixed)
print(f"cut points {fixed} give components {tc}")
print(f"sum - RV = {tc.sum() - rv:.2e}")

print("\n-- by time of day -----------------------------------------")
segments = measures.temporal_components(returns)
print(f"{segments.size} segments of {measures.DEFAULT_SEGMENT_LENGTH} "
      f"minutes: {segments}")
print("the volatile morning shows up in the early segments")
print(f"sum - RV = {segments.sum() - rv:.2e}")

print("\n-- combined grid: quantile bin x segment ------------------")
grid = measures.combined_components(returns, alphas=alphas)
print(grid)
print("row sums reproduce the partial variances:",
      np.abs(grid.sum(axis=1) - pv).max())
print("column sums reproduce the temporal components:",
      np.abs(grid.sum(axis=0) - segments).max())

print("\n-- combined grid: sign x segment --------------------------")
sign_grid = measures.sign_temporal_components(returns)
print(sign_grid)
print("row sums reproduce (SV-, SV+):",
      np.abs(sign_grid.sum(axis=1) - np.array([sv_minus, sv_plus])).max())

print("\n-- one-call interface -------------------------------------")
spec = measures.DecompositionSpec(kind="COMBINED", alphas=alphas)
day = measures.decompose_day(returns, spec, date="2024-01-02")
print(f"decompose_day({spec.kind}) -> labels {day.labels[:4]} ... "
      f"({len(day.labels)} components)")
print(f"components sum to RV within {abs(day.components.sum() - day.rv):.2e}")
