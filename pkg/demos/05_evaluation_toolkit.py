"""Comparing forecasters: losses, pairwise tests, and model sets.

Synthetic forecasts of a known variance series illustrate the
evaluation stack: the QLIKE and MSE losses, the Diebold-Mariano test
for one pair, the Model Confidence Set for many models at once, and
the Nemenyi-style multiple-comparison ranking.
"""

import numpy as np

from rvhier import evaluate

rng = np.random.default_rng(17)
np.set_printoptions(precision=4, suppress=True)

T = 750
actual = np.exp(rng.normal(np.log(1e-4), 0.5, T))

print("-- QLIKE penalizes under-forecasts more ---------------------")
q_half = evaluate.qlike_loss(actual, actual / 2).mean()
q_twice = evaluate.qlike_loss(actual, 2 * actual).mean()
print(f"mean QLIKE, forecast = actual/2 : {q_half:.4f}")
print(f"mean QLIKE, forecast = 2*actual: {q_twice:.4f}")
print("halving the forecast costs more than doubling it\n")

# four forecasters: sharp, noisy, biased, and very noisy
forecasts = {
    "sharp": actual * np.exp(rng.normal(0.0, 0.10, T)),
    "noisy": actual * np.exp(rng.normal(0.0, 0.35, T)),
    "biased": actual * 1.6,
    "wild": actual * np.exp(rng.normal(0.0, 0.70, T)),
}
losses = {name: evaluate.qlike_loss(actual, f)
          for name, f in forecasts.items()}
for name, ls in losses.items():
    print(f"mean QLIKE {name:7s} {ls.mean():.4f}")

print("\n-- Diebold-Mariano: sharp vs noisy --------------------------")
res = evaluate.dm_test(losses["sharp"], losses["noisy"])
print(f"stat {res.stat:.2f}, one-sided p-value {res.pvalue:.2e}")
print("small p-values favor the first argument (sharp)")

print("\n-- Model Confidence Set -------------------------------------")
L = np.column_stack(list(losses.values()))
mcs = evaluate.mcs(L, alpha=0.2, n_boot=5000, seed=1,
                   labels=tuple(losses.keys()))
for label, p in zip(mcs.labels, mcs.pvalues):
    kept = "kept" if p >= mcs.alpha else "eliminated"
    print(f"  {label:7s} p = {p:.3f}  {kept}")
print(f"survivors at alpha = {mcs.alpha}: {mcs.survivors}")

print("\n-- multiple comparison with the best ------------------------")
mcb = evaluate.mcb_nemenyi(L, alpha=0.05, labels=tuple(losses.keys()))
print(f"critical value q = {evaluate.nemenyi_critical_value(L.shape[1]):.3f}, "
      f"half-width {mcb.half_width:.3f}")
best = int(np.argmin(mcb.mean_ranks))
for i, (label, r) in enumerate(zip(mcb.labels, mcb.mean_ranks)):
    marker = "" if mcb.significantly_different(i, best) else " <- ties best"
    print(f"  {label:7s} mean rank {r:.2f} "
          f"[{mcb.lower[i]:.2f}, {mcb.upper[i]:.2f}]{marker}")
