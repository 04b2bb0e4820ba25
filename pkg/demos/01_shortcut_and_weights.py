"""A confounded sample, and the weights that undo the confounding.

Run: python demos/01_shortcut_and_weights.py
"""

import numpy as np

from shortcut_shield.simulator import DistributionSpec, ideal_spec, sample_dataset
from shortcut_shield.weights import compute_weights, estimate_stats

# In the training distribution the nuisance label v agrees with y 90% of the time.
spec = DistributionSpec(rho=0.9, flip_rate=0.0)
ds = sample_dataset(spec, 5000, seed=0)
print("cell counts [y, v]:\n", ds.cell_counts())
print("P(y=1 | v=1) =", round(ds.y[ds.v == 1].mean(), 3))

# A classifier can read y straight off the shortcut block.
shortcut_only = (ds.x[:, spec.d_core:].mean(axis=1) > 0).astype(int)
print("accuracy of a shortcut-only rule:", round(np.mean(shortcut_only == ds.y), 3))

# The rare cells (y != v) get large weights; the common ones shrink.
w = compute_weights(estimate_stats(ds), ds)
for y in (0, 1):
    for v in (0, 1):
        cell = (ds.y == y) & (ds.v == v)
        print(f"u(y={y}, v={v}) = {w.u[cell][0]:.3f}   weighted mass = {w.u_tilde[cell].sum():.3f}")

# Weighted cell mass is the product of the sample marginals, i.e. independence.
print("target joint:\n", ideal_spec(spec).joint())
