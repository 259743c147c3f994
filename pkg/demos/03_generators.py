"""
Three synthetic pools
=====================

Each generator is fit on the failure rows only. The copula keeps the
empirical marginals, the mixture keeps cluster structure, and the
interpolator draws points on segments between nearby failures.
"""

import numpy as np

from mixbalance.data import apply_normalizer, fit_normalizer
from mixbalance.fixture import make_fixture
from mixbalance.generators import fit_generator, sample_pool, validate_pool

base = make_fixture(positives=100, negatives=1000, seed=0)
base = apply_normalizer(fit_normalizer(base), base)
failures = base.positives()

for kind in ("gaussian_copula", "gaussian_mixture", "interpolator"):
    model = fit_generator(kind, failures, seed=1)
    pool = sample_pool(model, 2000, seed=2)
    q = validate_pool(pool, failures)
    print(f"{kind:17s} rows {q.size}  max |mean delta| {np.abs(q.mean_delta).max():.3f}"
          f"  max |std delta| {np.abs(q.std_delta).max():.3f}")

# interpolated rows sit between a stored row and one of its neighbours
interp = fit_generator("interpolator", failures)
rows, a, b = interp.sample_with_parents(5, np.random.default_rng(0))
lo = np.minimum(interp.rows[a], interp.rows[b])
hi = np.maximum(interp.rows[a], interp.rows[b])
print("inside parent boxes:", bool(((rows >= lo) & (rows <= hi)).all()))
