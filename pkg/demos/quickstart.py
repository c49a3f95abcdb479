"""Sample a contaminated Gaussian, fit the JS estimator, compare baselines.

Run from the repository root:

    python3 demos/quickstart.py
"""

import dataclasses

import numpy as np

from robustloc import (
    DatasetSpec,
    coordinate_median,
    default_config,
    l2_error,
    q_gauss_shift,
    sample_contaminated,
    train,
)

p, n, eps = 5, 1000, 0.2
theta = np.linspace(-1.0, 1.0, p)
spec = DatasetSpec(p=p, n=n, eps=eps, theta=theta, q=q_gauss_shift(5.0 * np.ones(p)), seed=7)
ds = sample_contaminated(spec)
print(f"{n} points in R^{p}, {int(ds.labels.sum())} of them contaminated at distance 5")

cfg = default_config(p, n, "js", seed=7)
cfg = dataclasses.replace(cfg, epochs=80)
est = train(ds.x, cfg)

with np.printoptions(precision=3, suppress=True):
    print("truth            ", theta)
    print("js estimate      ", est.theta_hat, f" error {l2_error(est.theta_hat, theta):.4f}")
    print("coordinate median", coordinate_median(ds.x), f" error {l2_error(coordinate_median(ds.x), theta):.4f}")
    print("sample mean      ", ds.x.mean(axis=0), f" error {l2_error(ds.x.mean(axis=0), theta):.4f}")
print(f"final objective {est.final_objective:.4f}, clamped probabilities {est.clamp_count}")
