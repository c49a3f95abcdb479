"""What the discriminator's depth buys on a 1-D contaminated sample.

A zero-hidden-layer JS discriminator can only match first moments, so the
estimate tracks the grand mean (1-eps)*theta + eps*t and drifts with the
contamination.  One hidden layer restores robustness: the estimate stays
near theta for every t.

    python3 demos/one_dim_discriminators.py
"""

import dataclasses

import numpy as np

from robustloc import DatasetSpec, default_config, q_gauss_shift, sample_contaminated, train

theta, eps, n = 1.0, 0.2, 5000
print(f"data: (1-{eps})*N({theta}, 1) + {eps}*N(t, 1), n={n}")
print(f"{'t':>4} {'grand mean':>11} {'plain fit':>10} {'robust fit':>11}")
for t in (0.5, 1.0, 2.0, 5.0):
    spec = DatasetSpec(p=1, n=n, eps=eps, theta=np.array([theta]),
                       q=q_gauss_shift(np.array([t])), seed=int(10 * t))
    ds = sample_contaminated(spec)
    fits = {}
    for name, hidden in (("plain", ()), ("robust", (5,))):
        cfg = default_config(1, n, "js", seed=3, hidden=hidden)
        cfg = dataclasses.replace(cfg, epochs=120)
        fits[name] = float(train(ds.x, cfg).theta_hat[0])
    grand = (1 - eps) * theta + eps * t
    print(f"{t:4.1f} {grand:11.3f} {fits['plain']:10.3f} {fits['robust']:11.3f}")
