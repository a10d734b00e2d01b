"""End-to-end gradient check against central differences of the total loss."""

import numpy as np


def check_params(loss_fn, params, analytic, rng, n_samples=5, h=1e-5):
    """Relative error over ``n_samples`` randomly chosen scalar weights."""
    picks = []
    sizes = [p.size for p in params]
    flat_idx = rng.choice(sum(sizes), size=min(n_samples, sum(sizes)), replace=False)
    offsets = np.cumsum([0] + sizes)
    for f in flat_idx:
        k = int(np.searchsorted(offsets, f, side="right") - 1)
        picks.append((k, int(f - offsets[k])))
    got, ref = [], []
    for k, j in picks:
        p = params[k].reshape(-1)
        old = p[j]
        p[j] = old + h
        up = loss_fn()
        p[j] = old - h
        down = loss_fn()
        p[j] = old
        ref.append((up - down) / (2 * h))
        got.append(analytic[k].reshape(-1)[j])
    got, ref = np.array(got), np.array(ref)
    return float(np.linalg.norm(got - ref) / max(np.linalg.norm(ref), 1e-12))
