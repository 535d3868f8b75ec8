"""Central finite-difference verification of the autodiff gradients."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


def finite_difference_check(loss_fn, params: dict[str, Tensor], n_coords: int = 50,
                            h: float = 1e-3, seed: int = 0) -> float:
    """Compare analytic gradients against central differences.

    loss_fn() must rebuild the loss from the current parameter values. Samples
    n_coords random parameter coordinates and returns the worst relative error
    max(|analytic - numeric|) / max(|numeric|, 1e-8). Run the parameters at
    float64 for meaningful results.
    """
    for p in params.values():
        p.zero_grad()
    loss = loss_fn()
    loss.backward()
    analytic = {name: p.grad.copy() for name, p in params.items()}

    rng = np.random.default_rng(seed)
    names = sorted(params)
    worst = 0.0
    for _ in range(n_coords):
        name = names[rng.integers(len(names))]
        p = params[name]
        flat = p.data.reshape(-1)
        j = int(rng.integers(flat.size))
        orig = flat[j]
        flat[j] = orig + h
        up = loss_fn().item()
        flat[j] = orig - h
        down = loss_fn().item()
        flat[j] = orig
        numeric = (up - down) / (2.0 * h)
        a = analytic[name].reshape(-1)[j]
        err = abs(a - numeric) / max(abs(numeric), 1e-8)
        worst = max(worst, err)
    return worst
