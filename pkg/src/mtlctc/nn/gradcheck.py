"""Central finite-difference verification of analytic gradients."""
from __future__ import annotations

import numpy as np

# denominators below this are treated as absolute error
REL_FLOOR = 1e-6


class GradCheckError(ValueError):
    pass


def relative_error(analytic, numeric, floor: float = REL_FLOOR):
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def numeric_gradient(loss_fn, params: dict, epsilon: float = 1e-5) -> dict:
    if not epsilon > 0:
        raise GradCheckError(f"epsilon must be positive, got {epsilon}")
    out = {}
    for name, p in params.items():
        g = np.zeros_like(p)
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            up = loss_fn()
            flat[i] = orig - epsilon
            down = loss_fn()
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * epsilon)
        out[name] = g
    return out


def finite_difference_check(loss_and_grad, params: dict, epsilon: float = 1e-5,
                            budget: int = 200) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``loss_and_grad()`` evaluates at the current contents of ``params``
    (perturbed in place) and returns ``(loss, grads)`` with ``grads`` keyed
    like ``params``.
    """
    if not epsilon > 0:
        raise GradCheckError(f"epsilon must be positive, got {epsilon}")
    n = sum(p.size for p in params.values())
    if n > budget:
        raise GradCheckError(f"{n} parameters exceed the finite-difference budget {budget}")
    _, analytic = loss_and_grad()
    analytic = {k: np.array(v, copy=True) for k, v in analytic.items()}
    numeric = numeric_gradient(lambda: loss_and_grad()[0], params, epsilon)
    worst = 0.0
    for name in params:
        err = relative_error(analytic[name], numeric[name])
        if err.size:
            worst = max(worst, float(err.max()))
    return worst
