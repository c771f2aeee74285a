"""Finite-difference verification of hand-derived gradients."""

import math

import numpy as np

from ..errors import ContractViolation, NonFiniteLossError
from .params import ParamStore
from .rng import Rng


def finite_diff_check(loss_fn, store: ParamStore, eps: float = 1e-4,
                      sample: int | None = None, rng: Rng | None = None,
                      loss_only_fn=None) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``loss_fn()`` must return the scalar loss and accumulate analytic
    gradients into ``store`` (the checker zeroes them first).  With
    ``sample`` set, that many coordinates are drawn across all parameters
    instead of sweeping every one; ``loss_only_fn``, when given, is used
    for the (gradient-free) finite-difference evaluations.

    The relative error denominator is max(|analytic|, |numeric|, 1e-8).
    """
    if eps <= 0:
        raise ContractViolation("eps must be positive")
    eval_fn = loss_only_fn if loss_only_fn is not None else loss_fn

    store.zero_grads()
    base = float(loss_fn())
    if not math.isfinite(base):
        raise NonFiniteLossError(f"loss is non-finite ({base}) at the base point")
    analytic = {name: p.grad.copy() for name, p in store.entries.items()}

    coords = [(name, idx) for name, p in store.entries.items()
              for idx in range(p.values.size)]
    if sample is not None and sample < len(coords):
        if rng is None:
            raise ContractViolation("sampled checking requires an rng")
        picked = []
        seen = set()
        while len(picked) < sample:
            k = rng.randint(len(coords))
            if k not in seen:
                seen.add(k)
                picked.append(coords[k])
        coords = picked

    max_err = 0.0
    for name, idx in coords:
        flat = store[name].values.reshape(-1)
        orig = flat[idx]
        flat[idx] = orig + eps
        hi = float(eval_fn())
        flat[idx] = orig - eps
        lo = float(eval_fn())
        flat[idx] = orig
        if not (math.isfinite(hi) and math.isfinite(lo)):
            raise NonFiniteLossError(
                f"non-finite loss while perturbing {name}[{idx}]")
        numeric = (hi - lo) / (2.0 * eps)
        a = float(analytic[name].reshape(-1)[idx])
        denom = max(abs(a), abs(numeric), 1e-8)
        max_err = max(max_err, abs(a - numeric) / denom)
    return max_err
