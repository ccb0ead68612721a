"""Finite-difference audit of reverse-mode gradients."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor

DENOM_FLOOR = 1e-8


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), DENOM_FLOOR)
    return np.abs(analytic - numeric) / denom


def _scalar(value) -> float:
    data = value.data if isinstance(value, Tensor) else np.asarray(value)
    if data.size != 1:
        raise ValueError(f"grad_check needs a scalar-valued function, got shape {data.shape}")
    return float(data.reshape(()))


def grad_check(
    f: Callable[..., Tensor],
    inputs: Sequence[Tensor],
    h: float = 1e-5,
    max_coords: int | None = None,
    seed: int = 0,
) -> float:
    """Largest relative error between backprop and central differences.

    ``f(*inputs)`` must return a scalar Tensor.  Inputs are perturbed in place
    and restored.  With ``max_coords`` set, at most that many coordinates per
    input are probed, chosen by a seeded RNG.
    """
    if not 1e-6 <= h <= 1e-3:
        raise ValueError(f"step h={h} outside [1e-6, 1e-3]")
    for t in inputs:
        t.requires_grad = True
        t.zero_grad()
    out = f(*inputs)
    _scalar(out)
    out.backward()

    rng = np.random.default_rng(seed)
    worst = 0.0
    for t in inputs:
        analytic = np.zeros_like(t.data) if t.grad is None else t.grad
        flat = t.data.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = np.sort(rng.choice(flat.size, size=max_coords, replace=False))
        numeric = np.empty(len(coords))
        for k, i in enumerate(coords):
            orig = flat[i]
            flat[i] = orig + h
            up = _scalar(f(*inputs))
            flat[i] = orig - h
            down = _scalar(f(*inputs))
            flat[i] = orig
            numeric[k] = (up - down) / (2 * h)
        errs = relative_error(analytic.reshape(-1)[coords], numeric)
        if errs.size:
            worst = max(worst, float(errs.max()))
    return worst
