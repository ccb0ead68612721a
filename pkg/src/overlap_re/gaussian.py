"""Gaussian window probabilities and target-entity-aware pooling.

Each token gets the Gaussian mass of the unit-width interval ending at its
signed distance from a target entity, ``P(x) = F(x) - F(x - w)``; pooling sums
token representations weighted by that mass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import Tensor, as_tensor, matmul, reshape

# Abramowitz & Stegun 7.1.26, |error| <= 1.5e-7 on erf.
_P = 0.3275911
_A = (0.254829592, -0.284496736, 1.421413741, -1.453152027, 1.061405429)
_SQRT2 = np.sqrt(2.0)
_SQRT2PI = np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class GaussianConfig:
    mu: float = 0.0
    sigma: float = 3.0
    window: int = 1
    renormalize: bool = False

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"gaussian.sigma must be > 0, got {self.sigma}")
        if int(self.window) != self.window or self.window < 1:
            raise ValueError(f"gaussian.window must be an integer >= 1, got {self.window}")


@dataclass(frozen=True)
class DistanceLists:
    x1: list[int]
    x2: list[int]


def _check(cfg: GaussianConfig) -> None:
    if not cfg.sigma > 0:
        raise ValueError(f"standard deviation must be > 0, got {cfg.sigma}")


def _erfc_nonneg(z: np.ndarray) -> np.ndarray:
    """erfc(z) for z >= 0 from the rational approximation."""
    t = 1.0 / (1.0 + _P * z)
    poly = t * (_A[0] + t * (_A[1] + t * (_A[2] + t * (_A[3] + t * _A[4]))))
    return poly * np.exp(-z * z)


def erf(x):
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * (1.0 - _erfc_nonneg(np.abs(x)))


def gaussian_pdf(x, cfg: GaussianConfig = GaussianConfig()):
    _check(cfg)
    x = np.asarray(x, dtype=np.float64)
    z = (x - cfg.mu) / cfg.sigma
    return np.exp(-0.5 * z * z) / (_SQRT2PI * cfg.sigma)


def _tails(x, cfg: GaussianConfig) -> tuple[np.ndarray, np.ndarray]:
    """Lower tail F(x) and upper tail 1 - F(x), each computed without cancellation."""
    z = (np.asarray(x, dtype=np.float64) - cfg.mu) / (cfg.sigma * _SQRT2)
    half = 0.5 * _erfc_nonneg(np.abs(z))
    lower = np.where(z < 0, half, 1.0 - half)
    upper = np.where(z < 0, 1.0 - half, half)
    return lower, upper


def gaussian_cdf(x, cfg: GaussianConfig = GaussianConfig()):
    _check(cfg)
    return _tails(x, cfg)[0]


def window_prob(x, cfg: GaussianConfig = GaussianConfig()):
    """Mass of the interval (x - w, x]: ``F(x) - F(x - w)``."""
    _check(cfg)
    x = np.asarray(x, dtype=np.float64)
    lo_hi, up_hi = _tails(x, cfg)
    lo_lo, up_lo = _tails(x - cfg.window, cfg)
    # right of the mean, difference the upper tails instead
    return np.where(x - cfg.window >= cfg.mu, up_lo - up_hi, lo_hi - lo_lo)


def span_distances(n_tokens: int, span: tuple[int, int]) -> list[int]:
    """Signed offset of every position from the nearest token of ``span``."""
    first, last = span
    if not 0 <= first <= last < n_tokens:
        raise ValueError(f"span {span} is not inside a {n_tokens}-token sequence")
    out = []
    for i in range(n_tokens):
        if i < first:
            out.append(i - first)
        elif i > last:
            out.append(i - last)
        else:
            out.append(0)
    return out


def relative_distances(instance) -> DistanceLists:
    if instance.target1_span is None or instance.target2_span is None:
        raise ValueError(f"instance {instance.instance_id} is missing a target span")
    n = len(instance.tokens)
    return DistanceLists(
        span_distances(n, tuple(instance.target1_span)),
        span_distances(n, tuple(instance.target2_span)),
    )


def pooling_weights(distances, cfg: GaussianConfig = GaussianConfig(), mask=None) -> np.ndarray:
    """Window probabilities for a distance list, zeroed where ``mask`` is False."""
    weights = window_prob(np.asarray(distances, dtype=np.float64), cfg)
    if mask is not None:
        weights = np.where(np.asarray(mask, dtype=bool), weights, 0.0)
    if cfg.renormalize:
        total = weights.sum(axis=-1, keepdims=True)
        weights = np.divide(weights, total, out=np.zeros_like(weights), where=total > 0)
    return weights


def pool(weights, token_reps) -> Tensor:
    """Weighted sum over the token axis: ``sum_i weights[i] * token_reps[i]``.

    Accepts ``[N]`` / ``[N, d]`` or batched ``[B, N]`` / ``[B, N, d]``.
    """
    token_reps = as_tensor(token_reps)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != token_reps.shape[:-1]:
        raise ValueError(
            f"pooling weights of shape {weights.shape} do not match token reps {token_reps.shape}"
        )
    d = token_reps.shape[-1]
    pooled = matmul(Tensor(weights[..., None, :]), token_reps)
    return reshape(pooled, weights.shape[:-1] + (d,))


def target_aware_pool(distances, token_reps, cfg: GaussianConfig = GaussianConfig(), mask=None) -> Tensor:
    token_reps = as_tensor(token_reps)
    distances = np.asarray(distances)
    if distances.shape != token_reps.shape[:-1]:
        raise ValueError(
            f"distance list of shape {distances.shape} does not match token reps {token_reps.shape}"
        )
    return pool(pooling_weights(distances, cfg, mask), token_reps)
