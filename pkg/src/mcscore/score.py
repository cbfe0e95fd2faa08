"""Monte Carlo estimates of the OU-smoothed score ``grad log p_t``.

With ``U_k ~ N(0, I)`` and points ``x_k = sigma_t U_k + exp(-t) theta``, the
self-normalized weights ``w_k ~ exp(f(x_k))`` give two estimators:

* ``s1 = -theta + exp(-t) / sigma_t * sum_k w_k U_k`` (no gradient calls),
* ``s2 = -theta + exp(-t) * sum_k w_k grad f(x_k)``.

Both share one pool of draws for numerator and denominator. ``s1`` is used
for ``t > switch_time`` and ``s2`` otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffusion import DiffusionTime, perturbation_points
from .exceptions import EstimationError, UsageError
from .target import TargetDensity

__all__ = [
    "S1",
    "S2",
    "ScoreBatch",
    "SwitchPolicy",
    "importance_weights",
    "score_s1",
    "score_s2",
    "estimate_score",
]

S1 = "S1"
S2 = "S2"


@dataclass(frozen=True)
class SwitchPolicy:
    """Use ``s1`` strictly above ``switch_time`` and ``s2`` at or below it."""

    switch_time: float = 0.1

    def __post_init__(self):
        if not self.switch_time > 0:
            raise UsageError(f"switch_time must be positive, got {self.switch_time!r}")

    def estimator_for(self, t: float) -> str:
        return S1 if t > self.switch_time else S2


@dataclass
class ScoreBatch:
    """Everything produced by one score estimate.

    Attributes:
        draws: Standard-normal draws, shape ``(K, d)``.
        points: Perturbed points ``sigma_t U_k + exp(-t) theta``, shape ``(K, d)``.
        f_values: ``f`` at each point, shape ``(K,)``.
        weights: Normalized importance weights, shape ``(K,)``.
        score: The estimate, shape ``(d,)``.
        estimator_used: ``"S1"`` or ``"S2"``.
    """

    draws: np.ndarray
    points: np.ndarray
    f_values: np.ndarray
    weights: np.ndarray
    score: np.ndarray
    estimator_used: str


def importance_weights(f_values) -> np.ndarray:
    """Softmax of ``f_values`` along the last axis, computed with max-subtraction.

    Raises:
        UsageError: if there are no values.
        EstimationError: if any value is non-finite; ``index`` points at it.
    """
    f_values = np.asarray(f_values, dtype=float)
    if f_values.ndim == 0 or f_values.shape[-1] == 0:
        raise UsageError("importance weights need at least one value")
    bad = ~np.isfinite(f_values)
    if bad.any():
        index = tuple(int(i) for i in np.argwhere(bad)[0])
        raise EstimationError(
            f"non-finite log-likelihood at index {index if len(index) > 1 else index[0]}",
            index=index if len(index) > 1 else index[0],
        )
    return _softmax(f_values)


def _softmax(f_values):
    shifted = np.exp(f_values - f_values.max(axis=-1, keepdims=True))
    return shifted / shifted.sum(axis=-1, keepdims=True)


def _weighted_sum(weights, vectors):
    # sum_k w_k v_k. Reduces over a contiguous last axis so each row's result
    # does not depend on how many rows are stacked together.
    return np.sum(weights[..., None, :] * np.swapaxes(vectors, -1, -2), axis=-1)


def score_s1(theta, time: DiffusionTime, draws, weights) -> np.ndarray:
    """``-theta + exp(-t) / sigma_t * sum_k w_k U_k``; batched over leading axes."""
    if time.t <= 0:
        raise UsageError("s1 is singular at t = 0")
    theta = np.asarray(theta, dtype=float)
    return -theta + (time.decay / time.sigma) * _weighted_sum(np.asarray(weights), np.asarray(draws))


def score_s2(theta, time: DiffusionTime, gradients, weights) -> np.ndarray:
    """``-theta + exp(-t) * sum_k w_k grad f(x_k)``; batched over leading axes."""
    gradients = np.asarray(gradients, dtype=float)
    if not np.all(np.isfinite(gradients)):
        index = int(np.argwhere(~np.isfinite(gradients))[0][-2])
        raise EstimationError(f"non-finite gradient at draw {index}", index=index)
    theta = np.asarray(theta, dtype=float)
    return -theta + time.decay * _weighted_sum(np.asarray(weights), gradients)


def estimate_score(
    target: TargetDensity,
    theta,
    time: DiffusionTime,
    K: int,
    policy: SwitchPolicy | None = None,
    rng: np.random.Generator | None = None,
) -> ScoreBatch:
    """Draw ``K`` fresh normals from ``rng`` and estimate the score at ``theta``.

    Costs exactly ``K`` evaluations of ``f``, plus ``K`` of ``grad f`` when
    ``s2`` is selected.
    """
    if K < 1 or int(K) != K:
        raise UsageError(f"K must be a positive integer, got {K!r}")
    if time.t <= 0:
        raise UsageError("the score is only estimated at t > 0")
    policy = policy or SwitchPolicy()
    rng = np.random.default_rng() if rng is None else rng
    theta = np.asarray(theta, dtype=float).reshape(target.dim)

    draws = rng.standard_normal((int(K), target.dim))
    points = perturbation_points(theta, time, draws)
    f_values = np.asarray(target.f_batch(points), dtype=float)
    weights = importance_weights(f_values)
    estimator = policy.estimator_for(time.t)
    if estimator == S1:
        score = score_s1(theta, time, draws, weights)
    else:
        score = score_s2(theta, time, target.grad_batch(points), weights)
    return ScoreBatch(draws, points, f_values, weights, score, estimator)
