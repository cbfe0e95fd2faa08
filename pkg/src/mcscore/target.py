"""Unnormalized targets of the form p(theta) ~ exp(f(theta) - |theta|^2 / 2).

A :class:`TargetDensity` bundles vectorized evaluators for ``f`` and its
gradient. It is the only thing the sampler sees. Each target counts how
many times ``f`` and ``grad f`` were evaluated, one per point.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp, softmax

from .exceptions import UsageError

__all__ = [
    "TargetDensity",
    "GaussianMixtureSpec",
    "log_likelihood",
    "grad_log_likelihood",
    "make_constant",
    "make_tanh_bumps_1d",
    "make_himmelblau",
    "make_gaussian_mixture",
    "TANH_BUMP_CENTERS",
    "HIMMELBLAU_MODES",
]

TANH_BUMP_CENTERS = (-5.0, -1.0, 3.0, 4.0)
TANH_BUMP_HALF_WIDTH = 0.05
TANH_BUMP_HEIGHT = 100.0

HIMMELBLAU_MODES = ((3.0, 2.0), (-2.81, 3.13), (-3.78, -3.28), (3.58, -1.85))


class TargetDensity:
    """Oracle access to ``f`` and ``grad f`` for a target in ``dim`` dimensions.

    Both evaluators take an array of shape ``(..., dim)`` and return shape
    ``(...)`` for ``f`` and ``(..., dim)`` for the gradient. Counters are
    guarded by a lock so concurrent workers never lose increments.

    Args:
        dim: Dimension of the parameter space.
        f: Vectorized log-likelihood.
        grad_f: Vectorized gradient of ``f``.
        name: Short identifier, used by the CLI and in manifests.
        params: JSON-serializable description of the target's parameters.
        modes: Known mode locations, if any.
    """

    def __init__(
        self,
        dim: int,
        f: Callable[[np.ndarray], np.ndarray],
        grad_f: Callable[[np.ndarray], np.ndarray],
        name: str = "custom",
        params: dict | None = None,
        modes: Sequence[Sequence[float]] | None = None,
    ):
        if int(dim) != dim or dim < 1:
            raise UsageError(f"dim must be a positive integer, got {dim!r}")
        self.dim = int(dim)
        self._f = f
        self._grad_f = grad_f
        self.name = name
        self.params = dict(params or {})
        self.modes = None if modes is None else [list(map(float, m)) for m in modes]
        self._lock = threading.Lock()
        self._f_evals = 0
        self._grad_evals = 0

    def __repr__(self):
        return f"TargetDensity(name={self.name!r}, dim={self.dim})"

    @property
    def f_evals(self) -> int:
        return self._f_evals

    @property
    def grad_evals(self) -> int:
        return self._grad_evals

    def reset_counters(self):
        with self._lock:
            self._f_evals = 0
            self._grad_evals = 0

    def _check_points(self, points):
        points = np.asarray(points, dtype=float)
        if points.ndim == 0 or points.shape[-1] != self.dim:
            raise UsageError(
                f"{self.name}: expected trailing dimension {self.dim}, got shape {points.shape}"
            )
        return points

    def f_batch(self, points) -> np.ndarray:
        """Evaluate ``f`` at every point of an ``(..., dim)`` array."""
        points = self._check_points(points)
        out = self._f(points)
        with self._lock:
            self._f_evals += math.prod(points.shape[:-1])
        return out

    def grad_batch(self, points) -> np.ndarray:
        """Evaluate ``grad f`` at every point of an ``(..., dim)`` array."""
        points = self._check_points(points)
        out = self._grad_f(points)
        with self._lock:
            self._grad_evals += math.prod(points.shape[:-1])
        return out


def _single_point(target: TargetDensity, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.ndim > 1 or theta.size != target.dim:
        raise UsageError(f"{target.name}: theta must have length {target.dim}, got shape {theta.shape}")
    theta = theta.reshape(target.dim)
    if not np.all(np.isfinite(theta)):
        raise UsageError(f"{target.name}: theta must be finite")
    return theta


def log_likelihood(target: TargetDensity, theta) -> float:
    """Return ``f(theta)`` and count one evaluation."""
    return float(target.f_batch(_single_point(target, theta)))


def grad_log_likelihood(target: TargetDensity, theta) -> np.ndarray:
    """Return ``grad f(theta)`` and count one gradient evaluation."""
    return np.asarray(target.grad_batch(_single_point(target, theta)), dtype=float)


# ---------------------------------------------------------------------------
# Built-in targets
# ---------------------------------------------------------------------------


def make_constant(dim: int = 1) -> TargetDensity:
    """``f == 0``: the target is exactly the standard normal."""

    def f(x):
        return np.zeros(x.shape[:-1])

    def grad_f(x):
        return np.zeros(x.shape)

    return TargetDensity(dim, f, grad_f, name="constant", params={"dim": dim})


def make_tanh_bumps_1d() -> TargetDensity:
    """One-dimensional target with four smooth bumps of height ~10.

    ``f(x) = 100 * sum_i [tanh(x + 0.05 - mu_i) - tanh(x - 0.05 - mu_i)]``
    with ``mu = (-5, -1, 3, 4)``.
    """
    centers = np.asarray(TANH_BUMP_CENTERS)

    def f(x):
        # x[..., 0, None] - centers -> (..., 4)
        z = x[..., 0, None] - centers
        bumps = np.tanh(z + TANH_BUMP_HALF_WIDTH) - np.tanh(z - TANH_BUMP_HALF_WIDTH)
        return TANH_BUMP_HEIGHT * bumps.sum(axis=-1)

    def grad_f(x):
        z = x[..., 0, None] - centers
        # sech^2 = 1 - tanh^2 stays finite for any |z|
        hi = np.tanh(z + TANH_BUMP_HALF_WIDTH)
        lo = np.tanh(z - TANH_BUMP_HALF_WIDTH)
        d = (1.0 - hi * hi) - (1.0 - lo * lo)
        return TANH_BUMP_HEIGHT * d.sum(axis=-1, keepdims=True)

    return TargetDensity(
        1, f, grad_f, name="tanh1d", params={}, modes=[[c] for c in TANH_BUMP_CENTERS]
    )


def make_himmelblau() -> TargetDensity:
    """Negated Himmelblau function in two dimensions, maximal (zero) at its four minima."""

    def f(x):
        a = x[..., 0] ** 2 + x[..., 1] - 11.0
        b = x[..., 0] + x[..., 1] ** 2 - 7.0
        return -(a * a) - b * b

    def grad_f(x):
        a = x[..., 0] ** 2 + x[..., 1] - 11.0
        b = x[..., 0] + x[..., 1] ** 2 - 7.0
        g = np.empty(x.shape)
        g[..., 0] = -4.0 * x[..., 0] * a - 2.0 * b
        g[..., 1] = -2.0 * a - 4.0 * x[..., 1] * b
        return g

    return TargetDensity(2, f, grad_f, name="himmelblau", params={}, modes=HIMMELBLAU_MODES)


@dataclass
class GaussianMixtureSpec:
    """Means and weights of ``p(theta) = sum_i w_i N(mu_i, I)``."""

    means: list
    weights: list = field(default_factory=list)

    def __post_init__(self):
        means = np.atleast_2d(np.asarray(self.means, dtype=float))
        if means.size == 0:
            raise UsageError("a Gaussian mixture needs at least one component")
        if not np.all(np.isfinite(means)):
            raise UsageError("mixture means must be finite")
        if len(self.weights) == 0:
            weights = np.full(len(means), 1.0 / len(means))
        else:
            weights = np.asarray(self.weights, dtype=float)
        if weights.shape != (len(means),):
            raise UsageError(f"got {len(weights)} weights for {len(means)} means")
        if np.any(weights <= 0) or not np.all(np.isfinite(weights)):
            raise UsageError("mixture weights must be positive and finite")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise UsageError(f"mixture weights must sum to 1, got {weights.sum()!r}")
        self.means = means
        self.weights = weights

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @classmethod
    def from_json(cls, doc) -> "GaussianMixtureSpec":
        """Build from ``[{"mean": [...], "weight": w}, ...]`` (a string, path-free)."""
        if isinstance(doc, (str, bytes)):
            doc = json.loads(doc)
        try:
            means = [c["mean"] for c in doc]
            weights = [c["weight"] for c in doc]
        except (TypeError, KeyError) as exc:
            raise UsageError(f"malformed mixture document: {exc}") from exc
        return cls(means, weights)

    def to_json(self) -> list:
        return [{"mean": m.tolist(), "weight": float(w)} for m, w in zip(self.means, self.weights)]


def _mixture_logits(spec: GaussianMixtureSpec, x):
    # log w_i + mu_i . x - |mu_i|^2 / 2, shape (..., n_components)
    # explicit reduction instead of matmul: BLAS blocking would make rows
    # depend on the batch shape
    offsets = np.log(spec.weights) - 0.5 * np.sum(spec.means**2, axis=1)
    return np.sum(x[..., None, :] * spec.means, axis=-1) + offsets


def make_gaussian_mixture(spec: GaussianMixtureSpec) -> TargetDensity:
    """Target whose normalized density is exactly ``sum_i w_i N(mu_i, I)``."""

    def f(x):
        return logsumexp(_mixture_logits(spec, x), axis=-1)

    def grad_f(x):
        resp = softmax(_mixture_logits(spec, x), axis=-1)
        return np.sum(resp[..., :, None] * spec.means, axis=-2)

    return TargetDensity(
        spec.dim,
        f,
        grad_f,
        name="gauss-mix",
        params={"mixture": spec.to_json()},
        modes=spec.means.tolist(),
    )
