"""Ornstein-Uhlenbeck forward process ``d theta = -theta dt + sqrt(2) dW``.

Conditionally on ``theta_0``, ``theta_t = exp(-t) theta_0 + sigma_t Z`` with
``sigma_t = sqrt(1 - exp(-2t))``. All functions here take their Gaussian
noise as an argument and are therefore deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import UsageError

__all__ = ["DiffusionTime", "make_time", "forward_sample", "perturbation_points"]


@dataclass(frozen=True)
class DiffusionTime:
    """A diffusion time together with its decay ``exp(-t)`` and noise scale ``sigma_t``."""

    t: float
    decay: float
    sigma: float


def make_time(t: float) -> DiffusionTime:
    """Build a :class:`DiffusionTime`; ``sigma`` uses ``expm1`` to stay accurate for small ``t``."""
    t = float(t)
    if not math.isfinite(t) or t < 0:
        raise UsageError(f"diffusion time must be finite and non-negative, got {t!r}")
    return DiffusionTime(t=t, decay=math.exp(-t), sigma=math.sqrt(-math.expm1(-2.0 * t)))


def forward_sample(theta0, time: DiffusionTime, noise) -> np.ndarray:
    """Return ``exp(-t) * theta0 + sigma_t * noise``."""
    theta0 = np.asarray(theta0, dtype=float)
    noise = np.asarray(noise, dtype=float)
    if theta0.shape != noise.shape:
        raise UsageError(f"theta0 has shape {theta0.shape} but noise has shape {noise.shape}")
    return time.decay * theta0 + time.sigma * noise


def perturbation_points(theta, time: DiffusionTime, draws) -> np.ndarray:
    """Map standard-normal draws ``U_k`` to ``sigma_t U_k + exp(-t) theta``.

    ``theta`` has shape ``(..., d)`` and ``draws`` shape ``(..., K, d)``;
    the result has the shape of ``draws`` and keeps the draw order.
    """
    if time.t <= 0:
        raise UsageError("perturbation points are degenerate at t = 0")
    theta = np.asarray(theta, dtype=float)
    draws = np.asarray(draws, dtype=float)
    if draws.ndim < 2 or draws.shape[-1] != theta.shape[-1]:
        raise UsageError(f"draws of shape {draws.shape} do not match theta of shape {theta.shape}")
    return time.sigma * draws + (time.decay * theta)[..., None, :]
