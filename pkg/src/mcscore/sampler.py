"""Discretized reverse-time OU SDE driven by Monte Carlo score estimates.

Starting from ``theta_T ~ N(0, I)`` each step at grid time ``t`` performs

    theta <- theta - delta * (-theta - 2 * s(theta, t)) + sqrt(2 delta) * Z

on the uniform grid ``t = T, T - delta, ..., delta``. The last update uses a
score estimated at ``t = delta``; ``t = 0`` is never an estimation point.

Randomness is per particle: particle ``i`` owns a Philox stream keyed by
``(seed, i)`` and consumes it in a fixed order (initial state, then for each
step the ``K`` score draws followed by the step noise). Particles are
processed in fixed-size chunks, so neither the worker count nor scheduling
can change any sample.
"""

from __future__ import annotations

import logging
import math
import os
import time as _time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .diffusion import DiffusionTime, make_time, perturbation_points
from .exceptions import EstimationError, IntegrationError, UsageError
from .score import S1, SwitchPolicy, _softmax, score_s1, score_s2
from .target import TargetDensity

__all__ = [
    "SamplerConfig",
    "RunResult",
    "ParticleFailure",
    "RNG_SCHEME",
    "particle_rng",
    "time_grid",
    "reverse_step",
    "sample_one",
    "sample_batch",
]

logger = logging.getLogger(__name__)

RNG_SCHEME = "philox4x64-key(seed,particle)-sequential-v1"
# particles per chunk are chosen so a chunk's perturbation points stay cache-sized
CHUNK_POINTS = 16384
MAX_CHUNK_SIZE = 64


@dataclass(frozen=True)
class SamplerConfig:
    """Full definition of a sampling run.

    Attributes:
        T: Terminal diffusion time.
        delta: Step size.
        K: Monte Carlo draws per score estimate.
        n: Number of particles.
        switch_time: Times at or below this use the gradient estimator.
        seed: Unsigned 64-bit seed.
        dim: Dimension of the target.
    """

    T: float
    delta: float
    K: int
    n: int = 1
    switch_time: float = 0.1
    seed: int = 0
    dim: int = 1

    def __post_init__(self):
        if not (math.isfinite(self.T) and self.T > 0):
            raise UsageError(f"T must be positive, got {self.T!r}")
        if not (math.isfinite(self.delta) and 0 < self.delta <= self.T):
            raise UsageError(f"delta must lie in (0, T], got {self.delta!r}")
        for name in ("K", "n", "dim"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise UsageError(f"{name} must be a positive integer, got {value!r}")
        if not self.switch_time > 0:
            raise UsageError(f"switch_time must be positive, got {self.switch_time!r}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise UsageError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if self.steps < 1:
            raise UsageError("T / delta rounds to zero steps")

    @property
    def steps(self) -> int:
        return int(round(self.T / self.delta))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SamplerConfig":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


@dataclass
class ParticleFailure:
    index: int
    step: int
    message: str


@dataclass
class RunResult:
    """Output of :func:`sample_batch`.

    ``samples`` has one row per particle; rows of failed particles are NaN
    and listed in ``failures``.
    """

    samples: np.ndarray
    f_evals: int
    grad_evals: int
    wall_time: float
    failures: list = field(default_factory=list)

    @property
    def n_failed(self) -> int:
        return len(self.failures)

    @property
    def completed(self) -> np.ndarray:
        mask = np.ones(len(self.samples), dtype=bool)
        mask[[f.index for f in self.failures]] = False
        return mask


def particle_rng(seed: int, index: int) -> np.random.Generator:
    """Independent counter-based stream for particle ``index``."""
    return np.random.Generator(np.random.Philox(key=[int(seed), int(index)]))


def time_grid(config: SamplerConfig) -> np.ndarray:
    """Estimation times ``T, T - delta, ..., delta`` (``T`` snapped to ``steps * delta``)."""
    steps = config.steps
    return (steps - np.arange(steps)) * config.delta


def _update(theta, delta, score, noise):
    return theta - delta * (-theta - 2.0 * score) + math.sqrt(2.0 * delta) * noise


def reverse_step(theta, time: DiffusionTime, delta: float, score, noise) -> np.ndarray:
    """One Euler-Maruyama step of the reverse SDE, from ``t`` to ``t - delta``.

    ``time`` is accepted for symmetry with the score call; the OU drift does
    not depend on it.
    """
    if not delta > 0:
        raise UsageError(f"delta must be positive, got {delta!r}")
    theta, score, noise = (np.asarray(a, dtype=float) for a in (theta, score, noise))
    if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(score)) and np.all(np.isfinite(noise))):
        raise IntegrationError("reverse step received a non-finite input")
    if not theta.shape == score.shape == noise.shape:
        raise UsageError(f"shape mismatch: {theta.shape}, {score.shape}, {noise.shape}")
    return _update(theta, delta, score, noise)


def _run_chunk(target: TargetDensity, config: SamplerConfig, rngs):
    """Advance a group of particles through every step.

    Returns ``(samples, f_evals, grad_evals, failures)`` where failures use
    positions within the chunk.
    """
    m, d, K = len(rngs), target.dim, config.K
    policy = SwitchPolicy(config.switch_time)
    theta = np.stack([rng.standard_normal(d) for rng in rngs])
    alive = np.arange(m)
    failures = []
    f_evals = grad_evals = 0

    for step, t in enumerate(time_grid(config)):
        if alive.size == 0:
            break
        time = make_time(t)
        draws = np.stack([rngs[i].standard_normal((K, d)) for i in alive])
        noise = np.stack([rngs[i].standard_normal(d) for i in alive])
        current = theta[alive]

        points = perturbation_points(current, time, draws)
        f_values = target.f_batch(points)
        f_evals += f_values.size
        ok = np.all(np.isfinite(f_values), axis=-1)
        # plain slices avoid copying (m, K, d) arrays when every particle is healthy
        sel = slice(None) if ok.all() else ok
        weights = np.zeros_like(f_values)
        weights[sel] = _softmax(f_values[sel])

        score = np.full_like(current, np.nan)
        if policy.estimator_for(t) == S1:
            score[sel] = score_s1(current[sel], time, draws[sel], weights[sel])
        else:
            grads = target.grad_batch(points[sel])
            grad_evals += grads.shape[0] * K
            finite = np.all(np.isfinite(grads), axis=(-2, -1))
            if finite.all() and isinstance(sel, slice):
                score = score_s2(current, time, grads, weights)
            else:
                sub = np.flatnonzero(ok)
                ok[sub[~finite]] = False
                score[sub[finite]] = score_s2(current[sub[finite]], time, grads[finite], weights[sub[finite]])

        updated = _update(current, config.delta, score, noise)
        ok &= np.all(np.isfinite(updated), axis=-1)
        for i in alive[~ok]:
            failures.append((int(i), step, f"non-finite state or estimate at t={t:.6g}"))
        theta[alive[ok]] = updated[ok]
        theta[alive[~ok]] = np.nan
        alive = alive[ok]

    return theta, f_evals, grad_evals, failures


def sample_one(target: TargetDensity, config: SamplerConfig, rng: np.random.Generator) -> np.ndarray:
    """Run a single particle to ``t = 0`` and return it.

    Raises:
        IntegrationError: if the particle leaves the finite range.
    """
    samples, _, _, failures = _run_chunk(target, config, [rng])
    if failures:
        raise IntegrationError(failures[0][2])
    return samples[0]


def sample_batch(
    target: TargetDensity,
    config: SamplerConfig,
    threads: int = 1,
    chunk_size: int | None = None,
) -> RunResult:
    """Sample ``config.n`` particles; particle ``i`` uses ``particle_rng(config.seed, i)``.

    ``threads`` (0 means one per CPU) and ``chunk_size`` (particles advanced
    together; chosen from ``K * dim`` by default) only affect speed.
    """
    if config.dim != target.dim:
        raise UsageError(f"config.dim={config.dim} but target {target.name} has dim {target.dim}")
    if threads == 0:
        threads = os.cpu_count() or 1
    if chunk_size is None:
        chunk_size = max(1, min(MAX_CHUNK_SIZE, CHUNK_POINTS // (config.K * config.dim)))
    if threads < 0 or chunk_size < 1:
        raise UsageError("threads must be >= 0 and chunk_size >= 1")

    starts = range(0, config.n, chunk_size)

    def work(start):
        stop = min(start + chunk_size, config.n)
        rngs = [particle_rng(config.seed, i) for i in range(start, stop)]
        try:
            return start, _run_chunk(target, config, rngs)
        except (EstimationError, IntegrationError, FloatingPointError, ValueError) as exc:
            logger.warning("particles %d..%d failed: %s", start, stop - 1, exc)
            nan = np.full((stop - start, target.dim), np.nan)
            return start, (nan, 0, 0, [(i, -1, str(exc)) for i in range(stop - start)])

    began = _time.perf_counter()
    samples = np.empty((config.n, target.dim))
    f_evals = grad_evals = 0
    failures = []
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for start, (chunk, nf, ng, fails) in pool.map(work, starts):
            samples[start : start + len(chunk)] = chunk
            f_evals += nf
            grad_evals += ng
            failures.extend(ParticleFailure(start + i, s, msg) for i, s, msg in fails)
            logger.debug("chunk at %d done", start)
    return RunResult(samples, f_evals, grad_evals, _time.perf_counter() - began, failures)
