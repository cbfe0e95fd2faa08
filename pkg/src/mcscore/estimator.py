"""scikit-learn style wrapper around the sampler.

``fit`` binds a :class:`~mcscore.target.TargetDensity`; there is nothing to
learn, the score is re-estimated by Monte Carlo at every step. ``sample``
then draws from it, like ``GaussianMixture.sample`` or ``KernelDensity.sample``.

    >>> from mcscore import ReverseDiffusionSampler, make_himmelblau
    >>> sampler = ReverseDiffusionSampler(T=3.0, dt=0.01, K=1000, random_state=7)
    >>> X = sampler.fit(make_himmelblau()).sample(2000)  # doctest: +SKIP
"""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils import check_scalar
from sklearn.utils.validation import check_array, check_is_fitted

from .diffusion import make_time, perturbation_points
from .exceptions import UsageError
from .sampler import SamplerConfig, sample_batch
from .score import S1, SwitchPolicy, _softmax, score_s1, score_s2
from .target import TargetDensity


class ReverseDiffusionSampler(BaseEstimator):
    """Sample ``p(theta) ~ exp(f(theta) - |theta|^2 / 2)`` from oracle access to ``f``.

    Parameters
    ----------
    T : float, default=2.0
        Terminal diffusion time; the chain starts from ``N(0, I)`` there.
    dt : float, default=0.01
        Step size of the reverse-time integrator.
    K : int, default=1000
        Monte Carlo draws per score estimate.
    switch_time : float, default=0.1
        At or below this time the gradient-based estimator is used.
    random_state : int or None, default=None
        Seed of the per-particle streams. ``None`` draws a fresh seed at
        ``fit`` time and stores it in ``seed_``.
    n_jobs : int, default=1
        Worker threads; 0 or -1 use every CPU. Never changes the output.

    Attributes
    ----------
    target_ : TargetDensity
    n_features_in_ : int
    seed_ : int
    result_ : RunResult
        Evaluation counts, timing and failures of the last ``sample`` call.
    """

    def __init__(self, T=2.0, dt=0.01, K=1000, switch_time=0.1, random_state=None, n_jobs=1):
        self.T = T
        self.dt = dt
        self.K = K
        self.switch_time = switch_time
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _validate_params(self):
        check_scalar(self.T, "T", numbers.Real, min_val=0, include_boundaries="neither")
        check_scalar(self.dt, "dt", numbers.Real, min_val=0, max_val=self.T, include_boundaries="right")
        check_scalar(self.K, "K", numbers.Integral, min_val=1)
        check_scalar(self.switch_time, "switch_time", numbers.Real, min_val=0, include_boundaries="neither")
        check_scalar(self.n_jobs, "n_jobs", numbers.Integral, min_val=-1)
        if self.random_state is not None:
            check_scalar(self.random_state, "random_state", numbers.Integral, min_val=0, max_val=2**64 - 1)

    def fit(self, target, y=None):
        """Bind ``target``. ``y`` is ignored."""
        if not isinstance(target, TargetDensity):
            raise TypeError(f"fit expects a TargetDensity, got {type(target).__name__}")
        self._validate_params()
        self.target_ = target
        self.n_features_in_ = target.dim
        if self.random_state is None:
            self.seed_ = int(np.random.SeedSequence().generate_state(1, np.uint64)[0])
        else:
            self.seed_ = int(self.random_state)
        return self

    def _config(self, n):
        return SamplerConfig(
            T=float(self.T),
            delta=float(self.dt),
            K=int(self.K),
            n=int(n),
            switch_time=float(self.switch_time),
            seed=self.seed_,
            dim=self.n_features_in_,
        )

    def sample(self, n_samples=1):
        """Draw ``n_samples`` points, shape ``(n_samples, n_features_in_)``.

        Rows of particles that failed are NaN; see ``result_.failures``.
        """
        check_is_fitted(self, "target_")
        check_scalar(n_samples, "n_samples", numbers.Integral, min_val=1)
        threads = 0 if self.n_jobs in (0, -1) else self.n_jobs
        self.result_ = sample_batch(self.target_, self._config(n_samples), threads=threads)
        return self.result_.samples

    def estimate_score(self, X, t, rng=None):
        """Monte Carlo score at each row of ``X`` for diffusion time ``t > 0``.

        Uses the estimator the sampler would dispatch at ``t``.
        """
        check_is_fitted(self, "target_")
        X = check_array(X, ensure_min_features=self.n_features_in_)
        if X.shape[1] != self.n_features_in_:
            raise UsageError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        time = make_time(t)
        if time.t <= 0:
            raise UsageError("the score is only estimated at t > 0")
        rng = np.random.default_rng(rng)
        draws = rng.standard_normal((len(X), int(self.K), self.n_features_in_))
        points = perturbation_points(X, time, draws)
        weights = _softmax(self.target_.f_batch(points))
        if SwitchPolicy(self.switch_time).estimator_for(time.t) == S1:
            return score_s1(X, time, draws, weights)
        return score_s2(X, time, self.target_.grad_batch(points), weights)
