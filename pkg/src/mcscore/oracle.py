"""Ground truth used to check the Monte Carlo machinery.

Everything here is computed independently of the estimators in
:mod:`mcscore.score`: closed-form scores for Gaussian mixtures, trapezoid
quadrature in one dimension, and the box-based mode diagnostics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import softmax

from .diffusion import DiffusionTime
from .exceptions import DomainTooSmallError, UsageError
from .target import GaussianMixtureSpec, TargetDensity

__all__ = [
    "ModeSpec",
    "ModeReport",
    "analytic_score_gaussian_mixture",
    "quadrature_score_1d",
    "window_masses_1d",
    "true_density_1d",
    "mode_counts",
    "mode_proportions",
    "mode_probability_estimates",
    "mode_report",
]

ENDPOINT_TOL = 1e-12


@dataclass
class ModeSpec:
    """Axis-aligned boxes ``center +- half_width`` around known modes."""

    centers: list
    half_width: float = 0.5
    pdf_samples_per_mode: int = 10000

    def __post_init__(self):
        centers = np.asarray(self.centers, dtype=float)
        if centers.ndim == 1:
            centers = centers[:, None]
        if centers.ndim != 2 or len(centers) == 0:
            raise UsageError("ModeSpec needs at least one center")
        if not self.half_width > 0:
            raise UsageError(f"half_width must be positive, got {self.half_width!r}")
        if int(self.pdf_samples_per_mode) != self.pdf_samples_per_mode or self.pdf_samples_per_mode < 1:
            raise UsageError("pdf_samples_per_mode must be a positive integer")
        self.centers = centers

    @classmethod
    def from_json(cls, doc, **overrides) -> "ModeSpec":
        if isinstance(doc, (str, bytes)):
            doc = json.loads(doc)
        if isinstance(doc, list):
            doc = {"centers": doc}
        try:
            kwargs = {"centers": doc["centers"]}
        except (TypeError, KeyError) as exc:
            raise UsageError(f"malformed mode document: {exc}") from exc
        for key in ("half_width", "pdf_samples_per_mode"):
            if key in doc:
                kwargs[key] = doc[key]
        kwargs.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kwargs)

    def to_json(self) -> dict:
        return {
            "centers": self.centers.tolist(),
            "half_width": self.half_width,
            "pdf_samples_per_mode": self.pdf_samples_per_mode,
        }


@dataclass
class ModeReport:
    sampled_proportions: np.ndarray
    pdf_proportions: np.ndarray
    counts: np.ndarray
    pdf_stderr: np.ndarray = field(default=None)

    @property
    def max_abs_deviation(self) -> float:
        return float(np.max(np.abs(self.sampled_proportions - self.pdf_proportions)))

    def to_json(self) -> dict:
        out = {
            "sampled_proportions": self.sampled_proportions.tolist(),
            "pdf_proportions": self.pdf_proportions.tolist(),
            "counts": self.counts.tolist(),
            "max_abs_deviation": self.max_abs_deviation,
        }
        if self.pdf_stderr is not None:
            out["pdf_stderr"] = self.pdf_stderr.tolist()
        return out


def analytic_score_gaussian_mixture(spec: GaussianMixtureSpec, theta, time: DiffusionTime) -> np.ndarray:
    """Exact score of ``p_t = sum_i w_i N(exp(-t) mu_i, I)``.

    ``theta`` may carry leading batch axes.
    """
    theta = np.asarray(theta, dtype=float)
    centers = time.decay * spec.means  # (c, d)
    diff = centers - theta[..., None, :]  # (..., c, d)
    logits = np.log(spec.weights) - 0.5 * np.sum(diff**2, axis=-1)
    resp = softmax(logits, axis=-1)
    return np.sum(resp[..., None] * diff, axis=-2)


def _trapezoid_grid(lo, hi, step):
    if not (hi > lo and step > 0):
        raise UsageError(f"bad quadrature grid [{lo}, {hi}] step {step}")
    n = int(round((hi - lo) / step)) + 1
    return np.linspace(lo, hi, n)


def quadrature_score_1d(
    target: TargetDensity,
    theta: float,
    time: DiffusionTime,
    grid_lo: float = -12.0,
    grid_hi: float = 12.0,
    grid_step: float = 1e-3,
) -> float:
    """Trapezoid evaluation of the score as a ratio of integrals over ``theta_0``.

    numerator   = int p0(x) d/dtheta p_t(theta | x) dx
    denominator = int p0(x) p_t(theta | x) dx

    Raises:
        DomainTooSmallError: if the integrand at either endpoint exceeds
            ``1e-12`` of its maximum.
    """
    if target.dim != 1:
        raise UsageError("quadrature_score_1d needs a one-dimensional target")
    if time.t <= 0:
        raise UsageError("quadrature score needs t > 0")
    theta = float(theta)
    x = _trapezoid_grid(grid_lo, grid_hi, grid_step)
    resid = theta - time.decay * x
    log_kernel = target.f_batch(x[:, None]) - 0.5 * x**2 - 0.5 * resid**2 / time.sigma**2
    weight = np.exp(log_kernel - log_kernel.max())
    if max(weight[0], weight[-1]) > ENDPOINT_TOL:
        raise DomainTooSmallError(
            f"integrand is {max(weight[0], weight[-1]):.3g} of its peak at the grid edge; widen [{grid_lo}, {grid_hi}]"
        )
    num = np.trapezoid(weight * (-resid / time.sigma**2), x)
    den = np.trapezoid(weight, x)
    return float(num / den)


def true_density_1d(target: TargetDensity, x, grid_lo=-12.0, grid_hi=12.0, grid_step=1e-3) -> np.ndarray:
    """Normalized ``p0`` at points ``x``, normalizing constant from trapezoid quadrature."""
    grid = _trapezoid_grid(grid_lo, grid_hi, grid_step)
    log_p = target.f_batch(grid[:, None]) - 0.5 * grid**2
    shift = log_p.max()
    z = np.trapezoid(np.exp(log_p - shift), grid)
    x = np.asarray(x, dtype=float)
    return np.exp(target.f_batch(x[..., None]) - 0.5 * x**2 - shift) / z


def window_masses_1d(
    target: TargetDensity,
    centers,
    half_width: float = 0.5,
    grid_step: float = 1e-3,
) -> np.ndarray:
    """Trapezoid mass of ``p0`` in each window ``[c - h, c + h]``, normalized over windows."""
    if target.dim != 1:
        raise UsageError("window_masses_1d needs a one-dimensional target")
    grids = [_trapezoid_grid(c - half_width, c + half_width, grid_step) for c in np.ravel(centers)]
    logs = [target.f_batch(g[:, None]) - 0.5 * g**2 for g in grids]
    shift = max(lp.max() for lp in logs)
    masses = np.array([np.trapezoid(np.exp(lp - shift), g) for lp, g in zip(logs, grids)])
    return masses / masses.sum()


def _in_boxes(samples, modes: ModeSpec):
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    if samples.shape[-1] != modes.centers.shape[1]:
        raise UsageError(f"samples of dim {samples.shape[-1]} vs modes of dim {modes.centers.shape[1]}")
    # closed boxes: a point exactly on an edge counts as inside
    return np.all(np.abs(samples[:, None, :] - modes.centers) <= modes.half_width, axis=-1)


def mode_counts(samples, modes: ModeSpec) -> np.ndarray:
    """Number of samples in each closed box (NaN rows land nowhere)."""
    return _in_boxes(samples, modes).sum(axis=0)


def mode_proportions(samples, modes: ModeSpec) -> np.ndarray:
    """Box counts normalized to sum to 1; all zeros when no sample hits a box."""
    counts = mode_counts(samples, modes).astype(float)
    total = counts.sum()
    return counts / total if total > 0 else counts


def mode_probability_estimates(
    target: TargetDensity,
    modes: ModeSpec,
    rng: np.random.Generator | None = None,
    return_stderr: bool = False,
):
    """Relative ``p0`` mass of each box from uniform Monte Carlo points.

    A single shift (the largest log-density over all boxes) is used, which
    keeps cross-box ratios exact. With ``return_stderr`` also returns
    delta-method standard errors of the normalized proportions.
    """
    rng = np.random.default_rng() if rng is None else rng
    m, d = modes.centers.shape
    hw = modes.half_width
    points = modes.centers[:, None, :] + rng.uniform(-hw, hw, (m, modes.pdf_samples_per_mode, d))
    log_p = target.f_batch(points) - 0.5 * np.sum(points**2, axis=-1)
    dens = np.exp(log_p - log_p.max())
    means = dens.mean(axis=1)
    total = means.sum()
    props = means / total
    if not return_stderr:
        return props
    var_means = dens.var(axis=1, ddof=1) / modes.pdf_samples_per_mode
    jac = (np.eye(m) - props[:, None]) / total
    stderr = np.sqrt((jac**2) @ var_means)
    return props, stderr


def mode_report(samples, target: TargetDensity, modes: ModeSpec, rng=None) -> ModeReport:
    props, stderr = mode_probability_estimates(target, modes, rng, return_stderr=True)
    return ModeReport(
        sampled_proportions=mode_proportions(samples, modes),
        pdf_proportions=props,
        counts=mode_counts(samples, modes),
        pdf_stderr=stderr,
    )
