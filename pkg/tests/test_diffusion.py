import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mcscore.diffusion import forward_sample, make_time, perturbation_points
from mcscore.exceptions import UsageError

LN2 = math.log(2.0)


def test_time_zero():
    time = make_time(0.0)
    assert (time.decay, time.sigma) == (1.0, 0.0)


def test_time_large():
    time = make_time(50.0)
    assert time.decay == pytest.approx(0.0, abs=1e-12)
    assert time.sigma == pytest.approx(1.0, abs=1e-12)


def test_time_ln2():
    time = make_time(LN2)
    assert time.decay == pytest.approx(0.5, abs=1e-15)
    assert time.sigma == pytest.approx(math.sqrt(0.75), abs=1e-15)


def test_sigma_accurate_at_small_t():
    # series: 1 - exp(-2t) = 2t - 2t^2 + 4t^3/3 - ...
    t = 1e-10
    assert make_time(t).sigma == pytest.approx(math.sqrt(2 * t - 2 * t * t), rel=1e-14)


@pytest.mark.parametrize("bad", [-1e-12, -3.0, math.inf, math.nan])
def test_invalid_times(bad):
    with pytest.raises(UsageError):
        make_time(bad)


def test_pythagorean_identity_vectorized():
    rng = np.random.default_rng(0)
    ts = rng.uniform(0, 100, size=10**6)
    decay = np.exp(-ts)
    sigma = np.sqrt(-np.expm1(-2 * ts))
    assert np.max(np.abs(decay**2 + sigma**2 - 1)) < 1e-12
    # and the scalar constructor agrees with the vectorized formulas
    for t in ts[:1000]:
        time = make_time(t)
        assert abs(time.decay**2 + time.sigma**2 - 1) < 1e-12


def test_forward_sample_examples():
    assert forward_sample([1.5, -2.0], make_time(0.0), [9.0, 9.0]).tolist() == [1.5, -2.0]
    np.testing.assert_allclose(forward_sample([123.0], make_time(50.0), [0.3]), [0.3], atol=1e-12)
    assert forward_sample([2.0], make_time(LN2), [1.0])[0] == pytest.approx(1 + math.sqrt(0.75), abs=1e-15)


def test_forward_sample_shape_mismatch():
    with pytest.raises(UsageError):
        forward_sample([1.0, 2.0], make_time(1.0), [1.0])


def test_forward_sample_moments():
    rng = np.random.default_rng(11)
    theta0 = np.array([2.0, -1.0])
    time = make_time(0.4)
    n = 10**5
    xs = forward_sample(np.broadcast_to(theta0, (n, 2)), time, rng.standard_normal((n, 2)))
    mean_se = time.sigma / math.sqrt(n)
    var_se = time.sigma**2 * math.sqrt(2 / (n - 1))
    assert np.all(np.abs(xs.mean(0) - time.decay * theta0) < 4 * mean_se)
    assert np.all(np.abs(xs.var(0, ddof=1) - time.sigma**2) < 4 * var_se)


def test_perturbation_points_examples():
    theta = np.array([3.0, -1.0])
    time = make_time(0.7)
    pts = perturbation_points(theta, time, np.zeros((5, 2)))
    np.testing.assert_array_equal(pts, np.broadcast_to(time.decay * theta, (5, 2)))

    draws = np.random.default_rng(1).standard_normal((4, 2))
    np.testing.assert_allclose(perturbation_points(np.zeros(2), make_time(50.0), draws), draws, atol=1e-12)

    assert perturbation_points([2.0], make_time(LN2), [[1.0]])[0, 0] == pytest.approx(1 + math.sqrt(0.75))


def test_perturbation_points_rejects_t_zero():
    with pytest.raises(UsageError):
        perturbation_points([0.0], make_time(0.0), [[1.0]])


@given(
    st.floats(1e-6, 30),
    st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=2),
    st.integers(1, 20),
)
def test_perturbation_points_equal_forward_samples(t, theta, K):
    time = make_time(t)
    draws = np.random.default_rng(K).standard_normal((K, 2))
    pts = perturbation_points(np.array(theta), time, draws)
    for k in range(K):
        assert np.array_equal(pts[k], forward_sample(theta, time, draws[k]))


def test_perturbation_points_batched_over_particles():
    rng = np.random.default_rng(3)
    thetas = rng.normal(size=(6, 2))
    draws = rng.normal(size=(6, 9, 2))
    time = make_time(0.25)
    batched = perturbation_points(thetas, time, draws)
    for i in range(6):
        assert np.array_equal(batched[i], perturbation_points(thetas[i], time, draws[i]))
