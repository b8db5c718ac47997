"""Quantization modes and the discrete Gaussian window likelihood.

The likelihood oracle is scipy's normal CDF evaluated independently at
float64; the implementation must match it to near machine precision.
"""

import numpy as np
import pytest
import torch
from scipy.stats import norm

from taskcodec.entropy import (
    LIKELIHOOD_FLOOR,
    SCALE_CEIL,
    SCALE_FLOOR,
    bits_from_likelihood,
    gaussian_window_likelihood,
    quantize,
    softplus_scale,
    ste_round,
)
from taskcodec.errors import ConfigurationError


class TestQuantize:
    def test_train_adds_supplied_noise_exactly(self):
        x = torch.randn(4, 4)
        noise = torch.full((4, 4), 0.25)
        assert torch.equal(quantize(x, "train", noise=noise), x + noise)

    def test_train_noise_is_bounded_uniform(self):
        gen = torch.Generator().manual_seed(0)
        x = torch.zeros(10000)
        noisy = quantize(x, "train", generator=gen)
        assert float(noisy.min()) >= -0.5 and float(noisy.max()) < 0.5
        assert abs(float(noisy.mean())) < 0.02  # mean of U[-.5,.5) is 0

    def test_eval_rounds(self):
        x = torch.tensor([0.4, 0.6, -1.2])
        assert torch.equal(quantize(x, "eval"), torch.round(x))

    def test_eval_mean_centered(self):
        x = torch.tensor([1.3])
        mean = torch.tensor([1.1])
        out = quantize(x, "eval", mean=mean)
        # offset rounds to integer, mean restored exactly
        assert torch.equal(out - mean, torch.round(x - mean))
        assert float(out) == pytest.approx(1.1)

    def test_unknown_mode_rejected(self):
        with pytest.raises(ConfigurationError):
            quantize(torch.zeros(1), "test")

    def test_eval_offsets_are_integers(self):
        # recovering the offset after the mean is added back costs one float32
        # rounding step, so the check is close-to-integer, not bitwise
        x = torch.randn(100)
        mean = torch.randn(100)
        out = quantize(x, "eval", mean=mean)
        offsets = out - mean
        assert torch.allclose(offsets, torch.round(offsets), atol=1e-5)


class TestSteRound:
    def test_forward_matches_eval_quantize(self):
        x = torch.randn(50)
        mean = torch.randn(50)
        assert torch.equal(ste_round(x, mean), quantize(x, "eval", mean=mean))

    def test_gradient_is_identity_on_values(self):
        x = torch.randn(10, requires_grad=True)
        ste_round(x).sum().backward()
        assert torch.equal(x.grad, torch.ones(10))

    def test_gradient_to_mean_is_zero(self):
        x = torch.randn(10, requires_grad=True)
        mean = torch.randn(10, requires_grad=True)
        ste_round(x, mean).sum().backward()
        assert torch.equal(x.grad, torch.ones(10))
        assert torch.equal(mean.grad, torch.zeros(10))


class TestWindowLikelihood:
    def test_matches_scipy_oracle(self):
        rng = np.random.default_rng(0)
        x = rng.normal(0, 3, 500)
        mu = rng.normal(0, 1, 500)
        sigma = rng.uniform(0.1, 5, 500)
        expected = norm.cdf((x - mu + 0.5) / sigma) - norm.cdf((x - mu - 0.5) / sigma)
        expected = np.clip(expected, LIKELIHOOD_FLOOR, 1.0)
        got = gaussian_window_likelihood(
            torch.tensor(x), torch.tensor(mu), torch.tensor(sigma)
        ).numpy()
        assert np.max(np.abs(got - expected)) < 1e-12

    def test_floor_value(self):
        assert LIKELIHOOD_FLOOR == 2.0 ** -16

    def test_far_tail_hits_floor_exactly(self):
        p = gaussian_window_likelihood(
            torch.tensor([1000.0]), torch.tensor([0.0]), torch.tensor([1.0])
        )
        assert float(p) == LIKELIHOOD_FLOOR

    def test_tiny_scale_caps_at_one(self):
        p = gaussian_window_likelihood(
            torch.tensor([0.0]), torch.tensor([0.0]), torch.tensor([1e-9])
        )
        assert float(p) == 1.0

    def test_symmetry(self):
        mu = torch.tensor([0.0])
        sigma = torch.tensor([2.0])
        left = gaussian_window_likelihood(torch.tensor([-3.0]), mu, sigma)
        right = gaussian_window_likelihood(torch.tensor([3.0]), mu, sigma)
        assert torch.allclose(left, right)

    def test_mass_sums_to_one_over_integers(self):
        # window masses over all integers partition the real line; the floor
        # inflates far-tail bins, so the bound allows one floor per element
        ks = torch.arange(-200.0, 201.0)
        p = gaussian_window_likelihood(ks, torch.tensor([0.3]), torch.tensor([4.0]))
        assert float(p.sum()) == pytest.approx(1.0, abs=len(ks) * LIKELIHOOD_FLOOR + 1e-6)
        assert float(p.sum()) >= 1.0 - 1e-6

    def test_monotone_in_distance_from_mean(self):
        sigma = torch.tensor([1.5])
        ps = [
            float(gaussian_window_likelihood(torch.tensor([d]), torch.tensor([0.0]), sigma))
            for d in (0.0, 1.0, 2.0, 4.0)
        ]
        assert ps == sorted(ps, reverse=True)


class TestBitsAndScale:
    def test_bits_definition(self):
        lk = torch.tensor([0.5, 0.25])
        assert float(bits_from_likelihood(lk)) == pytest.approx(1 + 2)

    def test_floored_element_costs_sixteen_bits(self):
        assert float(bits_from_likelihood(torch.tensor([LIKELIHOOD_FLOOR]))) == pytest.approx(16.0)

    def test_softplus_scale_positive(self):
        raw = torch.tensor([-100.0, 0.0, 30.0])
        s = softplus_scale(raw)
        assert torch.all(s >= SCALE_FLOOR)
        assert float(s[2]) == pytest.approx(30.0, rel=1e-6)

    def test_softplus_scale_capped(self):
        # an unbounded scale would let the rate model treat any magnitude as
        # nearly free; the emitter saturates instead of growing forever
        s = softplus_scale(torch.tensor([100.0, 1e6]))
        assert torch.all(s == SCALE_CEIL)
        assert float(softplus_scale(torch.tensor([0.0]))) < SCALE_CEIL
