"""
Tests for the reconstruction loss, KL divergence, and beta-weighted total.
"""

import numpy as np
import pytest

from nlvae.core.exceptions import ConfigurationError, ShapeError
from nlvae.engine.tensor import Tensor, precision
from nlvae.models.config import TrainConfig
from nlvae.services.network import LatentDistribution
from nlvae.services.objective import beta_for_scale, kl_loss, reconstruction_loss, resolve_beta, total_loss


def _dist(mu, log_var) -> LatentDistribution:
    return LatentDistribution(mu=Tensor(mu, dtype=np.float64), log_var=Tensor(log_var, dtype=np.float64))


class TestReconstructionLoss:
    """Test cases for reconstruction_loss."""

    def setup_method(self):
        self.rng = np.random.default_rng(0)

    def test_identical_is_zero(self):
        x = Tensor(self.rng.uniform(size=(2, 4, 4, 3)))
        assert reconstruction_loss(x, x).item() == 0.0

    def test_arithmetic(self):
        loss = reconstruction_loss(Tensor([[0.0, 1.0]]), Tensor([[1.0, 1.0]]))
        assert loss.item() == pytest.approx(1.0)

    def test_matches_two_loop_reference(self):
        with precision("f64"):
            pred = self.rng.uniform(size=(2, 8, 8, 3))
            target = self.rng.uniform(size=(2, 8, 8, 3))
            value = reconstruction_loss(Tensor(pred), Tensor(target)).item()
        total = 0.0
        for i in range(pred.shape[0]):
            for j in range(pred[i].size):
                total += (pred[i].flat[j] - target[i].flat[j]) ** 2
        assert value == pytest.approx(total / pred.shape[0], abs=1e-6)

    def test_l1(self):
        loss = reconstruction_loss(Tensor([[0.0, 0.5]]), Tensor([[1.0, 1.0]]), kind="l1")
        assert loss.item() == pytest.approx(1.5)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            reconstruction_loss(Tensor(np.zeros((1, 4))), Tensor(np.zeros((1, 5))))

    def test_unknown_kind(self):
        with pytest.raises(ConfigurationError):
            reconstruction_loss(Tensor(np.zeros((1, 4))), Tensor(np.zeros((1, 4))), kind="huber")


class TestKlLoss:
    """Test cases for kl_loss."""

    def setup_method(self):
        self.rng = np.random.default_rng(1)

    def test_prior_posterior_is_zero(self):
        assert kl_loss(_dist(np.zeros(6), np.zeros(6))).item() == 0.0

    def test_closed_form_example(self):
        assert kl_loss(_dist([1.0], [0.0])).item() == pytest.approx(0.5)

    def test_matches_monte_carlo(self):
        samples = 1_000_000
        for _ in range(10):
            mu = self.rng.uniform(0.5, 1.5, size=4) * self.rng.choice([-1.0, 1.0], size=4)
            log_var = self.rng.uniform(-1.0, 1.0, size=4)
            sigma = np.exp(0.5 * log_var)
            z = mu + sigma * self.rng.standard_normal((samples, 4))
            log_q = -0.5 * (((z - mu) / sigma) ** 2 + log_var)
            log_p = -0.5 * z ** 2
            estimate = float(np.mean(np.sum(log_q - log_p, axis=1)))
            closed = kl_loss(_dist(mu, log_var)).item()
            assert closed == pytest.approx(estimate, rel=0.01)

    def test_non_negative(self):
        mu = self.rng.normal(scale=3.0, size=(10_000, 3))
        log_var = self.rng.uniform(-10.0, 10.0, size=(10_000, 3))
        per_draw = -0.5 * np.sum(1.0 + log_var - mu ** 2 - np.exp(log_var), axis=1)
        assert np.all(per_draw >= 0.0)
        for i in range(0, 10_000, 50):
            assert kl_loss(_dist(mu[i], log_var[i])).item() >= 0.0

    def test_zero_only_at_prior(self):
        assert kl_loss(_dist([1e-3, 0.0], [0.0, 0.0])).item() > 0.0
        assert kl_loss(_dist([0.0, 0.0], [0.0, 1e-3])).item() > 0.0

    def test_batch_average(self):
        single = kl_loss(_dist([[0.5, -0.2]], [[0.3, 0.1]])).item()
        doubled = kl_loss(_dist([[0.5, -0.2], [0.5, -0.2]], [[0.3, 0.1], [0.3, 0.1]])).item()
        assert doubled == pytest.approx(single, rel=1e-12)

    def test_printed_form(self):
        dist = _dist([0.7, -0.4], [0.2, -0.3])
        assert kl_loss(dist, "printed").item() == pytest.approx(-2.0 * kl_loss(dist).item(), rel=1e-12)

    def test_unknown_form(self):
        with pytest.raises(ConfigurationError):
            kl_loss(_dist([0.0], [0.0]), "reverse")


class TestTotalLoss:
    """Test cases for total_loss and beta resolution."""

    def test_arithmetic(self):
        _, breakdown = total_loss(2.0, 0.5, beta=150.0, alpha=0.0)
        assert breakdown.total == 77.0

    def test_classic_vae(self):
        total, breakdown = total_loss(1.25, 0.5, beta=1.0)
        assert breakdown.total == pytest.approx(1.75)
        assert total.item() == pytest.approx(1.75)

    def test_breakdown_identity(self):
        _, breakdown = total_loss(0.3, 0.07, beta=200.0, alpha=2.5)
        assert breakdown.total == breakdown.l_r + breakdown.beta * breakdown.l_kl + breakdown.alpha

    def test_negative_beta(self):
        with pytest.raises(ConfigurationError):
            total_loss(1.0, 1.0, beta=-1.0)

    def test_monotone_in_kl(self):
        totals = [total_loss(1.0, kl, beta=0.5)[1].total for kl in (0.0, 0.1, 0.2, 1.0)]
        assert totals == sorted(totals) and len(set(totals)) == 4

    def test_alpha_does_not_change_gradients(self):
        rng = np.random.default_rng(2)
        with precision("f64"):
            w = Tensor(rng.normal(size=(3, 2)), requires_grad=True)
            x = Tensor(rng.normal(size=(4, 3)))
            y = Tensor(rng.normal(size=(4, 2)))
            grads = []
            for alpha in (0.0, 10.0):
                w.zero_grad()
                diff = x @ w - y
                total, _ = total_loss((diff * diff).sum(), (w * w).sum(), beta=3.0, alpha=alpha)
                total.backward()
                grads.append(w.grad.copy())
        assert np.array_equal(grads[0], grads[1])

    @pytest.mark.parametrize("scale,beta", [(3, 150.0), (4, 200.0), (8, 300.0)])
    def test_beta_for_scale(self, scale, beta):
        assert beta_for_scale(scale) == beta

    def test_beta_override(self):
        assert beta_for_scale(5, override=250.0) == 250.0

    def test_beta_unknown_scale(self):
        with pytest.raises(ConfigurationError):
            beta_for_scale(5)

    def test_resolve_beta_order(self):
        assert resolve_beta(TrainConfig(scale=3)).beta == 150.0
        assert resolve_beta(TrainConfig(scale=3, beta_policy="global")).beta == 500.0
        assert resolve_beta(TrainConfig(scale=3, beta=500.0)).beta == 500.0
        assert resolve_beta(TrainConfig(scale=6, beta_policy="global")).beta == 500.0

    @pytest.mark.parametrize("scale", [2, 5])
    def test_resolve_beta_falls_back_to_global(self, scale):
        assert resolve_beta(TrainConfig(scale=scale)).beta == 500.0

    def test_explicit_beta_beats_global_fallback(self):
        assert resolve_beta(TrainConfig(scale=2, beta=1.0)).beta == 1.0
