"""Latent perturbation probes: distortion rows, removal curves, scale sweeps."""

import numpy as np
import pytest
import torch

from taskcodec.codec import ImageCodec
from taskcodec.errors import ConfigurationError, FittingError
from taskcodec.grouping import GroupSpec
from taskcodec.probes import (
    accuracy_from_latent,
    curve_auc,
    decode_latents,
    distortion_probe,
    fit_quadratic,
    noise_unit,
    removal_curve,
    removal_study,
    sweep_axis,
    sweep_scale,
    zero_unit,
)
from taskcodec.tasknet import make_dataset, train_task_model

SPEC = GroupSpec((1, 1, 2, 4), (1.0, 1.0, 2.0, 4.0))


@pytest.fixture(scope="module")
def setup():
    torch.manual_seed(7)
    codec = ImageCodec(latent_channels=8, hidden=16, hyper_channels=8, group_spec=SPEC)
    codec.adapters.register_task("shape")
    codec.eval()
    task_model = train_task_model("shape", n_train=48, epochs=1, batch_size=16)
    images, labels = make_dataset("shape", 8, 21)
    return codec, task_model, images, labels


class TestUnitPerturbations:
    def test_zero_unit_touches_only_target(self):
        x = torch.rand(2, 6, 3, 3, generator=torch.Generator().manual_seed(0))
        out = zero_unit(x, slice(2, 4))
        assert torch.all(out[:, 2:4] == 0)
        assert torch.equal(out[:, :2], x[:, :2])
        assert torch.equal(out[:, 4:], x[:, 4:])
        assert not torch.all(x[:, 2:4] == 0)  # input untouched

    def test_noise_unit_bounded_and_seeded(self):
        x = torch.zeros(4, 6, 5, 5)
        a = noise_unit(x, slice(1, 3), 0.5, seed=9)
        b = noise_unit(x, slice(1, 3), 0.5, seed=9)
        c = noise_unit(x, slice(1, 3), 0.5, seed=10)
        assert torch.equal(a, b)
        assert not torch.equal(a, c)
        assert float(a[:, 1:3].abs().max()) <= 0.5
        assert torch.equal(a[:, 0], x[:, 0])
        assert torch.equal(a[:, 3:], x[:, 3:])


class TestSharedPlumbing:
    def test_decode_latents_shapes(self, setup):
        codec, _, images, _ = setup
        latents, mean_w = decode_latents(codec, images, "shape", batch=3)
        assert latents.shape == (8, 8, 4, 4)
        assert mean_w.shape == (8,)
        assert float(mean_w.min()) >= 0.0 and float(mean_w.max()) <= 1.0

    def test_decode_latents_batch_invariance(self, setup):
        codec, _, images, _ = setup
        a, wa = decode_latents(codec, images, "shape", batch=3)
        b, wb = decode_latents(codec, images, "shape", batch=8)
        assert torch.allclose(a, b, atol=1e-5)
        assert torch.allclose(wa, wb, atol=1e-6)

    def test_accuracy_from_latent_range(self, setup):
        codec, task_model, images, labels = setup
        latents, _ = decode_latents(codec, images, "shape")
        acc = accuracy_from_latent(codec, task_model, latents, labels, "shape")
        assert 0.0 <= acc <= 1.0


class TestDistortionProbe:
    def test_zero_mode_rows(self, setup):
        codec, task_model, images, labels = setup
        rows = distortion_probe(codec, task_model, images, labels, "shape")
        assert len(rows) == 8
        assert [r["unit"] for r in rows] == list(range(8))
        assert all(r["lo"] == r["unit"] and r["hi"] == r["unit"] + 1 for r in rows)
        assert len({r["baseline"] for r in rows}) == 1
        assert all(r["intensity"] == "" for r in rows)

    def test_grouped_units(self, setup):
        codec, task_model, images, labels = setup
        rows = distortion_probe(codec, task_model, images, labels, "shape", group_size=4)
        assert len(rows) == 2
        assert (rows[0]["lo"], rows[0]["hi"]) == (0, 4)
        assert (rows[1]["lo"], rows[1]["hi"]) == (4, 8)

    def test_noise_mode_records_intensity(self, setup):
        codec, task_model, images, labels = setup
        rows = distortion_probe(codec, task_model, images, labels, "shape",
                                mode="noise", intensity=0.5, seed=3)
        assert all(r["intensity"] == 0.5 for r in rows)

    def test_noise_mode_deterministic(self, setup):
        codec, task_model, images, labels = setup
        a = distortion_probe(codec, task_model, images, labels, "shape",
                             mode="noise", intensity=1.0, seed=3)
        b = distortion_probe(codec, task_model, images, labels, "shape",
                             mode="noise", intensity=1.0, seed=3)
        assert a == b

    def test_bad_group_size(self, setup):
        codec, task_model, images, labels = setup
        with pytest.raises(ConfigurationError, match="group size"):
            distortion_probe(codec, task_model, images, labels, "shape", group_size=3)

    def test_bad_mode(self, setup):
        codec, task_model, images, labels = setup
        with pytest.raises(ConfigurationError, match="mode"):
            distortion_probe(codec, task_model, images, labels, "shape", mode="blur")


class TestRemovalCurves:
    def test_curve_length_and_first_point(self, setup):
        codec, task_model, images, labels = setup
        latents, _ = decode_latents(codec, images, "shape")
        baseline = accuracy_from_latent(codec, task_model, latents, labels, "shape")
        rows = removal_curve(codec, task_model, images, labels, "shape",
                             np.arange(8), latents=latents)
        assert [r["k"] for r in rows] == list(range(9))
        assert rows[0]["accuracy"] == baseline

    def test_full_removal_is_order_independent(self, setup):
        codec, task_model, images, labels = setup
        latents, _ = decode_latents(codec, images, "shape")
        a = removal_curve(codec, task_model, images, labels, "shape",
                          np.arange(8), latents=latents)
        b = removal_curve(codec, task_model, images, labels, "shape",
                          np.arange(8)[::-1], latents=latents)
        assert a[-1]["accuracy"] == b[-1]["accuracy"]

    def test_invalid_order_rejected(self, setup):
        codec, task_model, images, labels = setup
        with pytest.raises(ConfigurationError, match="permutation"):
            removal_curve(codec, task_model, images, labels, "shape", np.zeros(8, dtype=int))

    def test_curve_auc_hand_value(self):
        rows = [{"k": 0, "accuracy": 1.0}, {"k": 1, "accuracy": 0.5}, {"k": 2, "accuracy": 0.0}]
        assert curve_auc(rows) == pytest.approx(1.0)

    def test_study_structure(self, setup):
        codec, task_model, images, labels = setup
        study = removal_study(codec, task_model, images, labels, "shape", seeds=(0, 1))
        assert sorted(study["order"]) == list(range(8))
        assert len(study["random_runs"]) == 2
        assert study["auc_importance"] == pytest.approx(curve_auc(study["importance"]))
        assert study["auc_random"] == pytest.approx(curve_auc(study["random"]))
        k3 = [run[3]["accuracy"] for run in study["random_runs"]]
        assert study["random"][3]["accuracy"] == pytest.approx(np.mean(k3))

    def test_study_deterministic(self, setup):
        codec, task_model, images, labels = setup
        a = removal_study(codec, task_model, images, labels, "shape", seeds=(0, 1))
        b = removal_study(codec, task_model, images, labels, "shape", seeds=(0, 1))
        assert a["auc_importance"] == b["auc_importance"]
        assert a["auc_random"] == b["auc_random"]
        assert a["order"] == b["order"]


class TestFitQuadratic:
    def test_exact_recovery(self):
        x = np.array([0.0, 0.5, 1.0, 2.0, 3.0])
        y = 2.0 * (x - 1.5) ** 2 + 3.0
        fit = fit_quadratic(x, y)
        assert fit.coeffs[0] == pytest.approx(2.0, rel=1e-9)
        assert fit.vertex == pytest.approx(1.5, rel=1e-9)
        assert fit.cc == pytest.approx(1.0, abs=1e-12)
        assert fit.rmse == pytest.approx(0.0, abs=1e-9)
        assert not fit.concave

    def test_concave_vertex_is_argmax(self):
        x = np.linspace(-1, 3, 7)
        y = -0.5 * (x - 0.8) ** 2 + 0.9
        fit = fit_quadratic(x, y)
        assert fit.concave
        assert fit.vertex == pytest.approx(0.8, rel=1e-9)

    def test_noisy_data_quality_metrics(self):
        rng = np.random.default_rng(0)
        x = np.linspace(0, 4, 20)
        y = (x - 2) ** 2 + rng.normal(0, 0.05, size=20)
        fit = fit_quadratic(x, y)
        assert fit.rmse > 0.0
        assert 0.9 < fit.cc < 1.0
        assert fit.vertex == pytest.approx(2.0, abs=0.2)

    def test_too_few_points(self):
        with pytest.raises(FittingError, match="at least 3"):
            fit_quadratic([1.0, 2.0], [1.0, 2.0])

    def test_too_few_distinct(self):
        with pytest.raises(FittingError, match="distinct"):
            fit_quadratic([1.0, 1.0, 1.0, 2.0], [1.0, 1.1, 0.9, 2.0])

    def test_shape_mismatch(self):
        with pytest.raises(FittingError):
            fit_quadratic([1.0, 2.0, 3.0], [1.0, 2.0])


class TestSweepAxis:
    def test_mid_group_uses_inverse_scale(self):
        axis = sweep_axis(SPEC, 2, [1.0, 2.0, 4.0])
        assert np.allclose(axis, [1.0, 0.5, 0.25])

    def test_tail_group_uses_log10(self):
        axis = sweep_axis(SPEC, 3, [1.0, 10.0, 100.0])
        assert np.allclose(axis, [0.0, 1.0, 2.0])

    def test_first_group_not_sweepable(self):
        with pytest.raises(ConfigurationError, match="group index"):
            sweep_axis(SPEC, 0, [1.0, 2.0, 3.0])
        with pytest.raises(ConfigurationError, match="group index"):
            sweep_axis(SPEC, 4, [1.0, 2.0, 3.0])

    def test_nonpositive_scales_rejected(self):
        with pytest.raises(ConfigurationError, match="positive"):
            sweep_axis(SPEC, 2, [1.0, -2.0, 3.0])


class TestSweepScale:
    def test_structure_and_fits(self, setup):
        codec, task_model, images, labels = setup
        out = sweep_scale(codec, task_model, images, labels, "shape",
                          group_index=2, grid=[1.5, 2.0, 3.0])
        assert len(out["accuracy_rows"]) == 3
        assert len(out["prior_rows"]) == 3 * SPEC.n_groups
        own = [r for r in out["prior_rows"] if r["group"] == 2]
        assert len(own) == 3
        assert set(out["fits"]) == {"prior_mse", "accuracy"}
        assert all(np.isfinite(r["bpp"]) and r["bpp"] > 0 for r in out["accuracy_rows"])
        xs = [r["x"] for r in out["accuracy_rows"]]
        assert np.allclose(xs, [1 / 1.5, 1 / 2.0, 1 / 3.0])

    def test_own_group_prior_varies(self, setup):
        codec, task_model, images, labels = setup
        out = sweep_scale(codec, task_model, images, labels, "shape",
                          group_index=3, grid=[2.0, 4.0, 8.0])
        own = [r["prior_mse"] for r in out["prior_rows"] if r["group"] == 3]
        assert len(set(own)) > 1

    def test_grid_validation(self, setup):
        codec, task_model, images, labels = setup
        with pytest.raises(FittingError, match="grid"):
            sweep_scale(codec, task_model, images, labels, "shape",
                        group_index=2, grid=[1.0, 2.0])

    def test_grid_outside_neighbour_scales_rejected(self, setup):
        codec, task_model, images, labels = setup
        # group 2 sits between scales 1.0 and 4.0; sweeping to 8 breaks the
        # non-decreasing layout and the GroupSpec validation must propagate
        with pytest.raises(ConfigurationError):
            sweep_scale(codec, task_model, images, labels, "shape",
                        group_index=2, grid=[2.0, 4.0, 8.0])

    def test_deterministic(self, setup):
        codec, task_model, images, labels = setup
        a = sweep_scale(codec, task_model, images, labels, "shape",
                        group_index=2, grid=[1.5, 2.0, 3.0])
        b = sweep_scale(codec, task_model, images, labels, "shape",
                        group_index=2, grid=[1.5, 2.0, 3.0])
        assert a["accuracy_rows"] == b["accuracy_rows"]
