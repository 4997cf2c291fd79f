"""Synthetic localization benchmark and the brute-force oracle."""

import numpy as np
import pytest

from dissim import (
    ConfigError,
    InputError,
    ModelParams,
    OverlapLoss,
    TaskSpec,
    ZeroOneLoss,
    dissimilarity_objective,
    evaluate,
    generate,
    oracle_objective,
    score_table,
    template_model,
    upper_bound,
)
from helpers import make_dataset


SMALL = TaskSpec(num_classes=3, per_class=4, noise=0.0, clutter=0.0, seed=1)


class TestTaskSpec:
    def test_defaults(self):
        spec = TaskSpec()
        assert (spec.num_classes, spec.per_class, spec.grid) == (6, 45, 8)
        assert (spec.boxes, spec.box_cells, spec.feature_dim) == (16, 5, 8)
        assert (spec.clutter, spec.noise) == (0.3, 0.5)

    def test_stride_is_integral(self):
        assert TaskSpec().stride == 1
        with pytest.raises(ConfigError):
            TaskSpec(grid=9, boxes=16, box_cells=5)

    def test_boxes_must_be_square_count(self):
        with pytest.raises(ConfigError):
            TaskSpec(boxes=15)

    def test_feature_dim_floor(self):
        with pytest.raises(ConfigError):
            TaskSpec(num_classes=8, feature_dim=8)

    def test_rate_validation(self):
        with pytest.raises(ConfigError):
            TaskSpec(clutter=1.5)
        with pytest.raises(ConfigError):
            TaskSpec(noise=-0.1)

    def test_candidate_boxes_cover_grid(self):
        boxes = TaskSpec().candidate_boxes()
        assert len(boxes) == 16
        assert boxes[0] == (0, 0, 5, 5)
        assert boxes[-1] == (3, 3, 8, 8)
        for x0, y0, x1, y1 in boxes:
            assert x1 - x0 == 5 and y1 - y0 == 5
            assert 0 <= x0 and x1 <= 8 and 0 <= y0 and y1 <= 8


class TestGenerate:
    def test_shapes_and_geometry(self):
        dset, truth = generate(SMALL)
        assert len(dset) == 12
        assert dset.num_labels == 3
        assert dset.geometric
        for s in dset:
            assert s.psi.shape == (3, 16, 3 * 8)
            assert s.phi.shape == (16, 8)
            assert s.truth_latent is not None
            assert truth[s.id] == s.truth_latent

    def test_bit_identical_regeneration(self):
        a, _ = generate(SMALL)
        b, _ = generate(SMALL)
        for sa, sb in zip(a, b):
            assert sa.id == sb.id
            np.testing.assert_array_equal(sa.psi, sb.psi)
            np.testing.assert_array_equal(sa.phi, sb.phi)
            assert sa.truth_latent == sb.truth_latent

    def test_seed_changes_data(self):
        a, _ = generate(SMALL)
        b, _ = generate(TaskSpec(num_classes=3, per_class=4, noise=0.0,
                                 clutter=0.0, seed=2))
        assert not np.array_equal(a.samples[0].phi, b.samples[0].phi)

    def test_clutter_rate_preserves_planted_features(self):
        lo, _ = generate(TaskSpec(num_classes=3, per_class=4, clutter=0.1,
                                  seed=3))
        hi, _ = generate(TaskSpec(num_classes=3, per_class=4, clutter=0.6,
                                  seed=3))
        changed = 0
        for sa, sb in zip(lo, hi):
            assert sa.truth_latent == sb.truth_latent
            np.testing.assert_array_equal(
                sa.phi[sa.truth_latent], sb.phi[sb.truth_latent]
            )
            changed += int(not np.array_equal(sa.phi, sb.phi))
        assert changed > 0

    def test_labels_balanced(self):
        dset, _ = generate(SMALL)
        counts = np.bincount([s.truth_label for s in dset], minlength=3)
        np.testing.assert_array_equal(counts, [4, 4, 4])


class TestTemplateModel:
    def test_perfect_on_clean_data(self):
        dset, _ = generate(SMALL)
        params = template_model(SMALL)
        assert evaluate(params, dset, ZeroOneLoss()) == 0.0
        assert evaluate(params, dset, OverlapLoss()) == 0.0

    def test_truth_scores_strictly_maximal(self):
        dset, _ = generate(SMALL)
        params = template_model(SMALL)
        for s in dset:
            table = score_table(params.w, s)
            best = table[s.truth_label, s.truth_latent]
            table_flat = table.ravel().copy()
            table_flat[s.truth_label * 16 + s.truth_latent] = -np.inf
            assert best > table_flat.max()


class TestOracle:
    @pytest.mark.parametrize("seed", range(5))
    def test_agrees_with_fast_objective(self, seed):
        dset = make_dataset(800 + seed, n=3, num_labels=2, num_latents=4,
                            d_w=4, d_theta=3)
        rng = np.random.default_rng(seed)
        w = rng.standard_normal(4)
        theta = rng.standard_normal(3)
        fast = dissimilarity_objective(w, theta, dset, ZeroOneLoss(), 0.1)
        slow = oracle_objective(w, theta, dset, ZeroOneLoss(), 0.1)
        assert slow == pytest.approx(fast, abs=1e-12)

    def test_zero_on_perfect_agreement(self):
        dset, _ = generate(SMALL)
        params = template_model(SMALL)
        # the conditional is uniform but the loss at the predicted pair is
        # measured against truth; plant theta mass on the truth box instead
        from dissim import Dataset, SampleRecord

        planted = []
        for s in dset:
            phi = np.zeros_like(np.asarray(s.phi))
            phi[s.truth_latent] = 50.0 * np.ones(s.phi.shape[1])
            planted.append(SampleRecord(
                id=s.id, truth_label=s.truth_label,
                latent_space=s.latent_space, psi=s.psi, phi=phi,
                truth_latent=s.truth_latent,
            ))
        dset2 = Dataset(dset.num_labels, dset.d_w, dset.d_theta,
                        tuple(planted))
        theta = np.ones(dset.d_theta)
        v = oracle_objective(params.w, theta, dset2, ZeroOneLoss(), 0.1)
        assert v == pytest.approx(0.0, abs=1e-9)

    def test_size_limit(self):
        spec = TaskSpec(num_classes=6, per_class=109)
        dset, _ = generate(spec)
        with pytest.raises(InputError):
            oracle_objective(np.zeros(dset.d_w), np.zeros(dset.d_theta),
                             dset, ZeroOneLoss(), 0.1)

    def test_bound_still_dominates_on_synthetic_data(self):
        dset, _ = generate(SMALL)
        rng = np.random.default_rng(9)
        w = rng.standard_normal(dset.d_w)
        theta = rng.standard_normal(dset.d_theta)
        loss = OverlapLoss()
        assert upper_bound(w, theta, dset, loss, 0.1) >= (
            dissimilarity_objective(w, theta, dset, loss, 0.1) - 1e-12
        )
