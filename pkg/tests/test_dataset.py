import math

import numpy as np
import pytest

from richquery.dataset import (
    GroundTruth,
    fit_affine_score,
    fit_ground_truth,
    fit_gumbel,
    load_pool,
)
from richquery.errors import (
    DegenerateLabelsError,
    DimensionError,
    ParseError,
    RankDeficiencyError,
    ZeroVarianceError,
)
from richquery.synthetic import make_synthetic_task

from conftest import augmented_item
from richquery.dataset import ItemPool


def write_csv(path, rows, d=2, sample_cols=0):
    header = "id,display,score_mean,score_var," + ",".join(f"v{i+1}" for i in range(d))
    if sample_cols:
        header += "," + ",".join(f"s{i+1}" for i in range(sample_cols))
    path.write_text("\n".join([header] + rows) + "\n", encoding="utf-8")


class TestLoadPool:
    def test_three_four_five_normalization(self, tmp_path):
        p = tmp_path / "pool.csv"
        write_csv(p, ["a,alpha,0.7,0.1,3,4"])
        pool = load_pool(p)
        np.testing.assert_allclose(pool[0].x, [1.0, 0.6, 0.8])

    def test_empty_file_errors(self, tmp_path):
        p = tmp_path / "empty.csv"
        p.write_text("", encoding="utf-8")
        with pytest.raises(ParseError):
            load_pool(p)

    def test_header_only_errors(self, tmp_path):
        p = tmp_path / "header.csv"
        write_csv(p, [])
        with pytest.raises(ParseError):
            load_pool(p)

    def test_dimension_error_names_row(self, tmp_path):
        p = tmp_path / "bad.csv"
        rows = [f"i{k},w{k},0.1,0.0,1,0" for k in range(5)]
        rows[3] = "i3,w3,0.1,0.0,1"
        write_csv(p, rows)
        with pytest.raises(DimensionError, match="row 4"):
            load_pool(p)

    def test_malformed_row_named(self, tmp_path):
        p = tmp_path / "bad2.csv"
        write_csv(p, ["a,alpha,0.7,0.1,3,4", "b,beta,oops,0.1,1,2"])
        with pytest.raises(ParseError, match="row 2"):
            load_pool(p)

    def test_order_preserved_and_samples(self, tmp_path):
        p = tmp_path / "img.csv"
        write_csv(p, ["a,a.png,5.0,1.0,1,0,4,5,6", "b,b.png,6.0,1.0,0,1,7,8,9"], sample_cols=3)
        pool = load_pool(p, format="image-csv")
        assert [it.id for it in pool.items] == ["a", "b"]
        np.testing.assert_allclose(pool[0].score_samples, [4, 5, 6])

    def test_zero_vector_rejected(self, tmp_path):
        p = tmp_path / "zero.csv"
        write_csv(p, ["a,alpha,0.7,0.1,0,0"])
        with pytest.raises(ParseError):
            load_pool(p)

    def test_augmentation_norm_is_two(self, tmp_path):
        p = tmp_path / "norm.csv"
        write_csv(p, [f"i{k},w{k},0.1,0.0,{k + 1},{2 * k + 1}" for k in range(8)])
        pool = load_pool(p)
        for it in pool.items:
            assert it.x[0] == 1.0
            assert math.isclose(float(it.x @ it.x), 2.0, abs_tol=1e-9)


class TestFitGroundTruth:
    def test_separable_two_items(self):
        items = (
            augmented_item("a", [1.0, 0.2]),
            augmented_item("b", [-1.0, -0.3]),
        )
        pool = ItemPool(items=items)
        gt = fit_ground_truth(pool, [1, -1])
        signs = np.sign(pool.matrix() @ gt.theta)
        np.testing.assert_array_equal(signs, [1, -1])
        assert math.isclose(np.linalg.norm(gt.theta), 1.0, abs_tol=1e-9)

    def test_flip_symmetry(self):
        rng = np.random.default_rng(4)
        items = tuple(augmented_item(i, v) for i, v in enumerate(rng.standard_normal((12, 3))))
        pool = ItemPool(items=items)
        labels = [1 if i % 2 else -1 for i in range(12)]
        gt = fit_ground_truth(pool, labels)
        gt_flipped = fit_ground_truth(pool, [-y for y in labels])
        np.testing.assert_allclose(gt_flipped.theta, -gt.theta, atol=1e-6)

    def test_recovers_generator_direction(self):
        # 50 items labeled by a known classifier with 5% flips
        rng = np.random.default_rng(123)
        pool, gt_true = make_synthetic_task(n=50, raw_dim=3, seed=123)
        labels = np.where(pool.matrix() @ gt_true.theta >= 0, 1, -1)
        flips = rng.choice(50, size=2, replace=False)
        labels[flips] *= -1
        fitted = fit_ground_truth(pool, labels)
        cos = abs(float(fitted.theta @ gt_true.theta))
        assert math.degrees(math.acos(min(cos, 1.0))) < 15.0

    def test_single_class_errors(self):
        items = (augmented_item("a", [1.0, 0.0]), augmented_item("b", [0.0, 1.0]))
        with pytest.raises(DegenerateLabelsError):
            fit_ground_truth(ItemPool(items=items), [1, 1])

    def test_beats_random_unit_vectors(self):
        pool, gt_true = make_synthetic_task(n=80, raw_dim=4, seed=9)
        labels = np.where(pool.matrix() @ gt_true.theta >= 0, 1, -1)
        fitted = fit_ground_truth(pool, labels)
        X = pool.matrix()
        fit_loss = np.mean(np.sign(X @ fitted.theta) != labels)
        rng = np.random.default_rng(0)
        best_random = 1.0
        for _ in range(100):
            v = rng.standard_normal(pool.dim)
            v /= np.linalg.norm(v)
            best_random = min(best_random, float(np.mean(np.sign(X @ v) != labels)))
        assert fit_loss <= best_random


class TestFitAffineScore:
    def _pool(self, rng, n=40, scores=None):
        items = []
        vs = rng.standard_normal((n, 3))
        for i, v in enumerate(vs):
            items.append(augmented_item(i, v, score_mean=0.0))
        pool = ItemPool(items=tuple(items))
        return pool

    def test_noiseless_recovery(self):
        rng = np.random.default_rng(1)
        pool = self._pool(rng)
        theta = rng.standard_normal(pool.dim)
        theta /= np.linalg.norm(theta)
        gt = GroundTruth(theta=theta)
        z = pool.matrix() @ theta
        items = tuple(
            augmented_item(i, it.x[1:], score_mean=2.0 * z[i] + 0.5)
            for i, it in enumerate(pool.items)
        )
        fit = fit_affine_score(ItemPool(items=items), gt)
        assert math.isclose(fit.a, 2.0, abs_tol=1e-9)
        assert math.isclose(fit.b, 0.5, abs_tol=1e-9)
        np.testing.assert_allclose(fit.residuals, 0.0, atol=1e-9)
        assert math.isclose(fit.r_squared, 1.0, abs_tol=1e-9)

    def test_constant_scores(self):
        rng = np.random.default_rng(2)
        pool = self._pool(rng)
        theta = rng.standard_normal(pool.dim)
        theta /= np.linalg.norm(theta)
        items = tuple(
            augmented_item(i, it.x[1:], score_mean=3.25) for i, it in enumerate(pool.items)
        )
        fit = fit_affine_score(ItemPool(items=items), GroundTruth(theta=theta))
        assert math.isclose(fit.a, 0.0, abs_tol=1e-12)
        assert math.isclose(fit.b, 3.25, abs_tol=1e-12)

    def test_noisy_slope_recovery(self):
        rng = np.random.default_rng(77)
        n = 2000
        vs = rng.standard_normal((n, 3))
        theta = np.array([0.1, 0.7, -0.3, 0.64])
        theta /= np.linalg.norm(theta)
        items = []
        for i, v in enumerate(vs):
            it = augmented_item(i, v)
            noise = rng.gumbel(0.0, 0.2)
            items.append(
                augmented_item(i, v, score_mean=1.5 * float(it.x @ theta) - 1.0 + noise)
            )
        fit = fit_affine_score(ItemPool(items=tuple(items)), GroundTruth(theta=theta))
        assert abs(fit.a - 1.5) < 0.05

    def test_residuals_sum_to_zero(self):
        rng = np.random.default_rng(5)
        vs = rng.standard_normal((60, 3))
        theta = rng.standard_normal(4)
        theta /= np.linalg.norm(theta)
        items = tuple(
            augmented_item(i, v, score_mean=float(rng.normal())) for i, v in enumerate(vs)
        )
        fit = fit_affine_score(ItemPool(items=items), GroundTruth(theta=theta))
        assert abs(float(np.sum(fit.residuals))) < 1e-6 * len(items)

    def test_rank_deficiency(self):
        # identical embeddings give identical boundary distances
        items = tuple(
            augmented_item(i, [1.0, 1.0], score_mean=float(i)) for i in range(5)
        )
        # distinct ids, same vector: distances all equal
        theta = np.zeros(3)
        theta[1] = 1.0
        with pytest.raises(RankDeficiencyError):
            fit_affine_score(ItemPool(items=items), GroundTruth(theta=theta))


class TestFitGumbel:
    def test_true_samples_low_ks(self):
        rng = np.random.default_rng(42)
        x = rng.gumbel(0.0, 1.0, size=5000)
        fit = fit_gumbel(x, "max")
        assert fit.ks_statistic <= 0.05

    def test_translation_equivariance(self):
        rng = np.random.default_rng(8)
        x = rng.gumbel(1.0, 2.0, size=500)
        f0 = fit_gumbel(x, "max")
        f1 = fit_gumbel(x + 7.5, "max")
        assert math.isclose(f1.location, f0.location + 7.5, rel_tol=1e-9, abs_tol=1e-9)
        assert math.isclose(f1.scale, f0.scale, rel_tol=1e-9)

    def test_scale_equivariance(self):
        rng = np.random.default_rng(9)
        x = rng.gumbel(-0.5, 1.3, size=500)
        f0 = fit_gumbel(x, "max")
        f1 = fit_gumbel(4.0 * x, "max")
        assert abs(f1.scale - 4.0 * f0.scale) / (4.0 * f0.scale) < 1e-6

    def test_min_flavor(self):
        rng = np.random.default_rng(10)
        x = -rng.gumbel(-2.0, 0.8, size=5000)
        fit = fit_gumbel(x, "min")
        assert abs(fit.location - 2.0) < 0.1
        assert abs(fit.scale - 0.8) < 0.05
        assert fit.ks_statistic <= 0.05

    def test_too_few_residuals(self):
        with pytest.raises(ZeroVarianceError):
            fit_gumbel(np.arange(10.0), "max")

    def test_constant_residuals(self):
        with pytest.raises(ZeroVarianceError):
            fit_gumbel(np.full(50, 1.0), "max")

    def test_word_valence_corpus_if_present(self):
        # only runs when a word-valence corpus has been dropped into data/;
        # its max-flavored residual KS is expected near 0.095
        import pathlib

        path = pathlib.Path(__file__).resolve().parent.parent / "data" / "word_valence.csv"
        if not path.exists():
            pytest.skip("word-valence corpus not available")
        pool = load_pool(path)
        labels = [1 if (it.score_mean or 0.0) >= 0 else -1 for it in pool.items]
        gt = fit_ground_truth(pool, labels)
        affine = fit_affine_score(pool, gt)
        fit = fit_gumbel(affine.residuals, "max")
        assert abs(fit.ks_statistic - 0.095) <= 0.02
