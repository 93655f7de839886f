import numpy as np
import pytest

from conftest import sparse_problem
from hdls.core.datagen import gen_example
from hdls.core.errors import InvalidDimensions, SingularSystem, SupportTooLarge
from hdls.core.linalg import ols_refit
from hdls.core.pipeline import CvConfig, cv_ridge, default_r_grid, fold_indices, lat, rat
from hdls.core.rng import make_rng
from hdls.core.selection import BIC, EBIC, FixedSize, GaussianThreshold, SelectionRule


class TestLat:
    @pytest.mark.parametrize("seed", range(20))
    @pytest.mark.parametrize("which", ["i", "ii", "iii", "iv"])
    def test_noiseless_recovery(self, which, seed):
        """Without noise LAT returns exactly the true support and coefficients."""
        instance = gen_example(which, 200, 1000, seed=seed, sigma=0.0)
        result = lat(instance.x, instance.y)
        assert result.support.tolist() == instance.true_support.tolist()
        assert np.max(np.abs(result.coefficients.beta - instance.beta_true.beta)) <= 1e-6
        assert not result.null_model

    def test_noisy_recovery(self):
        instance = gen_example("i", 200, 1000, seed=0)
        result = lat(instance.x, instance.y)
        assert {0, 1, 2, 3, 4} <= set(result.support.tolist())
        assert result.stage1_submodel.size == 60
        assert set(result.support.tolist()) <= set(result.stage1_submodel.tolist())
        assert result.threshold_used > 0
        assert result.ridge_r is None

    def test_deterministic(self):
        instance = gen_example("ii", 100, 300, seed=3)
        first, second = lat(instance.x, instance.y), lat(instance.x, instance.y)
        np.testing.assert_array_equal(first.coefficients.beta, second.coefficients.beta)
        assert first.coefficients.intercept == second.coefficients.intercept

    def test_constant_response_gives_null_model(self, rng):
        x = rng.standard_normal((40, 100))
        result = lat(x, np.full(40, 5.0))
        assert result.null_model
        assert result.support.size == 0
        np.testing.assert_allclose(result.predict(x[:3]), 5.0)

    def test_constant_column_keeps_original_indexing(self):
        x, _, beta = sparse_problem(100, 300, [1, 2, 3], 2.0, seed=1)
        x[:, 0] = 4.0
        result = lat(x, x @ beta)
        assert result.support.tolist() == [1, 2, 3]
        assert result.coefficients.beta[0] == 0.0

    def test_intercept(self):
        x, y, beta = sparse_problem(100, 300, [5, 6], [1.5, -2.0], seed=2)
        result = lat(x, y + 7.0)
        assert result.coefficients.intercept == pytest.approx(7.0, abs=1e-8)
        np.testing.assert_allclose(result.coefficients.beta, beta, atol=1e-8)

    def test_ebic_stage1(self):
        x, y, _ = sparse_problem(100, 400, range(5), 3.0, seed=3)
        result = lat(x, y, SelectionRule(stage1=EBIC()))
        assert {0, 1, 2, 3, 4} <= set(result.stage1_submodel.tolist())
        assert result.support.tolist() == [0, 1, 2, 3, 4]

    def test_bic_stage2(self):
        x, y, _ = sparse_problem(100, 400, range(5), 3.0, seed=4)
        result = lat(x, y, SelectionRule(stage2=BIC()))
        assert result.support.tolist() == [0, 1, 2, 3, 4]
        assert result.threshold_used is None

    def test_gaussian_stage2(self):
        x, y, _ = sparse_problem(100, 400, range(5), 3.0, seed=5)
        result = lat(x, y, SelectionRule(stage2=GaussianThreshold(0.5, kappa=2.0)))
        assert result.support.tolist() == [0, 1, 2, 3, 4]

    def test_collinear_submodel_is_singular(self):
        x, _, beta = sparse_problem(100, 300, [0, 2, 3], 3.0, seed=6)
        x[:, 1] = x[:, 0]
        with pytest.raises(SingularSystem) as info:
            lat(x, x @ beta)
        assert info.value.stage == "stage 2"

    def test_d_must_be_below_n(self, rng):
        with pytest.raises(InvalidDimensions):
            lat(rng.standard_normal((20, 50)), rng.standard_normal(20), SelectionRule(FixedSize(20)))

    def test_stage3_refit_is_idempotent(self):
        """Refitting OLS on the selected columns reproduces the fit and changes nothing when repeated."""
        instance = gen_example("ii", 100, 300, seed=2)
        result = lat(instance.x, instance.y)
        x_centered = instance.x - instance.x.mean(axis=0)
        y_centered = instance.y - instance.y.mean()
        once, _, _ = ols_refit(x_centered, y_centered, result.support)
        twice, _, _ = ols_refit(x_centered, y_centered, once.support)
        np.testing.assert_array_equal(once.beta, twice.beta)
        np.testing.assert_allclose(once.beta, result.coefficients.beta, rtol=1e-8, atol=1e-12)

    def test_record(self):
        x, y, _ = sparse_problem(60, 100, [0, 1], 2.0, seed=7, noise=0.1)
        result = lat(x, y)
        names = [f"f{j}" for j in range(100)]
        record = result.to_record(names)
        assert record["method"] == "lat"
        assert record["features"] == [names[j] for j in record["support"]]
        assert len(record["coefficients"]) == len(record["support"])
        assert {"stage1", "stage2", "stage3"} <= set(record["timings_ms"])
        assert record["rule"]["stage1"]["kind"] == "FixedSize"


class TestRat:
    def test_noiseless_recovery_fixed_ridge(self):
        instance = gen_example("i", 200, 1000, seed=0, sigma=0.0)
        result = rat(instance.x, instance.y, r=1e-10)
        assert result.support.tolist() == [0, 1, 2, 3, 4]
        assert np.max(np.abs(result.coefficients.beta - instance.beta_true.beta)) <= 1e-6
        assert result.ridge_r == 1e-10
        assert result.cv_curve is None

    def test_cross_validated_ridge(self):
        instance = gen_example("i", 200, 1000, seed=0)
        result = rat(instance.x, instance.y)
        grid = default_r_grid(200)
        assert result.ridge_r in grid.tolist()
        assert [r for r, _ in result.cv_curve] == grid.tolist()
        assert {0, 1, 2, 3, 4} <= set(result.support.tolist())
        assert "cv" in result.timings

    def test_collinear_columns_are_fit(self):
        """The ridge refit keeps exact duplicates that break the OLS refit."""
        x, _, beta = sparse_problem(100, 300, [0, 2, 3], 3.0, seed=6)
        x[:, 1] = x[:, 0]
        result = rat(x, x @ beta, r=1.0)
        assert {0, 1} <= set(result.support.tolist())
        assert result.coefficients.beta[0] == pytest.approx(result.coefficients.beta[1])

    def test_cv_seed_changes_only_fold_assignment(self):
        instance = gen_example("ii", 100, 300, seed=1)
        a = rat(instance.x, instance.y, cv=CvConfig(folds=5, seed=1))
        b = rat(instance.x, instance.y, cv=CvConfig(folds=5, seed=1))
        assert a.ridge_r == b.ridge_r
        np.testing.assert_array_equal(a.coefficients.beta, b.coefficients.beta)

    @pytest.mark.parametrize("r", [0.0, -1.0])
    def test_ridge_must_be_positive(self, rng, r):
        with pytest.raises(ValueError):
            rat(rng.standard_normal((20, 50)), rng.standard_normal(20), r=r)

    def test_ridge_and_cv_exclusive(self, rng):
        with pytest.raises(ValueError):
            rat(rng.standard_normal((20, 50)), rng.standard_normal(20), r=1.0, cv=CvConfig())


FITTERS = {"lat": lat, "rat": rat}


class TestSelectionInvariance:
    @pytest.mark.parametrize("seed", range(10))
    @pytest.mark.parametrize("which", ["i", "ii", "iii", "iv"])
    @pytest.mark.parametrize("method", ["lat", "rat"])
    def test_response_scaling(self, method, which, seed):
        instance = gen_example(which, 100, 300, seed=seed)
        fit = FITTERS[method]
        base = fit(instance.x, instance.y)
        scaled = fit(instance.x, 3.0 * instance.y)
        assert scaled.support.tolist() == base.support.tolist()

    @pytest.mark.parametrize("seed", range(10))
    @pytest.mark.parametrize("which", ["i", "ii", "iii", "iv"])
    @pytest.mark.parametrize("method", ["lat", "rat"])
    def test_column_permutation(self, method, which, seed):
        instance = gen_example(which, 100, 300, seed=seed)
        perm = make_rng(seed, 1).permutation(300)
        fit = FITTERS[method]
        base = fit(instance.x, instance.y)
        permuted = fit(instance.x[:, perm], instance.y)
        assert sorted(perm[permuted.support].tolist()) == base.support.tolist()


class TestCrossValidation:
    def test_default_grid(self):
        grid = default_r_grid(100)
        assert grid.size == 20
        assert grid[0] == pytest.approx(1e-2)
        assert grid[-1] == pytest.approx(1e3)
        assert np.all(np.diff(grid) > 0)

    def test_folds_partition_rows(self):
        folds = fold_indices(23, 5, seed=0)
        assert len(folds) == 5
        assert sorted(np.concatenate(folds).tolist()) == list(range(23))
        assert {fold.size for fold in folds} == {4, 5}

    def test_leave_one_out_matches_brute_force(self):
        gen = make_rng(30)
        x = gen.standard_normal((30, 5))
        y = x @ np.array([1.0, 0.0, -1.0, 0.5, 0.0]) + 0.3 * gen.standard_normal(30)
        grid = (0.1, 1.0, 10.0)
        _, curve = cv_ridge(x, y, CvConfig(folds=30, r_grid=grid))
        for r, score in curve:
            errors = []
            for i in range(30):
                mask = np.arange(30) != i
                beta = np.linalg.solve(x[mask].T @ x[mask] + r * np.eye(5), x[mask].T @ y[mask])
                errors.append(abs(y[i] - x[i] @ beta))
            assert score == pytest.approx(np.mean(errors), rel=1e-10)

    def test_ties_go_to_larger_ridge(self, rng):
        best, curve = cv_ridge(rng.standard_normal((20, 3)), np.zeros(20), CvConfig(folds=5, r_grid=(1.0, 2.0, 3.0)))
        assert best == 3.0
        assert all(score == 0.0 for _, score in curve)

    def test_noiseless_response_picks_smallest_ridge(self):
        x, y, _ = sparse_problem(100, 10, range(10), 1.0, seed=32)
        best, _ = cv_ridge(x, y, CvConfig())
        assert best == default_r_grid(100)[0]

    def test_near_duplicate_columns_prefer_shrinkage(self):
        """Grouped near-duplicate columns with noise favour a ridge above the smallest grid value."""
        larger = 0
        for seed in range(20):
            instance = gen_example("iii", 100, 15, seed=seed)
            best, _ = cv_ridge(instance.x, instance.y, CvConfig(seed=seed))
            larger += best > default_r_grid(100)[0]
        assert larger >= 11

    def test_jobs_do_not_change_scores(self):
        x, y, _ = sparse_problem(50, 8, [0, 1], 1.0, seed=31, noise=0.5)
        _, serial = cv_ridge(x, y, CvConfig(folds=5, n_jobs=1))
        _, threaded = cv_ridge(x, y, CvConfig(folds=5, n_jobs=2))
        assert serial == threaded

    def test_too_many_columns(self, rng):
        with pytest.raises(SupportTooLarge):
            cv_ridge(rng.standard_normal((20, 18)), rng.standard_normal(20), CvConfig(folds=10))

    @pytest.mark.parametrize(
        "kwargs", [{"folds": 1}, {"r_grid": ()}, {"r_grid": (1.0, 1.0)}, {"r_grid": (-1.0, 2.0)}, {"scoring": "mae"}]
    )
    def test_invalid_config(self, kwargs):
        with pytest.raises(ValueError):
            CvConfig(**kwargs)
