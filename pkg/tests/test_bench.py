import math

import numpy as np
import pandas as pd
import pytest

from hdls.core.bench import (
    BenchConfig,
    MethodSpec,
    default_methods,
    run_bench,
    run_kfold_prediction,
)
from hdls.core.datagen import gen_example
from hdls.core.errors import InvalidDimensions
from hdls.core.linalg import ols_refit
from hdls.core.pipeline import fold_indices
from hdls.core.records import RecordFile
from hdls.core.rng import make_rng
from hdls.core.selection import FixedSize, SelectionRule
from hdls.core.table import IngestionSpec, ingest


def large_config(example: str, methods) -> BenchConfig:
    return BenchConfig(example=example, n=500, p=10000, replicates=100, methods=methods, n_jobs=-1)


def oracle_rmse(example: str, n: int, p: int, replicates: int) -> float:
    """Mean coefficient error of OLS (with intercept) on the true support, same seeds as run_bench."""
    errors = []
    for seed in range(replicates):
        instance = gen_example(example, n, p, seed=seed)
        support = instance.true_support
        x = instance.x[:, support] - instance.x[:, support].mean(axis=0)
        coef, _, _ = ols_refit(x, instance.y - instance.y.mean(), range(support.size))
        errors.append(np.linalg.norm(coef.beta - instance.beta_true.beta[support]))
    return float(np.mean(errors))


def small_config(**kwargs) -> BenchConfig:
    options = dict(example="i", n=60, p=100, replicates=3, methods=default_methods(["lat", "rat"]))
    options.update(kwargs)
    return BenchConfig(**options)


class TestRunBench:
    def test_rows_and_summary(self):
        report = run_bench(small_config())
        assert len(report.rows) == 6
        assert report.rows["seed"].tolist() == [0, 0, 1, 1, 2, 2]
        assert report.rows["error"].isna().all()
        assert report.summary["method"].tolist() == ["lat", "rat"]
        assert report.summary["fits"].tolist() == [3, 3]
        assert report.summary["failures"].tolist() == [0, 0]
        assert (report.rows["rmse"] >= 0).all()
        assert (report.rows["fn"] <= 5).all()
        assert (report.rows["fp"] <= report.rows["support_size"]).all()

    def test_methods_share_each_replicate(self):
        report = run_bench(small_config())
        checksums = report.rows.groupby("replicate")["checksum"].nunique()
        assert (checksums == 1).all()
        assert report.rows["checksum"].nunique() == 3

    def test_rows_do_not_depend_on_jobs(self):
        columns = ["replicate", "method", "rmse", "fp", "fn", "checksum"]
        serial = run_bench(small_config(n_jobs=1)).rows[columns]
        parallel = run_bench(small_config(n_jobs=2)).rows[columns]
        pd.testing.assert_frame_equal(serial, parallel)

    def test_failed_fits_are_kept(self):
        bad = MethodSpec("too-wide", "lat", SelectionRule(FixedSize(70)))
        report = run_bench(small_config(methods=(bad,) + default_methods(["lat"])))
        failed = report.rows[report.rows["method"] == "too-wide"]
        assert failed["error"].notna().all()
        summary = report.summary.set_index("method")
        assert summary.loc["too-wide", "failures"] == 3
        assert summary.loc["too-wide", "fits"] == 0
        assert math.isnan(summary.loc["too-wide", "rmse_mean"])
        assert summary.loc["lat", "fits"] == 3

    def test_report_files(self, output_dir):
        path = output_dir / "bench.jsonl"
        report = run_bench(small_config(output_path=path))
        records = RecordFile(path).read_records()
        assert records[0]["kind"] == "config"
        assert "Philox" in records[0]["fingerprint"]
        assert [r["kind"] for r in records[1:]] == ["row"] * 6 + ["summary"] * 2
        table = path.with_suffix(".txt").read_text(encoding="utf-8")
        assert "RMSE" in table and "#FNs" in table
        assert table.strip() == report.table().strip()

    @pytest.mark.parametrize(
        "kwargs, error",
        [
            ({"example": "v"}, InvalidDimensions),
            ({"replicates": 0}, ValueError),
            ({"methods": default_methods(["lat", "lat"])}, ValueError),
            ({"methods": ()}, ValueError),
        ],
    )
    def test_invalid_config(self, kwargs, error):
        with pytest.raises(error):
            small_config(**kwargs)

    def test_single_replicate(self):
        """One replicate leaves the sds undefined (NaN) and the means equal to the single row."""
        report = run_bench(small_config(replicates=1))
        summary = report.summary.set_index("method")
        rows = report.rows.set_index("method")
        for name in ("lat", "rat"):
            assert math.isnan(summary.loc[name, "rmse_std"])
            assert math.isnan(summary.loc[name, "fn_std"])
            assert summary.loc[name, "rmse_mean"] == rows.loc[name, "rmse"]
            assert summary.loc[name, "fp_mean"] == rows.loc[name, "fp"]

    def test_unknown_algorithm(self):
        with pytest.raises(ValueError):
            MethodSpec("lasso", "lasso")

    @pytest.mark.slow
    @pytest.mark.parametrize("n, p", [(200, 1000), (500, 10000)])
    def test_group_structure_separates_lat_and_rat(self, n, p):
        """Near-duplicate groups make LAT drop true columns while RAT keeps them."""
        report = run_bench(
            BenchConfig(example="iii", n=n, p=p, replicates=10, methods=default_methods(["lat", "rat"]), n_jobs=-1)
        )
        summary = report.summary.set_index("method")
        assert summary.loc["lat", "fn_mean"] >= 3
        assert summary.loc["rat", "fn_mean"] <= 0.5
        assert summary.loc["rat", "rmse_mean"] <= 2.5

    @pytest.mark.slow
    def test_independent_design_lat(self):
        report = run_bench(large_config("i", default_methods(["lat"], SelectionRule(FixedSize(150)))))
        lat_summary = report.summary.set_index("method").loc["lat"]
        assert lat_summary["fits"] == 100
        assert 0.13 <= lat_summary["rmse_mean"] <= 0.53
        assert lat_summary["fp_mean"] <= 2
        assert lat_summary["fn_mean"] <= 0.1

    @pytest.mark.slow
    def test_equicorrelated_design_near_oracle(self):
        """LAT and RAT keep the true columns and stay within 1.5x of OLS on the true support."""
        report = run_bench(large_config("ii", default_methods(["lat", "rat"])))
        summary = report.summary.set_index("method")
        oracle = oracle_rmse("ii", 500, 10000, 100)
        for name in ("lat", "rat"):
            assert summary.loc[name, "fn_mean"] <= 0.1
            assert 0.10 <= summary.loc[name, "rmse_mean"] <= 1.5 * oracle

    @pytest.mark.slow
    def test_factor_design_rat(self):
        report = run_bench(large_config("iv", default_methods(["rat"])))
        rat_summary = report.summary.set_index("method").loc["rat"]
        assert 0.08 <= rat_summary["rmse_mean"] <= 0.35
        assert rat_summary["fp_mean"] <= 3


class TestKFoldPrediction:
    def test_noiseless_linear_response(self):
        gen = make_rng(40)
        x = gen.standard_normal((100, 50))
        y = x[:, :3] @ np.array([1.0, 2.0, 3.0])
        methods = (MethodSpec("lat", "lat"), MethodSpec("rat", "rat", ridge=1e-10))
        report = run_kfold_prediction(x, y, methods, folds=10, seed=0)
        fitted = report.rows[report.rows["method"] != "null"]
        assert (fitted["error"] <= 1e-6).all()
        assert (fitted["model_size"] >= 3).all()
        summary = report.summary.set_index("method")
        assert summary.index.tolist() == ["lat", "rat", "null"]
        assert summary.loc["null", "mean_error"] >= summary["mean_error"].min()

    def test_null_model_matches_brute_force(self):
        gen = make_rng(41)
        x = gen.standard_normal((57, 20))
        y = gen.standard_normal(57) * 2.0 + 3.0
        report = run_kfold_prediction(x, y, default_methods(["lat"]), folds=6, seed=5)
        null_rows = report.rows[report.rows["method"] == "null"]
        for k, test in enumerate(fold_indices(57, 6, 5)):
            train = np.setdiff1d(np.arange(57), test)
            expected = math.sqrt(np.mean((y[test] - y[train].mean()) ** 2))
            assert null_rows["error"].iloc[k] == pytest.approx(expected, abs=1e-12)
        summary = report.summary.set_index("method")
        assert summary.loc["null", "standard_error"] == pytest.approx(null_rows["error"].std() / math.sqrt(6))

    def test_reserved_name(self, rng):
        with pytest.raises(ValueError):
            run_kfold_prediction(rng.standard_normal((20, 5)), rng.standard_normal(20), (MethodSpec("null"),))

    def test_survey_table_with_interactions(self, output_dir):
        """A 395-row survey-like table expanded with pairwise interactions."""
        gen = make_rng(42)
        n = 395
        frame = pd.DataFrame({f"q{j}": gen.integers(0, 5, n) for j in range(36)})
        frame["school"] = gen.choice(["GP", "MS"], n)
        frame["guardian"] = gen.choice(["mother", "father", "other"], n)
        frame["G3"] = 3.0 * frame["q0"] + 2.0 * frame["q1"] - 2.0 * frame["q2"] + gen.standard_normal(n)
        path = output_dir / "survey.csv"
        frame.to_csv(path, index=False)

        x, y, names = ingest(IngestionSpec(path, response_column="G3", interactions="all_pairs"))
        assert x.shape[0] == n
        assert 700 <= x.shape[1] <= 820
        assert "guardian=mother*guardian=other" not in names

        report = run_kfold_prediction(x, y, default_methods(["lat", "rat"]), folds=10, seed=0)
        summary = report.summary.set_index("method")
        assert summary["failures"].sum() == 0
        assert summary.loc["lat", "mean_error"] < summary.loc["null", "mean_error"]
        assert summary.loc["rat", "mean_error"] < summary.loc["null", "mean_error"]
