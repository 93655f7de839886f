"""
Replicated Monte-Carlo benchmark of LAT/RAT fits on the synthetic examples,
and the K-fold prediction protocol for real data.
"""

import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from hdls import __version__
from hdls.core.datagen import DEFAULT_SNR, EXAMPLES, gen_example
from hdls.core.errors import HdlsError, InvalidDimensions
from hdls.core.linalg import as_design, as_response
from hdls.core.pipeline import CvConfig, FitResult, fold_indices, lat, rat
from hdls.core.records import RecordFile
from hdls.core.rng import fingerprint
from hdls.core.selection import SelectionRule

logger = logging.getLogger(__name__)

ALGORITHMS = ("lat", "rat")
METRICS = ("rmse", "fp", "fn", "runtime_ms")


@dataclass(frozen=True)
class MethodSpec:
    """
    One pipeline configuration to benchmark.

    Parameters
    ----------
    name:
        Unique label in reports.
    algorithm:
        "lat" or "rat".
    rule:
        Selection strategy.
    ridge:
        Fixed RAT ridge parameter; None tunes it by cross-validation.
    cv:
        CV settings for RAT; its seed is replaced per fit.
    """

    name: str
    algorithm: str = "lat"
    rule: SelectionRule = field(default_factory=SelectionRule)
    ridge: Optional[float] = None
    cv: Optional[CvConfig] = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"Unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}.")

    def fit(self, x, y, seed: int = 0) -> FitResult:
        """Fits this method; seed only sets the CV fold assignment of RAT."""
        if self.algorithm == "lat":
            return lat(x, y, self.rule)
        if self.ridge is not None:
            return rat(x, y, self.rule, r=self.ridge)
        cv = dataclasses.replace(self.cv if self.cv is not None else CvConfig(), seed=seed)
        return rat(x, y, self.rule, cv=cv)


def default_methods(names: Sequence[str], rule: Optional[SelectionRule] = None) -> Tuple[MethodSpec, ...]:
    """MethodSpecs for plain algorithm names ("lat", "rat") sharing one rule."""
    rule = rule if rule is not None else SelectionRule()
    return tuple(MethodSpec(name=name, algorithm=name, rule=rule) for name in names)


@dataclass(frozen=True)
class BenchConfig:
    """
    Parameters
    ----------
    example:
        Synthetic example name ("i" to "iv").
    n, p:
        Shape of every replicate.
    replicates:
        Number of replicates, >= 1.
    methods:
        Methods fit on every replicate; names must be unique.
    base_seed:
        Replicate r uses seed base_seed + r.
    output_path:
        Optional `.jsonl` report path; a `.txt` table is written next to it.
    snr:
        Signal-to-noise ratio of the generator.
    n_jobs:
        joblib workers over replicates.
    """

    example: str
    n: int
    p: int
    replicates: int
    methods: Tuple[MethodSpec, ...]
    base_seed: int = 0
    output_path: Optional[Union[str, Path]] = None
    snr: float = DEFAULT_SNR
    n_jobs: int = 1

    def __post_init__(self):
        if self.example not in EXAMPLES:
            raise InvalidDimensions(f"Unknown example {self.example!r}; expected one of {sorted(EXAMPLES)}.")
        if self.replicates < 1:
            raise ValueError(f"replicates must be >= 1, got {self.replicates}.")
        names = [m.name for m in self.methods]
        if not names or len(set(names)) != len(names):
            raise ValueError(f"Method names must be nonempty and unique, got {names}.")

    def describe(self) -> dict:
        """JSON-ready echo of the configuration."""
        return {
            "example": self.example,
            "n": self.n,
            "p": self.p,
            "replicates": self.replicates,
            "base_seed": self.base_seed,
            "snr": self.snr,
            "n_jobs": self.n_jobs,
            "methods": [
                {"name": m.name, "algorithm": m.algorithm, "rule": m.rule.describe(), "ridge": m.ridge}
                for m in self.methods
            ],
        }


def _summarize(rows: pd.DataFrame, methods: Sequence[str], metrics: Sequence[str]) -> pd.DataFrame:
    ok = rows[rows["error"].isna()]
    summary = ok.groupby("method", sort=False)[list(metrics)].agg(["mean", "std"])
    summary.columns = [f"{metric}_{stat}" for metric, stat in summary.columns]
    summary = summary.reindex(list(methods))
    summary["fits"] = ok.groupby("method", sort=False).size().reindex(list(methods)).fillna(0).astype(int)
    summary["failures"] = (
        rows[rows["error"].notna()].groupby("method", sort=False).size().reindex(list(methods)).fillna(0).astype(int)
    )
    return summary.rename_axis("method").reset_index()


@dataclass
class BenchReport:
    """
    Per-replicate rows and per-method aggregates of a benchmark run.

    rows has one row per (replicate, method) with rmse, fp, fn, support_size,
    true_positives, runtime_ms, checksum and error (None on success).
    summary has mean/std of every metric per method plus fit and failure
    counts; std is NaN with a single successful replicate.
    """

    rows: pd.DataFrame
    summary: pd.DataFrame
    config: dict
    fingerprint: str

    def table(self) -> str:
        """Aligned RMSE / #FPs / #FNs / Time(ms) table, one row per method."""
        view = pd.DataFrame(
            {
                "RMSE": self.summary["rmse_mean"],
                "#FPs": self.summary["fp_mean"],
                "#FNs": self.summary["fn_mean"],
                "Time(ms)": self.summary["runtime_ms_mean"],
                "failures": self.summary["failures"],
            }
        )
        view.index = self.summary["method"]
        return view.to_string(float_format=lambda v: f"{v:.3f}")

    def write(self, path: Union[str, Path]):
        """Writes the `.jsonl` records and the `.txt` table next to them."""
        records = RecordFile(path)
        header = {"kind": "config", "config": self.config, "fingerprint": self.fingerprint}
        rows = [{"kind": "row", **row} for row in self.rows.to_dict(orient="records")]
        summary = [{"kind": "summary", **row} for row in self.summary.to_dict(orient="records")]
        records.write_records([header] + rows + summary)
        records.path.with_suffix(".txt").write_text(self.table() + "\n", encoding="utf-8")
        logger.info("Wrote benchmark report to %s", records.path)


def _score_fit(result: FitResult, beta_true: np.ndarray) -> Dict[str, float]:
    truth = set(np.flatnonzero(beta_true).tolist())
    chosen = set(result.support.tolist())
    return {
        "rmse": float(np.linalg.norm(result.coefficients.beta - beta_true)),
        "fp": len(chosen - truth),
        "fn": len(truth - chosen),
        "support_size": len(chosen),
        "true_positives": len(chosen & truth),
    }


def _run_replicate(cfg: BenchConfig, replicate: int) -> List[dict]:
    seed = cfg.base_seed + replicate
    instance = gen_example(cfg.example, cfg.n, cfg.p, snr=cfg.snr, seed=seed)
    checksum = instance.checksum()
    rows = []
    for method in cfg.methods:
        row = {"replicate": replicate, "seed": seed, "method": method.name, "checksum": checksum, "threads": cfg.n_jobs}
        start = time.perf_counter_ns()
        try:
            result = method.fit(instance.x, instance.y, seed=seed)
        except HdlsError as e:
            logger.warning("Replicate %d, method %s failed: %s", replicate, method.name, e)
            row.update({"runtime_ms": (time.perf_counter_ns() - start) / 1e6, "error": str(e)})
        else:
            row["runtime_ms"] = (time.perf_counter_ns() - start) / 1e6
            row.update(_score_fit(result, instance.beta_true.beta))
            row["error"] = None
        rows.append(row)
    return rows


def run_bench(cfg: BenchConfig) -> BenchReport:
    """
    Fits every method on every replicate and aggregates RMSE, false
    positives, false negatives and runtime.

    Replicate r is generated with seed base_seed + r, so rows do not depend on
    n_jobs. Runtime covers the fit call only. Failed fits are kept as error
    rows and left out of the means.
    """
    logger.info(
        "Benchmark: example %s, (n, p) = (%d, %d), %d replicate(s), methods %s",
        cfg.example, cfg.n, cfg.p, cfg.replicates, [m.name for m in cfg.methods],
    )
    per_replicate = Parallel(n_jobs=cfg.n_jobs)(
        delayed(_run_replicate)(cfg, replicate) for replicate in range(cfg.replicates)
    )
    columns = ["replicate", "seed", "method", "rmse", "fp", "fn", "support_size",
               "true_positives", "runtime_ms", "threads", "checksum", "error"]
    rows = pd.DataFrame([row for block in per_replicate for row in block]).reindex(columns=columns)
    rows["error"] = rows["error"].astype(object).where(rows["error"].notna(), None)
    summary = _summarize(rows, [m.name for m in cfg.methods], METRICS)
    report = BenchReport(
        rows=rows,
        summary=summary,
        config=cfg.describe(),
        fingerprint=f"hdls {__version__}; {fingerprint()}",
    )
    if cfg.output_path is not None:
        report.write(cfg.output_path)
    return report


@dataclass
class KFoldReport:
    """
    Per-fold rows (fold, method, error, model_size, runtime_ms, error_message)
    and a summary with mean error, its standard error (sd / sqrt(folds)),
    mean model size and mean runtime per method, null model last.
    """

    rows: pd.DataFrame
    summary: pd.DataFrame

    def table(self) -> str:
        """Aligned summary table with the null model in the last row."""
        view = self.summary.set_index("method")[
            ["mean_error", "standard_error", "mean_model_size", "mean_runtime_ms", "failures"]
        ]
        return view.to_string(float_format=lambda v: f"{v:.3f}")


NULL_METHOD = "null"


def run_kfold_prediction(
    x,
    y,
    methods: Sequence[MethodSpec],
    folds: int = 10,
    seed: int = 0,
) -> KFoldReport:
    """
    K-fold prediction protocol: every fold is held out once, each method is
    fit on the remaining folds and scored by held-out RMSE. The null model
    predicts the training mean.

    Parameters
    ----------
    x:
        Design matrix (n, p).
    y:
        Response vector (n,).
    methods:
        Methods to compare; names must be unique and not "null".
    folds:
        Number of folds, 2 <= folds <= n.
    seed:
        Seed of the fold assignment (fold k fits use seed + k for CV).
    """
    x = as_design(x)
    y = as_response(y, x.shape[0])
    names = [m.name for m in methods]
    if len(set(names)) != len(names) or NULL_METHOD in names:
        raise ValueError(f"Method names must be unique and not {NULL_METHOD!r}, got {names}.")

    rows = []
    for k, test in enumerate(fold_indices(x.shape[0], folds, seed)):
        train = np.setdiff1d(np.arange(x.shape[0]), test, assume_unique=True)
        y_test = y[test]
        null_pred = y[train].mean()
        rows.append({
            "fold": k,
            "method": NULL_METHOD,
            "error": math.sqrt(float(np.mean((y_test - null_pred) ** 2))),
            "model_size": 0,
            "runtime_ms": np.nan,
            "error_message": None,
        })
        for method in methods:
            start = time.perf_counter_ns()
            try:
                result = method.fit(x[train], y[train], seed=seed + k)
            except HdlsError as e:
                logger.warning("Fold %d, method %s failed: %s", k, method.name, e)
                rows.append({"fold": k, "method": method.name, "error": np.nan, "model_size": np.nan,
                             "runtime_ms": (time.perf_counter_ns() - start) / 1e6, "error_message": str(e)})
                continue
            runtime = (time.perf_counter_ns() - start) / 1e6
            resid = y_test - result.predict(x[test])
            rows.append({
                "fold": k,
                "method": method.name,
                "error": math.sqrt(float(np.mean(resid**2))),
                "model_size": int(result.support.size),
                "runtime_ms": runtime,
                "error_message": None,
            })

    rows = pd.DataFrame(rows)
    order = names + [NULL_METHOD]
    ok = rows[rows["error_message"].isna()]
    grouped = ok.groupby("method", sort=False)
    summary = pd.DataFrame({
        "mean_error": grouped["error"].mean(),
        "standard_error": grouped["error"].std() / np.sqrt(grouped["error"].count()),
        "mean_model_size": grouped["model_size"].mean(),
        "mean_runtime_ms": grouped["runtime_ms"].mean(),
    }).reindex(order)
    summary["failures"] = (
        rows[rows["error_message"].notna()].groupby("method").size().reindex(order).fillna(0).astype(int)
    )
    return KFoldReport(rows=rows, summary=summary.rename_axis("method").reset_index())
