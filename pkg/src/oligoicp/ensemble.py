"""Subset-context ensembles with uncertainty-guided selection.

The pipeline: sample many model specs (each a random draw of training
subsets), run each spec's context through a quantile backend, score each
model by the mean inter-quantile range of its test predictions, and
aggregate under four strategies:

* ``all_data_single``      one model contexted on every pool subset;
* ``full_mean``            unweighted average over all models;
* ``top_fraction_mean``    average over the lowest-mean-IQR fraction
                           (selection never sees truth labels);
* ``oracle_best``          the single lowest-MAE model, identifiable
                           only with truth labels (upper-bound reference).
"""

from __future__ import annotations

import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.stats

from .backends import BuiltinBackend, DEFAULT_QUANTILE_LEVELS, QuantilePrediction
from .errors import (
    ConstantInputError,
    EmptyPoolError,
    EmptyResultsError,
    MissingTruthError,
    ModelRunError,
)
from .evaluation import mae, pearson

logger = logging.getLogger(__name__)

STRATEGIES = ("all_data_single", "full_mean", "top_fraction_mean", "oracle_best")

DEFAULT_N_MODELS = 400
DEFAULT_K_MAX = 20
DEFAULT_FRACTION = 0.10
DEFAULT_N_REPEATS = 3


@dataclass(frozen=True)
class Subset:
    """A named group of training records (indices into the dataset)."""

    subset_id: str
    indices: tuple[int, ...]

    def __post_init__(self):
        if not self.indices:
            raise ValueError(f"subset {self.subset_id!r} is empty")


@dataclass(frozen=True)
class SubsetPool:
    """The sampling units for model contexts, in a fixed order."""

    subsets: tuple[Subset, ...]

    def __post_init__(self):
        ids = [s.subset_id for s in self.subsets]
        if len(set(ids)) != len(ids):
            raise ValueError("subset ids must be unique")
        object.__setattr__(self, "_by_id", {s.subset_id: s for s in self.subsets})

    def __len__(self) -> int:
        return len(self.subsets)

    def ids(self) -> tuple[str, ...]:
        return tuple(s.subset_id for s in self.subsets)

    def resolve(self, subset_ids) -> np.ndarray:
        """Record indices of the given subsets, concatenated in call order."""
        chunks = [self._by_id[sid].indices for sid in subset_ids]
        return np.concatenate([np.asarray(c, dtype=int) for c in chunks])

    def all_indices(self) -> np.ndarray:
        return self.resolve(self.ids())


@dataclass(frozen=True)
class ModelSpec:
    """One ensemble member: which subsets form its context, and its seed."""

    model_index: int
    chosen_subsets: tuple[str, ...]
    k: int
    seed: int

    def __post_init__(self):
        if self.k != len(self.chosen_subsets):
            raise ValueError("k must equal the number of chosen subsets")
        if len(set(self.chosen_subsets)) != self.k:
            raise ValueError("chosen subsets must be distinct")


@dataclass(frozen=True)
class ModelResult:
    spec: ModelSpec
    prediction: QuantilePrediction
    mean_iqr: float
    mae: float | None = None
    corr: float | None = None


def sample_model_specs(
    pool: SubsetPool,
    n_models: int = DEFAULT_N_MODELS,
    k_max: int = DEFAULT_K_MAX,
    seed: int = 0,
) -> list[ModelSpec]:
    """Draw ``n_models`` specs: k uniform on [1, min(k_max, pool size)],
    then k distinct subsets uniform without replacement.  Fully
    determined by ``seed``; each spec also receives its own backend seed.
    """
    if len(pool) == 0:
        raise EmptyPoolError("cannot sample model specs from an empty pool")
    if n_models < 1:
        raise ValueError("n_models must be >= 1")
    ids = pool.ids()
    k_cap = min(k_max, len(ids))
    rng = np.random.default_rng(seed)
    specs = []
    for m in range(n_models):
        k = int(rng.integers(1, k_cap + 1))
        chosen = tuple(ids[i] for i in rng.choice(len(ids), size=k, replace=False))
        specs.append(
            ModelSpec(
                model_index=m,
                chosen_subsets=chosen,
                k=k,
                seed=int(rng.integers(0, 2**31 - 1)),
            )
        )
    return specs


def progressive_prefix_specs(
    pool: SubsetPool, n_permutations: int = 8, seed: int = 0
) -> list[ModelSpec]:
    """The progressive-context model population for IQR-vs-quality scatters.

    For each of ``n_permutations`` random subset orderings, emit one spec
    per prefix length: the first model sees one subset, the next two, and
    so on until every subset is included.
    """
    if len(pool) == 0:
        raise EmptyPoolError("cannot build progressive prefixes from an empty pool")
    ids = pool.ids()
    rng = np.random.default_rng(seed)
    specs = []
    index = 0
    for _ in range(n_permutations):
        order = [ids[i] for i in rng.permutation(len(ids))]
        for k in range(1, len(ids) + 1):
            specs.append(
                ModelSpec(
                    model_index=index,
                    chosen_subsets=tuple(order[:k]),
                    k=k,
                    seed=int(rng.integers(0, 2**31 - 1)),
                )
            )
            index += 1
    return specs


def _run_one(spec, pool, features, labels, test_features, backend, quantile_levels):
    idx = pool.resolve(spec.chosen_subsets)
    prediction = backend.quantile_predict(
        features[idx], labels[idx], test_features, quantile_levels, seed=spec.seed
    )
    prediction.validate(n_test=test_features.shape[0], levels=quantile_levels)
    band = prediction.iqr(quantile_levels[0], quantile_levels[-1])
    return ModelResult(spec=spec, prediction=prediction, mean_iqr=float(np.mean(band)))


def run_ensemble(
    specs,
    pool: SubsetPool,
    features,
    labels,
    test_features,
    backend=None,
    quantile_levels=DEFAULT_QUANTILE_LEVELS,
    workers: int = 1,
    on_error: str = "abort",
) -> list[ModelResult]:
    """Run every spec against the backend; results ordered by model index.

    ``on_error="abort"`` re-raises the first backend failure annotated
    with its model index; ``"drop"`` logs a warning and omits the model.
    Model runs are independent, so ``workers`` may exceed 1; each worker
    thread gets its own backend connection via ``for_worker``.
    """
    if on_error not in ("abort", "drop"):
        raise ValueError("on_error must be 'abort' or 'drop'")
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=float)
    test_features = np.asarray(test_features, dtype=float)
    if test_features.shape[0] == 0:
        raise ValueError("test set must be non-empty")
    backend = backend if backend is not None else BuiltinBackend()

    results: list[ModelResult] = []
    failures: list[ModelRunError] = []

    if workers <= 1:
        for spec in specs:
            try:
                results.append(
                    _run_one(spec, pool, features, labels, test_features, backend, quantile_levels)
                )
            except Exception as exc:
                failures.append(ModelRunError(spec.model_index, exc))
                if on_error == "abort":
                    raise failures[-1] from exc
    else:
        local = threading.local()
        spawned: list = []
        spawn_lock = threading.Lock()

        def worker_backend():
            if not hasattr(local, "backend"):
                local.backend = backend.for_worker()
                if local.backend is not backend:
                    with spawn_lock:
                        spawned.append(local.backend)
            return local.backend

        def task(spec):
            return _run_one(
                spec, pool, features, labels, test_features, worker_backend(), quantile_levels
            )

        try:
            with ThreadPoolExecutor(max_workers=workers) as pool_exec:
                futures = [(spec, pool_exec.submit(task, spec)) for spec in specs]
                for spec, future in futures:
                    try:
                        results.append(future.result())
                    except Exception as exc:
                        failures.append(ModelRunError(spec.model_index, exc))
                        if on_error == "abort":
                            raise failures[-1] from exc
        finally:
            for bk in spawned:
                close = getattr(bk, "close", None)
                if close is not None:
                    close()

    for failure in failures:
        logger.warning("dropped ensemble model: %s", failure)
    return sorted(results, key=lambda r: r.spec.model_index)


def select_top_fraction(results, fraction: float = DEFAULT_FRACTION) -> list[ModelResult]:
    """The ceil(fraction * n) models with the lowest mean IQR.

    Ties break toward the lower model index.  Selection is label-free by
    interface shape: truth is not a parameter.
    """
    if not results:
        raise EmptyResultsError("cannot select from an empty result list")
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must lie in (0, 1]: {fraction}")
    n_selected = math.ceil(fraction * len(results))
    ranked = sorted(results, key=lambda r: (r.mean_iqr, r.spec.model_index))
    return ranked[:n_selected]


@dataclass(frozen=True)
class StrategyResult:
    """One aggregation strategy's point predictions and metrics."""

    strategy: str
    point_predictions: np.ndarray
    selected_model_indices: tuple[int, ...] | None = None
    oracle_model_index: int | None = None
    mae: float | None = None
    corr: float | None = None
    corr_status: str = "ok"

    def metrics_dict(self) -> dict:
        out = {"strategy": self.strategy, "mae": self.mae, "corr": self.corr,
               "corr_status": self.corr_status}
        if self.selected_model_indices is not None:
            out["selected_model_indices"] = list(self.selected_model_indices)
        if self.oracle_model_index is not None:
            out["oracle_model_index"] = self.oracle_model_index
        return out


def _with_metrics(result: StrategyResult, truth) -> StrategyResult:
    if truth is None:
        return result
    truth = np.asarray(truth, dtype=float)
    err = mae(result.point_predictions, truth)
    try:
        corr = pearson(result.point_predictions, truth)
        status = "ok"
    except ConstantInputError:
        corr = None
        status = "constant_input"
    return StrategyResult(
        strategy=result.strategy,
        point_predictions=result.point_predictions,
        selected_model_indices=result.selected_model_indices,
        oracle_model_index=result.oracle_model_index,
        mae=err,
        corr=corr,
        corr_status=status,
    )


def aggregate(
    results,
    strategy: str,
    fraction: float = DEFAULT_FRACTION,
    all_data_prediction: QuantilePrediction | None = None,
    truth=None,
) -> StrategyResult:
    """Aggregate model results under one strategy.

    ``all_data_single`` needs the provided prediction; ``oracle_best``
    needs truth labels.  Metrics are attached whenever truth is given.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")

    if strategy == "all_data_single":
        if all_data_prediction is None:
            raise ValueError("all_data_single requires all_data_prediction")
        base = StrategyResult(strategy=strategy, point_predictions=all_data_prediction.mean)
        return _with_metrics(base, truth)

    if not results:
        raise EmptyResultsError(f"strategy {strategy!r} needs at least one model result")

    if strategy == "full_mean":
        stacked = np.stack([r.prediction.mean for r in results])
        base = StrategyResult(strategy=strategy, point_predictions=stacked.mean(axis=0))
        return _with_metrics(base, truth)

    if strategy == "top_fraction_mean":
        selected = select_top_fraction(results, fraction)
        stacked = np.stack([r.prediction.mean for r in selected])
        base = StrategyResult(
            strategy=strategy,
            point_predictions=stacked.mean(axis=0),
            selected_model_indices=tuple(r.spec.model_index for r in selected),
        )
        return _with_metrics(base, truth)

    # oracle_best
    if truth is None:
        raise MissingTruthError("oracle_best requires truth labels")
    truth_arr = np.asarray(truth, dtype=float)
    scored = sorted(
        results, key=lambda r: (mae(r.prediction.mean, truth_arr), r.spec.model_index)
    )
    best = scored[0]
    base = StrategyResult(
        strategy=strategy,
        point_predictions=best.prediction.mean,
        oracle_model_index=best.spec.model_index,
    )
    return _with_metrics(base, truth)


@dataclass(frozen=True)
class RepeatReport:
    repeat_index: int
    seed: int
    strategies: dict[str, StrategyResult]
    model_mean_iqrs: tuple[float, ...]

    def as_dict(self) -> dict:
        return {
            "repeat_index": self.repeat_index,
            "seed": self.seed,
            "strategies": {name: s.metrics_dict() for name, s in self.strategies.items()},
        }


@dataclass(frozen=True)
class StrategySummary:
    strategy: str
    mae_mean: float | None
    mae_ci95: float | None
    corr_mean: float | None
    corr_ci95: float | None

    def as_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "mae_mean": self.mae_mean,
            "mae_ci95": self.mae_ci95,
            "corr_mean": self.corr_mean,
            "corr_ci95": self.corr_ci95,
        }


@dataclass(frozen=True)
class ExperimentReport:
    repeats: tuple[RepeatReport, ...]
    summary: dict[str, StrategySummary]
    overall_oracle: dict

    def as_dict(self) -> dict:
        return {
            "repeats": [r.as_dict() for r in self.repeats],
            "summary": {name: s.as_dict() for name, s in self.summary.items()},
            "overall_oracle": self.overall_oracle,
        }


def _mean_ci95(values: list[float]) -> tuple[float | None, float | None]:
    """Mean and 95% CI half-width via the t-distribution on n-1 df."""
    if not values:
        return None, None
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    if arr.size < 2:
        return mean, None
    sem = float(arr.std(ddof=1) / math.sqrt(arr.size))
    t_crit = float(scipy.stats.t.ppf(0.975, df=arr.size - 1))
    return mean, sem * t_crit


def resolve_repeat_seeds(seeds, n_repeats: int) -> list[int]:
    """Explicit per-repeat seeds: a base int yields base, base+1, ..."""
    if isinstance(seeds, (int, np.integer)):
        return [int(seeds) + i for i in range(n_repeats)]
    out = [int(s) for s in seeds]
    if len(out) != n_repeats:
        raise ValueError(f"expected {n_repeats} seeds, got {len(out)}")
    return out


def run_experiment(
    pool: SubsetPool,
    features,
    labels,
    test_features,
    test_labels,
    n_models: int = DEFAULT_N_MODELS,
    n_repeats: int = DEFAULT_N_REPEATS,
    k_max: int = DEFAULT_K_MAX,
    fraction: float = DEFAULT_FRACTION,
    backend=None,
    quantile_levels=DEFAULT_QUANTILE_LEVELS,
    seeds=0,
    workers: int = 1,
    on_error: str = "abort",
) -> ExperimentReport:
    """The full ensemble experiment: repeats, strategies, and summaries.

    Each repeat resamples its own spec list from its seed.  Across
    repeats the per-strategy metrics are summarized as mean and 95%
    confidence interval (t-distribution, n_repeats - 1 df); with a
    single repeat the CI is omitted.  The overall oracle is the best
    single model across every repeat, reported separately because it is
    identifiable only in hindsight.
    """
    if n_repeats < 1:
        raise ValueError("n_repeats must be >= 1")
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=float)
    test_features = np.asarray(test_features, dtype=float)
    test_labels = np.asarray(test_labels, dtype=float)
    backend = backend if backend is not None else BuiltinBackend()
    repeat_seeds = resolve_repeat_seeds(seeds, n_repeats)

    all_idx = pool.all_indices()
    repeats = []
    for rep, seed in enumerate(repeat_seeds):
        specs = sample_model_specs(pool, n_models=n_models, k_max=k_max, seed=seed)
        results = run_ensemble(
            specs,
            pool,
            features,
            labels,
            test_features,
            backend=backend,
            quantile_levels=quantile_levels,
            workers=workers,
            on_error=on_error,
        )
        all_data_prediction = backend.quantile_predict(
            features[all_idx], labels[all_idx], test_features, quantile_levels, seed=seed
        )
        strategies = {
            name: aggregate(
                results,
                name,
                fraction=fraction,
                all_data_prediction=all_data_prediction,
                truth=test_labels,
            )
            for name in STRATEGIES
        }
        repeats.append(
            RepeatReport(
                repeat_index=rep,
                seed=seed,
                strategies=strategies,
                model_mean_iqrs=tuple(r.mean_iqr for r in results),
            )
        )

    summary = {}
    for name in STRATEGIES:
        maes = [r.strategies[name].mae for r in repeats]
        corrs = [r.strategies[name].corr for r in repeats]
        mae_mean, mae_ci = _mean_ci95([v for v in maes if v is not None])
        corr_ok = [v for v in corrs if v is not None]
        corr_mean, corr_ci = _mean_ci95(corr_ok) if len(corr_ok) == len(corrs) else (None, None)
        summary[name] = StrategySummary(
            strategy=name,
            mae_mean=mae_mean,
            mae_ci95=mae_ci,
            corr_mean=corr_mean,
            corr_ci95=corr_ci,
        )

    oracle_rows = [
        (r.strategies["oracle_best"].mae, r.repeat_index, r.strategies["oracle_best"])
        for r in repeats
    ]
    best_mae, best_rep, best = min(oracle_rows, key=lambda row: (row[0], row[1]))
    overall_oracle = {
        "repeat_index": best_rep,
        "model_index": best.oracle_model_index,
        "mae": best_mae,
        "corr": best.corr,
    }
    return ExperimentReport(
        repeats=tuple(repeats), summary=summary, overall_oracle=overall_oracle
    )
