"""Metrics, IQR-error analysis, calibration coverage, and report files.

Pure computations over prediction/truth vectors; the CLI composes them.
Report emitters write CSV and JSON shaped for external plotting.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .backends import QuantilePrediction
from .errors import ConstantInputError, LengthMismatchError, TooFewPointsError

DEFAULT_COVERAGE_GRID = tuple(i / 10 for i in range(1, 10))


def _paired(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=float)
    t = np.asarray(truth, dtype=float)
    if p.shape != t.shape or p.ndim != 1:
        raise LengthMismatchError(f"prediction shape {p.shape} vs truth shape {t.shape}")
    return p, t


def mae(pred, truth) -> float:
    """Mean absolute error."""
    p, t = _paired(pred, truth)
    if p.size < 1:
        raise LengthMismatchError("mae needs at least one point")
    return float(np.mean(np.abs(p - t)))


def pearson(pred, truth) -> float:
    """Sample Pearson correlation coefficient.

    Raises :class:`ConstantInputError` when either vector is constant;
    an undefined correlation is reported as an explicit status upstream,
    never silently as 0.
    """
    p, t = _paired(pred, truth)
    if p.size < 2:
        raise TooFewPointsError("pearson needs at least two points")
    dp = p - p.mean()
    dt = t - t.mean()
    denom = np.sqrt(np.sum(dp * dp) * np.sum(dt * dt))
    if denom == 0.0:
        raise ConstantInputError("pearson is undefined for constant input")
    return float(np.clip(np.sum(dp * dt) / denom, -1.0, 1.0))


def band_levels(coverage: float) -> tuple[float, float]:
    """Symmetric quantile pair (l, u) with u - l == coverage.

    Levels are rounded to 10 decimals so that e.g. coverage 0.7 yields
    exactly (0.15, 0.85) and keys match across call sites.
    """
    if not 0.0 < coverage < 1.0:
        raise ValueError(f"coverage must lie in (0, 1): {coverage}")
    lower = round((1.0 - coverage) / 2.0, 10)
    return lower, round(1.0 - lower, 10)


def grid_levels(coverages: Sequence[float] = DEFAULT_COVERAGE_GRID) -> tuple[float, ...]:
    """Sorted union of all band levels for a coverage grid."""
    levels = set()
    for c in coverages:
        levels.update(band_levels(c))
    return tuple(sorted(levels))


@dataclass(frozen=True)
class CoveragePoint:
    expected: float
    lower: float
    upper: float
    empirical: float
    n: int


@dataclass(frozen=True)
class CoverageCurve:
    points: tuple[CoveragePoint, ...]

    def max_deviation(self) -> float:
        return max(abs(p.empirical - p.expected) for p in self.points)


def coverage_curve(
    quantiles: Mapping[float, np.ndarray],
    truth,
    coverages: Sequence[float] = DEFAULT_COVERAGE_GRID,
) -> CoverageCurve:
    """Empirical vs expected coverage over symmetric quantile bands.

    A point counts as covered only when ``q_l < y < q_u`` strictly, so
    degenerate (zero-width) bands never cover.
    """
    t = np.asarray(truth, dtype=float)
    points = []
    for c in coverages:
        lower, upper = band_levels(c)
        if lower not in quantiles or upper not in quantiles:
            raise ValueError(f"quantile levels ({lower}, {upper}) missing for coverage {c}")
        ql = np.asarray(quantiles[lower], dtype=float)
        qu = np.asarray(quantiles[upper], dtype=float)
        if ql.shape != t.shape or qu.shape != t.shape:
            raise LengthMismatchError("quantile vectors and truth differ in length")
        hits = np.logical_and(ql < t, t < qu)
        points.append(
            CoveragePoint(
                expected=round(upper - lower, 10),
                lower=lower,
                upper=upper,
                empirical=float(np.mean(hits)),
                n=int(t.size),
            )
        )
    return CoverageCurve(points=tuple(points))


@dataclass(frozen=True)
class IqrBin:
    iqr_low: float
    iqr_high: float
    count: int
    mae: float
    q1: float
    median: float
    q3: float


@dataclass(frozen=True)
class IqrErrorBins:
    bins: tuple[IqrBin, ...]
    band: tuple[float, float]


def iqr_error_analysis(
    prediction: QuantilePrediction,
    truth,
    n_bins: int = 10,
    band: tuple[float, float] = (0.15, 0.85),
) -> IqrErrorBins:
    """Absolute-error summaries across equal-count bins of the IQR.

    Equal-count bins keep the extreme-IQR summaries from being starved
    of data; bin sizes differ by at most one.
    """
    iqr = prediction.iqr(*band)
    t = np.asarray(truth, dtype=float)
    if iqr.shape != t.shape:
        raise LengthMismatchError("prediction and truth differ in length")
    if t.size < n_bins:
        raise TooFewPointsError(f"need at least {n_bins} points for {n_bins} bins")
    abs_err = np.abs(prediction.mean - t)
    order = np.argsort(iqr, kind="stable")
    bins = []
    for group in np.array_split(order, n_bins):
        errs = abs_err[group]
        q1, med, q3 = np.quantile(errs, [0.25, 0.5, 0.75])
        bins.append(
            IqrBin(
                iqr_low=float(iqr[group].min()),
                iqr_high=float(iqr[group].max()),
                count=int(group.size),
                mae=float(errs.mean()),
                q1=float(q1),
                median=float(med),
                q3=float(q3),
            )
        )
    return IqrErrorBins(bins=tuple(bins), band=band)


@dataclass(frozen=True)
class ModelIqrScatter:
    points: tuple[tuple[float, float], ...]  # (mean_iqr, corr) per model
    slope: float
    intercept: float
    pearson_r: float


def model_iqr_correlation_scatter(results, truth) -> ModelIqrScatter:
    """Per-model (mean IQR, correlation) pairs with their linear fit.

    ``results`` is any sequence exposing ``mean_iqr`` and
    ``prediction.mean`` (ensemble model results do).
    """
    if len(results) < 3:
        raise TooFewPointsError("need at least three models for the scatter fit")
    xs = np.array([r.mean_iqr for r in results])
    ys = np.array([pearson(r.prediction.mean, truth) for r in results])
    if np.all(xs == xs[0]) or np.all(ys == ys[0]):
        raise ConstantInputError("scatter fit is undefined for constant inputs")
    slope, intercept = np.polyfit(xs, ys, 1)
    return ModelIqrScatter(
        points=tuple(zip(xs.tolist(), ys.tolist())),
        slope=float(slope),
        intercept=float(intercept),
        pearson_r=pearson(xs, ys),
    )


def kfold_split(n, k: int = 5, seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """Deterministic shuffled k-fold split of ``range(n)``.

    ``n`` may be a count or a sized collection of records.  Test folds
    are pairwise disjoint, cover every index, and differ in size by at
    most one.
    """
    if not isinstance(n, (int, np.integer)):
        n = len(n)
    if n < k:
        raise TooFewPointsError(f"cannot split {n} records into {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    folds = np.array_split(perm, k)
    out = []
    for i, fold in enumerate(folds):
        test = np.sort(fold)
        train = np.sort(np.concatenate([f for j, f in enumerate(folds) if j != i]))
        out.append((train, test))
    return out


# --- report files ---

def write_json(path, payload) -> None:
    """Deterministic JSON: sorted keys, two-space indent, trailing newline."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def write_coverage_csv(curve: CoverageCurve, path) -> None:
    _write_csv(
        path,
        ["expected_coverage", "lower_level", "upper_level", "empirical_coverage", "n"],
        [(p.expected, p.lower, p.upper, p.empirical, p.n) for p in curve.points],
    )


def write_iqr_bins_csv(bins: IqrErrorBins, path) -> None:
    _write_csv(
        path,
        ["iqr_low", "iqr_high", "count", "mae", "q1", "median", "q3"],
        [(b.iqr_low, b.iqr_high, b.count, b.mae, b.q1, b.median, b.q3) for b in bins.bins],
    )


def write_scatter_csv(scatter: ModelIqrScatter, path) -> None:
    _write_csv(
        path,
        ["mean_iqr", "corr"],
        [(x, y) for x, y in scatter.points],
    )
