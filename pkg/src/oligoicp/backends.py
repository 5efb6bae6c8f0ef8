"""Quantile-capable regression backends.

Every backend satisfies the same contract: given a training context
(features + labels), test features, and a sorted tuple of quantile
levels, return a :class:`QuantilePrediction` whose per-point quantile
values are non-decreasing in the level.  Monotonicity is *enforced* at
the boundary for external backends and verified for the built-in one.

The built-in backend is a distance-weighted k-nearest-neighbor quantile
estimator: a deterministic, label-free stand-in for in-context
regressors that exercises every downstream component identically.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .errors import DimensionMismatchError

DEFAULT_QUANTILE_LEVELS = (0.15, 0.85)
DEFAULT_N_NEIGHBORS = 64


class DegenerateContextWarning(UserWarning):
    """Requested more neighbors than the context holds; clamped."""


def validate_quantile_levels(levels) -> tuple[float, ...]:
    out = tuple(float(q) for q in levels)
    if not out:
        raise ValueError("at least one quantile level is required")
    if any(not 0.0 < q < 1.0 for q in out):
        raise ValueError(f"quantile levels must lie in (0, 1): {out}")
    if any(b <= a for a, b in zip(out, out[1:])):
        raise ValueError(f"quantile levels must be strictly increasing: {out}")
    return out


def _as_matrix(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 2:
        raise DimensionMismatchError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def _as_vector(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise DimensionMismatchError(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class TrainingContext:
    """An in-context training set: features (n, d) and labels (n,)."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        feats = _as_matrix(self.features, "context features")
        labels = _as_vector(self.labels, "context labels")
        if feats.shape[0] != labels.shape[0]:
            raise DimensionMismatchError(
                f"context has {feats.shape[0]} feature rows but {labels.shape[0]} labels"
            )
        if feats.shape[0] < 1:
            raise ValueError("context must contain at least one training point")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)


@dataclass(frozen=True)
class QuantileRequest:
    """Test features plus the strictly increasing quantile levels to predict."""

    test_features: np.ndarray
    quantile_levels: tuple[float, ...] = DEFAULT_QUANTILE_LEVELS

    def __post_init__(self):
        object.__setattr__(self, "test_features", _as_matrix(self.test_features, "test features"))
        object.__setattr__(self, "quantile_levels", validate_quantile_levels(self.quantile_levels))


@dataclass(frozen=True)
class QuantilePrediction:
    """Per-test-point mean plus values at each requested quantile level."""

    mean: np.ndarray
    quantiles: dict[float, np.ndarray]

    def validate(self, n_test: int | None = None, levels=None) -> "QuantilePrediction":
        """Check shapes, finiteness, and per-point quantile monotonicity.

        Raises ``ValueError`` on any violation; callers at the wire
        boundary translate that into ``ProtocolError``.
        """
        mean = _as_vector(self.mean, "mean")
        n = mean.shape[0] if n_test is None else int(n_test)
        if mean.shape[0] != n:
            raise ValueError(f"mean has length {mean.shape[0]}, expected {n}")
        got_levels = validate_quantile_levels(sorted(self.quantiles))
        if levels is not None and got_levels != validate_quantile_levels(levels):
            raise ValueError(
                f"quantile levels {got_levels} do not match requested {tuple(levels)}"
            )
        prev = None
        for level in got_levels:
            vec = _as_vector(self.quantiles[level], f"quantile {level}")
            if vec.shape[0] != n:
                raise ValueError(f"quantile {level} has length {vec.shape[0]}, expected {n}")
            if prev is not None and np.any(vec < prev):
                raise ValueError(f"quantile values decrease between levels at level {level}")
            prev = vec
        return self

    def iqr(self, lower: float = 0.15, upper: float = 0.85) -> np.ndarray:
        """Per-point inter-quantile range; >= 0 for any validated prediction."""
        if lower not in self.quantiles or upper not in self.quantiles:
            raise KeyError(f"prediction lacks quantile levels {lower} and/or {upper}")
        return self.quantiles[upper] - self.quantiles[lower]


def _standardize(train_x: np.ndarray, test_x: np.ndarray):
    """Z-score both matrices with context statistics.

    Zero-variance columns pass through unscaled (centering only, which
    cancels in the pairwise differences distances are built from).
    """
    mu = train_x.mean(axis=0)
    sd = train_x.std(axis=0)
    sd = np.where(sd == 0.0, 1.0, sd)
    return (train_x - mu) / sd, (test_x - mu) / sd


def _median_pairwise_distance(x: np.ndarray) -> float:
    """Median Euclidean distance over all unordered point pairs.

    Falls back to the maximum pairwise distance (then 1.0) when the
    median degenerates to zero, so the Gaussian kernel stays finite.
    """
    n = x.shape[0]
    if n < 2:
        return 1.0
    sq = np.sum(x * x, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.clip(d2, 0.0, None, out=d2)
    pair_d2 = d2[np.triu_indices(n, k=1)]
    med = float(np.median(np.sqrt(pair_d2)))
    if med > 0.0:
        return med
    mx = float(np.sqrt(pair_d2.max()))
    return mx if mx > 0.0 else 1.0


def knn_quantile_predict(
    train_x,
    train_y,
    test_x,
    quantile_levels=DEFAULT_QUANTILE_LEVELS,
    n_neighbors: int = DEFAULT_N_NEIGHBORS,
    bandwidth: float | None = None,
) -> QuantilePrediction:
    """Distance-weighted k-NN quantile prediction.

    For each test point the ``n_neighbors`` nearest context points under
    Euclidean distance on standardized features get Gaussian weights
    ``exp(-d^2 / (2 * bandwidth^2))``; the mean is the weighted label
    average and each quantile is read off the weighted empirical CDF by
    linear interpolation between its knots (knot j sits at cumulative
    weight ``(W_j - w_j / 2) / W``), clamping to the min/max neighbor
    label outside the knot range.  Equidistant neighbors are broken by
    lower training-row index, which makes the whole computation
    deterministic.

    ``bandwidth=None`` uses the median pairwise distance of the
    standardized context.  For numerical safety the Gaussian weights are
    computed with the per-test-point minimum squared distance subtracted;
    weights enter only through ratios, so this changes nothing
    mathematically while preventing underflow to all-zero weights.
    """
    train_x = _as_matrix(train_x, "train_x")
    train_y = _as_vector(train_y, "train_y")
    test_x = _as_matrix(test_x, "test_x")
    if train_x.shape[0] != train_y.shape[0]:
        raise DimensionMismatchError(
            f"train_x has {train_x.shape[0]} rows but train_y has {train_y.shape[0]}"
        )
    if train_x.shape[1] != test_x.shape[1]:
        raise DimensionMismatchError(
            f"feature width mismatch: context {train_x.shape[1]} vs test {test_x.shape[1]}"
        )
    levels = validate_quantile_levels(quantile_levels)
    if n_neighbors < 1:
        raise ValueError("n_neighbors must be >= 1")
    if bandwidth is not None and bandwidth <= 0:
        raise ValueError("bandwidth must be positive")

    n_train = train_x.shape[0]
    k = n_neighbors
    if k > n_train:
        warnings.warn(
            f"n_neighbors={k} exceeds context size {n_train}; clamping",
            DegenerateContextWarning,
            stacklevel=2,
        )
        k = n_train

    zt, zq = _standardize(train_x, test_x)
    bw = _median_pairwise_distance(zt) if bandwidth is None else float(bandwidth)

    sq_t = np.sum(zt * zt, axis=1)
    sq_q = np.sum(zq * zq, axis=1)
    d2 = sq_q[:, None] + sq_t[None, :] - 2.0 * (zq @ zt.T)
    np.clip(d2, 0.0, None, out=d2)

    # Stable sort ties to the lower training-row index.
    order = np.argsort(d2, axis=1, kind="stable")[:, :k]
    nd2 = np.take_along_axis(d2, order, axis=1)
    ny = train_y[order]
    w = np.exp(-(nd2 - nd2.min(axis=1, keepdims=True)) / (2.0 * bw * bw))

    mean = np.sum(w * ny, axis=1) / np.sum(w, axis=1)

    label_order = np.argsort(ny, axis=1, kind="stable")
    sy = np.take_along_axis(ny, label_order, axis=1)
    sw = np.take_along_axis(w, label_order, axis=1)
    cum = np.cumsum(sw, axis=1)
    knots = (cum - 0.5 * sw) / cum[:, -1:]

    qarr = np.asarray(levels)
    values = np.empty((test_x.shape[0], len(levels)))
    for i in range(test_x.shape[0]):
        values[i] = np.interp(qarr, knots[i], sy[i])

    prediction = QuantilePrediction(
        mean=mean,
        quantiles={level: values[:, j].copy() for j, level in enumerate(levels)},
    )
    return prediction.validate(n_test=test_x.shape[0], levels=levels)


class BuiltinBackend:
    """In-context adapter around :func:`knn_quantile_predict`.

    Deterministic regardless of ``seed``; the seed parameter exists so
    every backend shares one call signature.
    """

    def __init__(self, n_neighbors: int = DEFAULT_N_NEIGHBORS, bandwidth: float | None = None):
        self.n_neighbors = n_neighbors
        self.bandwidth = bandwidth

    def quantile_predict(
        self, train_x, train_y, test_x, quantile_levels=DEFAULT_QUANTILE_LEVELS, seed: int = 0
    ) -> QuantilePrediction:
        return knn_quantile_predict(
            train_x,
            train_y,
            test_x,
            quantile_levels,
            n_neighbors=self.n_neighbors,
            bandwidth=self.bandwidth,
        )

    def for_worker(self) -> "BuiltinBackend":
        """Backends share no mutable state, so workers may share the instance."""
        return self


class KnnQuantileRegressor(RegressorMixin, BaseEstimator):
    """scikit-learn estimator face of the built-in quantile backend.

    Parameters
    ----------
    n_neighbors : int, default=64
        Neighborhood size (clamped to the training-set size with a
        warning).
    bandwidth : float or None, default=None
        Gaussian kernel width on standardized features; None uses the
        median pairwise training distance.

    Examples
    --------
    >>> reg = KnnQuantileRegressor(n_neighbors=8).fit(X_train, y_train)
    >>> point = reg.predict(X_test)
    >>> bands = reg.predict_quantiles(X_test, quantile_levels=(0.15, 0.85))
    """

    def __init__(self, n_neighbors: int = DEFAULT_N_NEIGHBORS, bandwidth: float | None = None):
        self.n_neighbors = n_neighbors
        self.bandwidth = bandwidth

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        self.X_ = np.asarray(X, dtype=float)
        self.y_ = np.asarray(y, dtype=float)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X) -> np.ndarray:
        return self.predict_quantiles(X).mean

    def predict_quantiles(self, X, quantile_levels=DEFAULT_QUANTILE_LEVELS) -> QuantilePrediction:
        check_is_fitted(self, "X_")
        X = check_array(X)
        return knn_quantile_predict(
            self.X_,
            self.y_,
            X,
            quantile_levels,
            n_neighbors=self.n_neighbors,
            bandwidth=self.bandwidth,
        )


def make_backend(
    spec: str,
    *,
    n_neighbors: int = DEFAULT_N_NEIGHBORS,
    bandwidth: float | None = None,
    timeout: float = 600.0,
):
    """Build a backend from its CLI identifier.

    ``"builtin"`` yields the k-NN backend; ``"external:<endpoint>"``
    yields a wire-protocol client where the endpoint is either
    ``tcp:<host>:<port>`` or a child-process command line.
    """
    if spec == "builtin":
        return BuiltinBackend(n_neighbors=n_neighbors, bandwidth=bandwidth)
    if spec.startswith("external:"):
        from .protocol import external_backend

        return external_backend(spec[len("external:"):], timeout=timeout)
    raise ValueError(f"unknown backend {spec!r}; expected 'builtin' or 'external:<endpoint>'")


def predict(
    ctx: TrainingContext,
    req: QuantileRequest,
    backend="builtin",
    seed: int = 0,
) -> QuantilePrediction:
    """Uniform entry point: run any backend on a context/request pair.

    ``backend`` may be a backend object or a CLI identifier string.
    Output is deterministic for a fixed (context, request, backend, seed).
    """
    if ctx.features.shape[1] != req.test_features.shape[1]:
        raise DimensionMismatchError(
            f"feature width mismatch: context {ctx.features.shape[1]} "
            f"vs test {req.test_features.shape[1]}"
        )
    if isinstance(backend, str):
        backend = make_backend(backend)
    prediction = backend.quantile_predict(
        ctx.features, ctx.labels, req.test_features, req.quantile_levels, seed=seed
    )
    return prediction.validate(
        n_test=req.test_features.shape[0], levels=req.quantile_levels
    )
