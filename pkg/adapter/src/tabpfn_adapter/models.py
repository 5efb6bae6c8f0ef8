"""Quantile models served by the adapter.

Each model is constructed fresh per request (in-context style: the
request carries its own training set, and contexts differ between
requests by design, so caching a fit would never hit).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AdapterConfig:
    """Serving configuration.

    ``ignore_pretraining_limits`` defaults to on because the feature
    vectors of the target pipeline are wider than the regressor's
    pre-training limit.
    """

    model: str = "stub"
    device: str = "cpu"
    ignore_pretraining_limits: bool = True


class StubModel:
    """Deterministic protocol-testing model: ignores features entirely.

    The mean is the training-label mean; quantiles are the linearly
    interpolated empirical quantiles of the training labels.  Replies
    are identical for identical requests regardless of seed.
    """

    def __init__(self, config: AdapterConfig, seed: int = 0):
        self._train_y: np.ndarray | None = None

    def fit(self, train_x: np.ndarray, train_y: np.ndarray) -> "StubModel":
        self._train_y = np.sort(np.asarray(train_y, dtype=float))
        return self

    def predict_mean(self, test_x: np.ndarray) -> np.ndarray:
        return np.full(len(test_x), float(self._train_y.mean()))

    def predict_quantiles(self, test_x: np.ndarray, levels) -> dict[float, np.ndarray]:
        n = len(test_x)
        out = {}
        for q in levels:
            value = float(np.quantile(self._train_y, q))
            out[float(q)] = np.full(n, value)
        return out


class TabPfnModel:
    """The real in-context regressor; one fit per request.

    The point estimate is the library's default ``predict`` output,
    which the protocol reports as "mean".
    """

    def __init__(self, config: AdapterConfig, seed: int = 0):
        from tabpfn import TabPFNRegressor  # deferred: optional heavy dependency

        self._reg = TabPFNRegressor(
            device=config.device,
            ignore_pretraining_limits=config.ignore_pretraining_limits,
            random_state=seed,
        )

    def fit(self, train_x: np.ndarray, train_y: np.ndarray) -> "TabPfnModel":
        self._reg.fit(train_x, train_y)
        return self

    def predict_mean(self, test_x: np.ndarray) -> np.ndarray:
        return np.asarray(self._reg.predict(test_x), dtype=float)

    def predict_quantiles(self, test_x: np.ndarray, levels) -> dict[float, np.ndarray]:
        values = self._reg.predict(test_x, output_type="quantiles", quantiles=list(levels))
        return {float(q): np.asarray(v, dtype=float) for q, v in zip(levels, values)}


_MODELS = {"stub": StubModel, "tabpfn": TabPfnModel}


def make_model_factory(config: AdapterConfig):
    """A callable (seed) -> fitted-capable model for the configured kind."""
    try:
        cls = _MODELS[config.model]
    except KeyError:
        raise ValueError(f"unknown model {config.model!r}; expected one of {sorted(_MODELS)}")

    def factory(seed: int):
        return cls(config, seed=seed)

    return factory
