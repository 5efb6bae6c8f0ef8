"""Request loop for the JSON-lines quantile protocol.

One JSON object per line.  Request::

    {"id": "<string>", "op": "predict", "train_x": [[...]], "train_y": [...],
     "test_x": [[...]], "quantiles": [0.15, 0.85], "seed": <int>}

Reply::

    {"id": "<string>", "ok": true, "mean": [...], "quantiles": {"0.15": [...]}}
    {"id": "<string>", "ok": false, "error": "<string>"}

A malformed request never kills the loop: it produces an ok=false reply
(with id null when the id itself is unreadable).  Quantile vectors are
sorted across levels per test point before replying, so every reply
satisfies the monotonicity invariant by construction.
"""

from __future__ import annotations

import json
import socket
import sys

import numpy as np

from .models import AdapterConfig, make_model_factory

PROTOCOL_VERSION = 1


class RequestError(ValueError):
    pass


def _as_matrix(obj, what: str) -> np.ndarray:
    arr = np.asarray(obj, dtype=float)
    if arr.ndim != 2 or arr.size == 0:
        raise RequestError(f"{what} must be a non-empty 2-D array")
    if not np.all(np.isfinite(arr)):
        raise RequestError(f"{what} contains non-finite values")
    return arr


def _parse_request(obj: dict):
    if obj.get("op") != "predict":
        raise RequestError(f"unsupported op {obj.get('op')!r}")
    for key in ("train_x", "train_y", "test_x", "quantiles"):
        if key not in obj:
            raise RequestError(f"request is missing {key!r}")
    try:
        train_x = _as_matrix(obj["train_x"], "train_x")
        test_x = _as_matrix(obj["test_x"], "test_x")
        train_y = np.asarray(obj["train_y"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise RequestError(str(exc)) from None
    if train_y.ndim != 1 or not np.all(np.isfinite(train_y)):
        raise RequestError("train_y must be a 1-D array of finite numbers")
    if train_x.shape[0] != train_y.shape[0]:
        raise RequestError("train_x and train_y disagree on the number of rows")
    if train_x.shape[1] != test_x.shape[1]:
        raise RequestError("train_x and test_x disagree on the feature width")
    levels = [float(q) for q in obj["quantiles"]]
    if not levels or any(not 0.0 < q < 1.0 for q in levels):
        raise RequestError("quantiles must lie strictly inside (0, 1)")
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise RequestError("quantiles must be strictly increasing")
    seed = obj.get("seed", 0)
    if not isinstance(seed, int):
        raise RequestError("seed must be an integer")
    return train_x, train_y, test_x, levels, seed


def _enforce_monotone(quantiles: dict[float, np.ndarray], levels) -> dict[float, np.ndarray]:
    stacked = np.stack([np.asarray(quantiles[q], dtype=float) for q in levels])
    stacked = np.sort(stacked, axis=0)
    return {q: stacked[i] for i, q in enumerate(levels)}


def _handle(obj: dict, model_factory) -> dict:
    train_x, train_y, test_x, levels, seed = _parse_request(obj)
    model = model_factory(seed).fit(train_x, train_y)
    mean = np.asarray(model.predict_mean(test_x), dtype=float)
    quantiles = _enforce_monotone(model.predict_quantiles(test_x, levels), levels)
    n = test_x.shape[0]
    if mean.shape != (n,) or any(quantiles[q].shape != (n,) for q in levels):
        raise RequestError("model produced vectors of the wrong length")
    if not np.all(np.isfinite(mean)) or any(
        not np.all(np.isfinite(quantiles[q])) for q in levels
    ):
        raise RequestError("model produced non-finite values")
    return {
        "id": obj["id"],
        "ok": True,
        "mean": mean.tolist(),
        "quantiles": {json.dumps(q): quantiles[q].tolist() for q in levels},
    }


def serve(in_stream, out_stream, config: AdapterConfig | None = None, model_factory=None) -> None:
    """Answer requests line by line until EOF; never crash on one request."""
    if model_factory is None:
        model_factory = make_model_factory(config or AdapterConfig())
    for line in in_stream:
        line = line.strip()
        if not line:
            continue
        request_id = None
        try:
            obj = json.loads(line)
            if not isinstance(obj, dict):
                raise RequestError("request must be a JSON object")
            request_id = obj.get("id")
            if not isinstance(request_id, str):
                raise RequestError("request needs a string id")
            reply = _handle(obj, model_factory)
        except Exception as exc:  # any failure becomes an error reply
            reply = {"id": request_id, "ok": False, "error": f"{type(exc).__name__}: {exc}"}
        out_stream.write(json.dumps(reply) + "\n")
        out_stream.flush()


def serve_stdio(config: AdapterConfig | None = None) -> None:
    serve(sys.stdin, sys.stdout, config=config)


def serve_tcp(host: str, port: int, config: AdapterConfig | None = None) -> None:
    """Serve connections sequentially on a local TCP socket."""
    model_factory = make_model_factory(config or AdapterConfig())
    server = socket.create_server((host, port))
    try:
        while True:
            conn, _ = server.accept()
            with conn, conn.makefile("r", encoding="utf-8") as reader, conn.makefile(
                "w", encoding="utf-8"
            ) as writer:
                serve(reader, writer, model_factory=model_factory)
    finally:
        server.close()
