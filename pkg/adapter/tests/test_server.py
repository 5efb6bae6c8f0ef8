import io
import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from tabpfn_adapter.models import AdapterConfig, StubModel, make_model_factory
from tabpfn_adapter.server import serve

SRC = Path(__file__).resolve().parents[1] / "src"


def run_serve(lines, model_factory=None):
    """Drive the serve loop in-process and return the parsed replies."""
    out = io.StringIO()
    serve(io.StringIO("\n".join(lines) + "\n"), out,
          config=AdapterConfig(model="stub"), model_factory=model_factory)
    return [json.loads(line) for line in out.getvalue().splitlines()]


def predict_request(request_id="r1", train_y=(1.0, 2.0, 3.0), n_test=2, width=1,
                    quantiles=(0.15, 0.85), seed=0):
    return json.dumps({
        "id": request_id,
        "op": "predict",
        "train_x": [[0.0] * width for _ in train_y],
        "train_y": list(train_y),
        "test_x": [[0.0] * width for _ in range(n_test)],
        "quantiles": list(quantiles),
        "seed": seed,
    })


class TestServeLoop:
    def test_valid_request(self):
        replies = run_serve([predict_request()])
        (reply,) = replies
        assert reply["id"] == "r1"
        assert reply["ok"] is True
        assert reply["mean"] == [2.0, 2.0]
        assert set(reply["quantiles"]) == {"0.15", "0.85"}
        assert all(len(v) == 2 for v in reply["quantiles"].values())

    def test_echo_single_point(self):
        replies = run_serve([predict_request(train_y=(4.2,), n_test=1)])
        (reply,) = replies
        assert reply["mean"] == [4.2]
        assert all(v == [4.2] for v in reply["quantiles"].values())

    def test_wide_feature_request_accepted(self):
        replies = run_serve([predict_request(width=574)])
        assert replies[0]["ok"] is True

    def test_malformed_lines_keep_loop_alive(self):
        lines = [
            "this is not json",
            '{"op": "predict"}',
            '{"id": 5, "op": "predict"}',
            '{"id": "a", "op": "wrong"}',
            '{"id": "b", "op": "predict", "train_x": [[0]], "train_y": [0.1]}',
            '{"id": "c", "op": "predict", "train_x": [["x"]], "train_y": [0.1],'
            ' "test_x": [[0]], "quantiles": [0.5]}',
            predict_request("tail"),
        ]
        replies = run_serve(lines)
        assert len(replies) == 7
        assert all(r["ok"] is False for r in replies[:-1])
        assert all("error" in r for r in replies[:-1])
        assert replies[-1]["ok"] is True and replies[-1]["id"] == "tail"

    def test_unreadable_id_replies_null_id(self):
        replies = run_serve(["[1, 2, 3]"])
        assert replies[0]["id"] is None
        assert replies[0]["ok"] is False

    def test_bad_quantiles_rejected(self):
        replies = run_serve([predict_request(quantiles=(0.85, 0.15))])
        assert replies[0]["ok"] is False

    def test_deterministic_replies(self):
        a = run_serve([predict_request(seed=7)])
        b = run_serve([predict_request(seed=7)])
        assert a == b

    def test_monotone_enforced_on_misbehaving_model(self):
        class BadModel:
            def __init__(self, seed=0):
                pass

            def fit(self, x, y):
                return self

            def predict_mean(self, test_x):
                return np.zeros(len(test_x))

            def predict_quantiles(self, test_x, levels):
                n = len(test_x)
                # deliberately decreasing in the level
                return {q: np.full(n, 1.0 - q) for q in levels}

        replies = run_serve([predict_request(quantiles=(0.15, 0.5, 0.85))],
                            model_factory=lambda seed: BadModel(seed))
        (reply,) = replies
        assert reply["ok"] is True
        vectors = [reply["quantiles"][k] for k in ("0.15", "0.5", "0.85")]
        for lo, hi in zip(vectors, vectors[1:]):
            assert all(a <= b for a, b in zip(lo, hi))

    def test_non_finite_model_output_is_error(self):
        class NanModel:
            def __init__(self, seed=0):
                pass

            def fit(self, x, y):
                return self

            def predict_mean(self, test_x):
                return np.full(len(test_x), np.nan)

            def predict_quantiles(self, test_x, levels):
                return {q: np.zeros(len(test_x)) for q in levels}

        replies = run_serve([predict_request()], model_factory=lambda seed: NanModel(seed))
        assert replies[0]["ok"] is False


class TestModels:
    def test_stub_quantiles_monotone(self):
        model = StubModel(AdapterConfig(), seed=0).fit(np.zeros((5, 2)), np.arange(5.0))
        out = model.predict_quantiles(np.zeros((3, 2)), [0.1, 0.5, 0.9])
        assert out[0.1][0] <= out[0.5][0] <= out[0.9][0]

    def test_factory_rejects_unknown_model(self):
        with pytest.raises(ValueError):
            make_model_factory(AdapterConfig(model="mystery"))

    def test_tabpfn_factory_requires_library(self):
        pytest.importorskip("tabpfn", reason="real regressor not installed")


class TestSubprocess:
    def test_stdio_round_trip(self):
        env = dict(os.environ)
        env["PYTHONPATH"] = str(SRC) + os.pathsep + env.get("PYTHONPATH", "")
        requests = "\n".join([predict_request("a"), "garbage", predict_request("b")]) + "\n"
        proc = subprocess.run(
            [sys.executable, "-m", "tabpfn_adapter", "--model", "stub"],
            input=requests, capture_output=True, text=True, env=env, timeout=60,
        )
        assert proc.returncode == 0, proc.stderr
        replies = [json.loads(line) for line in proc.stdout.splitlines()]
        assert [r["id"] for r in replies] == ["a", None, "b"]
        assert [r["ok"] for r in replies] == [True, False, True]

    def test_cli_rejects_bad_tcp(self):
        env = dict(os.environ)
        env["PYTHONPATH"] = str(SRC) + os.pathsep + env.get("PYTHONPATH", "")
        proc = subprocess.run(
            [sys.executable, "-m", "tabpfn_adapter", "--model", "stub", "--tcp", "nope"],
            capture_output=True, text=True, env=env, timeout=30,
        )
        assert proc.returncode == 2
