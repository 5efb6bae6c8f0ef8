"""JSON-lines wire protocol for external quantile backends.

One JSON object per line, numbers as decimal doubles, requests and
responses matched by ``id``; a backend may answer requests in any order.

Request::

    {"id": "<string>", "op": "predict", "train_x": [[...]], "train_y": [...],
     "test_x": [[...]], "quantiles": [0.15, 0.85], "seed": <int>}

Response::

    {"id": "<string>", "ok": true, "mean": [...],
     "quantiles": {"0.15": [...], "0.85": [...]}}
    {"id": "<string>", "ok": false, "error": "<string>"}

The transport is either a child process's standard streams or a local
TCP socket.  Every reply is validated against the quantile-prediction
invariants before it is accepted; violations raise ``ProtocolError``.
"""

from __future__ import annotations

import json
import math
import os
import queue
import shlex
import socket
import subprocess
import threading

import numpy as np

from .backends import QuantilePrediction, validate_quantile_levels
from .errors import (
    BackendReplyError,
    BackendTimeoutError,
    BackendUnavailableError,
    ProtocolError,
)

PROTOCOL_VERSION = 1
DEFAULT_TIMEOUT = 600.0


def encode_request(request_id: str, train_x, train_y, test_x, quantile_levels, seed: int) -> str:
    levels = validate_quantile_levels(quantile_levels)
    payload = {
        "id": request_id,
        "op": "predict",
        "train_x": np.asarray(train_x, dtype=float).tolist(),
        "train_y": np.asarray(train_y, dtype=float).tolist(),
        "test_x": np.asarray(test_x, dtype=float).tolist(),
        "quantiles": list(levels),
        "seed": int(seed),
    }
    return json.dumps(payload)


def _require_float_list(obj, n: int, what: str) -> np.ndarray:
    if not isinstance(obj, list):
        raise ProtocolError(f"{what} must be a list, got {type(obj).__name__}")
    if len(obj) != n:
        raise ProtocolError(f"{what} has length {len(obj)}, expected {n}")
    out = np.empty(n)
    for i, v in enumerate(obj):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ProtocolError(f"{what}[{i}] is not a number: {v!r}")
        if not math.isfinite(v):
            raise ProtocolError(f"{what}[{i}] is not finite: {v!r}")
        out[i] = float(v)
    return out


def decode_reply(line: str) -> dict:
    """Parse one reply line into a dict; anything non-conforming is a
    ``ProtocolError``."""
    try:
        obj = json.loads(line)
    except (json.JSONDecodeError, ValueError) as exc:
        raise ProtocolError(f"reply is not valid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise ProtocolError(f"reply must be a JSON object, got {type(obj).__name__}")
    return obj


def build_prediction(reply: dict, *, request_id: str, n_test: int, quantile_levels) -> QuantilePrediction:
    """Validate a decoded reply and convert it into a prediction.

    Enforces id matching, the ok flag, field presence/typing, vector
    lengths, finiteness, level agreement, and quantile monotonicity.
    """
    levels = validate_quantile_levels(quantile_levels)
    if "id" not in reply:
        raise ProtocolError("reply is missing 'id'")
    if reply["id"] != request_id:
        raise ProtocolError(f"reply id {reply['id']!r} does not match request id {request_id!r}")
    ok = reply.get("ok")
    if ok is False:
        error = reply.get("error")
        raise BackendReplyError(str(error) if error is not None else "backend reported failure")
    if ok is not True:
        raise ProtocolError(f"reply 'ok' must be true or false, got {reply.get('ok')!r}")
    if "mean" not in reply:
        raise ProtocolError("reply is missing 'mean'")
    if "quantiles" not in reply:
        raise ProtocolError("reply is missing 'quantiles'")
    mean = _require_float_list(reply["mean"], n_test, "mean")
    raw_q = reply["quantiles"]
    if not isinstance(raw_q, dict):
        raise ProtocolError(f"'quantiles' must be an object, got {type(raw_q).__name__}")
    quantiles: dict[float, np.ndarray] = {}
    for key, vec in raw_q.items():
        try:
            level = float(key)
        except (TypeError, ValueError):
            raise ProtocolError(f"quantile key {key!r} is not a number") from None
        quantiles[level] = _require_float_list(vec, n_test, f"quantiles[{key}]")
    if tuple(sorted(quantiles)) != levels:
        raise ProtocolError(
            f"reply quantile levels {tuple(sorted(quantiles))} do not match requested {levels}"
        )
    prediction = QuantilePrediction(mean=mean, quantiles=quantiles)
    try:
        prediction.validate(n_test=n_test, levels=levels)
    except ValueError as exc:
        raise ProtocolError(f"reply violates prediction invariants: {exc}") from None
    return prediction


class _LineChannel:
    """A line-oriented duplex channel with a background reader thread."""

    _CLOSED = object()

    def __init__(self):
        self._queue: queue.Queue = queue.Queue()

    def _start_reader(self, stream):
        def pump():
            try:
                for line in stream:
                    self._queue.put(line)
            except (OSError, ValueError):
                pass
            self._queue.put(self._CLOSED)

        thread = threading.Thread(target=pump, daemon=True)
        thread.start()

    def recv_line(self, timeout: float) -> str:
        try:
            item = self._queue.get(timeout=timeout)
        except queue.Empty:
            raise BackendTimeoutError(f"no reply within {timeout} s") from None
        if item is self._CLOSED:
            raise BackendUnavailableError("backend closed the connection")
        return item

    def send_line(self, line: str) -> None:
        raise NotImplementedError

    def close(self) -> None:
        raise NotImplementedError


class SubprocessChannel(_LineChannel):
    """Child process speaking the protocol over its standard streams."""

    def __init__(self, command: list[str] | str, env: dict | None = None):
        super().__init__()
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        full_env = dict(os.environ, **env) if env else None
        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
                env=full_env,
            )
        except OSError as exc:
            raise BackendUnavailableError(f"failed to start backend {argv!r}: {exc}") from None
        self._start_reader(self._proc.stdout)

    def send_line(self, line: str) -> None:
        try:
            self._proc.stdin.write(line + "\n")
            self._proc.stdin.flush()
        except (OSError, ValueError, BrokenPipeError) as exc:
            raise BackendUnavailableError(f"backend process is gone: {exc}") from None

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()


class TcpChannel(_LineChannel):
    """Local TCP socket speaking the protocol, one JSON object per line."""

    def __init__(self, host: str, port: int, connect_timeout: float = 10.0):
        super().__init__()
        try:
            self._sock = socket.create_connection((host, port), timeout=connect_timeout)
        except OSError as exc:
            raise BackendUnavailableError(f"cannot connect to {host}:{port}: {exc}") from None
        self._sock.settimeout(None)
        self._reader = self._sock.makefile("r", encoding="utf-8", newline="\n")
        self._writer = self._sock.makefile("w", encoding="utf-8", newline="\n")
        self._start_reader(self._reader)

    def send_line(self, line: str) -> None:
        try:
            self._writer.write(line + "\n")
            self._writer.flush()
        except OSError as exc:
            raise BackendUnavailableError(f"backend socket is gone: {exc}") from None

    def close(self) -> None:
        # Shut the socket down first: it unblocks the reader thread's
        # readline, releasing the file lock the wrapper close() needs.
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        for closer in (self._sock.close, self._writer.close, self._reader.close):
            try:
                closer()
            except (OSError, ValueError):
                pass


class ExternalBackend:
    """Wire-protocol client implementing the shared backend contract.

    The channel is created lazily on first use.  One instance owns one
    connection and is not safe for concurrent use; ``for_worker`` hands
    each worker its own connection.
    """

    def __init__(self, channel_factory, timeout: float = DEFAULT_TIMEOUT):
        self._channel_factory = channel_factory
        self._channel: _LineChannel | None = None
        self._counter = 0
        self.timeout = timeout

    def _ensure_channel(self) -> _LineChannel:
        if self._channel is None:
            self._channel = self._channel_factory()
        return self._channel

    def quantile_predict(
        self, train_x, train_y, test_x, quantile_levels=(0.15, 0.85), seed: int = 0
    ) -> QuantilePrediction:
        levels = validate_quantile_levels(quantile_levels)
        n_test = np.asarray(test_x).shape[0]
        self._counter += 1
        request_id = f"req-{self._counter}"
        channel = self._ensure_channel()
        channel.send_line(encode_request(request_id, train_x, train_y, test_x, levels, seed))
        reply = decode_reply(channel.recv_line(self.timeout))
        return build_prediction(
            reply, request_id=request_id, n_test=n_test, quantile_levels=levels
        )

    def for_worker(self) -> "ExternalBackend":
        return ExternalBackend(self._channel_factory, timeout=self.timeout)

    def close(self) -> None:
        if self._channel is not None:
            self._channel.close()
            self._channel = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def external_backend(endpoint: str, timeout: float = DEFAULT_TIMEOUT) -> ExternalBackend:
    """Client for ``tcp:<host>:<port>`` or a child-process command line."""
    if endpoint.startswith("tcp:"):
        rest = endpoint[len("tcp:"):]
        host, _, port = rest.rpartition(":")
        if not host or not port.isdigit():
            raise ValueError(f"bad TCP endpoint {endpoint!r}; expected tcp:<host>:<port>")
        return ExternalBackend(lambda: TcpChannel(host, int(port)), timeout=timeout)
    if not endpoint.strip():
        raise ValueError("empty backend endpoint")
    return ExternalBackend(lambda: SubprocessChannel(endpoint), timeout=timeout)
