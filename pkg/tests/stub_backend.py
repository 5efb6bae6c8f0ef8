"""Minimal external-backend test double speaking the JSON-lines protocol.

Usage: python stub_backend.py MODE [ARG]

Modes:
  mean       valid replies: train-label mean everywhere, empirical
             train-label quantiles as the bands
  error      well-formed ok=false replies
  bad        replies with the literal line given as ARG
  silent     consumes requests, never replies
  die        exits immediately
"""

import json
import sys


def empirical_quantile(sorted_vals, q):
    n = len(sorted_vals)
    if n == 1:
        return sorted_vals[0]
    pos = q * (n - 1)
    lo = int(pos)
    hi = min(lo + 1, n - 1)
    frac = pos - lo
    return sorted_vals[lo] * (1 - frac) + sorted_vals[hi] * frac


def main():
    mode = sys.argv[1] if len(sys.argv) > 1 else "mean"
    if mode == "die":
        return
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        if mode == "silent":
            continue
        if mode == "bad":
            sys.stdout.write(sys.argv[2] + "\n")
            sys.stdout.flush()
            continue
        req = json.loads(line)
        if mode == "error":
            reply = {"id": req.get("id"), "ok": False, "error": "stub failure"}
        else:
            train_y = req["train_y"]
            n_test = len(req["test_x"])
            mean = sum(train_y) / len(train_y)
            svals = sorted(train_y)
            reply = {
                "id": req["id"],
                "ok": True,
                "mean": [mean] * n_test,
                "quantiles": {
                    str(q): [empirical_quantile(svals, q)] * n_test for q in req["quantiles"]
                },
            }
        sys.stdout.write(json.dumps(reply) + "\n")
        sys.stdout.flush()


if __name__ == "__main__":
    main()
