"""Entry point: serve the quantile protocol on stdio or a TCP socket."""

import argparse
import sys

from .models import AdapterConfig
from .server import serve_stdio, serve_tcp


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tabpfn-quantile-adapter",
        description="JSON-lines quantile-regression backend process",
    )
    parser.add_argument("--model", choices=("stub", "tabpfn"), default="tabpfn",
                        help="which regressor serves requests (default: tabpfn)")
    parser.add_argument("--device", default="cpu", help="device hint for the regressor")
    parser.add_argument("--ignore-pretraining-limits", dest="ignore_limits",
                        action="store_true", default=True)
    parser.add_argument("--no-ignore-pretraining-limits", dest="ignore_limits",
                        action="store_false")
    parser.add_argument("--tcp", metavar="HOST:PORT", default=None,
                        help="serve on a TCP socket instead of stdio")
    args = parser.parse_args(argv)

    config = AdapterConfig(
        model=args.model,
        device=args.device,
        ignore_pretraining_limits=args.ignore_limits,
    )
    if args.model == "tabpfn":
        try:
            import tabpfn  # noqa: F401
        except ImportError:
            print("error: tabpfn is not installed; use --model stub for protocol testing",
                  file=sys.stderr)
            return 2
    if args.tcp:
        host, _, port = args.tcp.rpartition(":")
        if not host or not port.isdigit():
            print(f"error: bad --tcp endpoint {args.tcp!r}", file=sys.stderr)
            return 2
        serve_tcp(host, int(port), config=config)
    else:
        serve_stdio(config=config)
    return 0


if __name__ == "__main__":
    sys.exit(main())
