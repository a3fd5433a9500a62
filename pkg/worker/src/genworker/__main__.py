"""Entry point: ``python -m genworker [--mode fake|real] [--tcp PORT]``."""

import argparse
import sys

from .server import serve_stdio, serve_tcp
from .service import Service, WorkerConfig, resolve_mode


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="genworker",
        description="Generative-operator worker (newline-delimited JSON protocol).",
    )
    parser.add_argument("--mode", choices=("fake", "real"), default="fake")
    parser.add_argument(
        "--tcp", type=int, default=None, metavar="PORT", help="listen on TCP instead of stdio"
    )
    args = parser.parse_args(argv)

    config = WorkerConfig(mode=args.mode, tcp_port=args.tcp)
    mode, warning = resolve_mode(config.mode)
    if warning:
        print(f"warning: {warning}", file=sys.stderr)
    service = Service(mode=mode)
    if config.tcp_port is not None:
        serve_tcp(service, config.tcp_port)
    else:
        serve_stdio(service)
    return 0


if __name__ == "__main__":
    sys.exit(main())
