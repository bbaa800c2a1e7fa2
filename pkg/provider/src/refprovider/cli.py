"""Entry point: ``refprovider serve [--transport stdio|http] [--backend ...]``."""

from __future__ import annotations

import argparse
import sys

from .backends import BackendLoadError, load_backend
from .server import ProtocolServer


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="refprovider")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("serve", help="serve the provider protocol")
    p.add_argument("--transport", choices=("stdio", "http"), default="stdio")
    p.add_argument("--port", type=int, default=8941)
    p.add_argument("--backend", choices=("classical", "neural"), default="classical")
    p.add_argument("--model", default=None, help="model name for the neural backend")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        backend = load_backend(args.backend, args.model)
    except BackendLoadError as exc:
        print(f"refprovider: backend startup failed: {exc}", file=sys.stderr)
        return 1
    server = ProtocolServer(backend)
    if args.transport == "stdio":
        server.serve_stdio()
    else:
        server.serve_http(args.port)
    return 0


if __name__ == "__main__":
    sys.exit(main())
