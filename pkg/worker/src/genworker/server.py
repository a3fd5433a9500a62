"""Transports: stdio line loop (default) and a line-oriented TCP server."""

from __future__ import annotations

import socketserver
import sys

from .service import Service


def serve_stdio(service: Service) -> None:
    """Read requests from stdin, answer on stdout, one JSON object per line."""
    for raw in sys.stdin.buffer:
        line = raw.decode("utf-8", errors="replace").strip()
        if not line:
            continue
        sys.stdout.write(service.handle_line(line) + "\n")
        sys.stdout.flush()


def serve_tcp(service: Service, port: int) -> None:
    """Threaded TCP server; requests on one connection are handled in order."""

    class Handler(socketserver.StreamRequestHandler):
        def handle(self):
            for raw in self.rfile:
                line = raw.decode("utf-8", errors="replace").strip()
                if not line:
                    continue
                self.wfile.write((service.handle_line(line) + "\n").encode("utf-8"))
                self.wfile.flush()

    class Server(socketserver.ThreadingTCPServer):
        allow_reuse_address = True
        daemon_threads = True

    with Server(("127.0.0.1", port), Handler) as server:
        print(f"listening on tcp port {server.server_address[1]}", file=sys.stderr)
        server.serve_forever()
