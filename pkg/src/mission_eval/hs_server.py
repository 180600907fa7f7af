"""Run the reference holistic solution behind the wire protocol.

Used for protocol self-tests and as a child-process HS:

    mission-eval evaluate --hs "exec:python -m mission_eval.hs_server" ...

Options restrict the advertised mode set (to exercise negotiation) or serve
on a local TCP socket instead of stdio.
"""

from __future__ import annotations

import argparse
import socket
import sys

from .protocol import serve_stream
from .reference_hs import MODES, ReferenceHs


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="mission-eval-hs")
    parser.add_argument("--modes", default=",".join(MODES),
                        help="comma-separated modes to advertise")
    parser.add_argument("--listen", default=None, metavar="HOST:PORT",
                        help="serve one session on a TCP socket instead of stdio")
    args = parser.parse_args(argv)

    modes = tuple(m for m in args.modes.split(",") if m)
    hs = ReferenceHs(supported_modes=modes)

    if args.listen:
        host, port = args.listen.rsplit(":", 1)
        server = socket.create_server((host, int(port)))
        conn, _ = server.accept()
        with conn:
            rfile = conn.makefile("rb")
            wfile = conn.makefile("wb")
            status = serve_stream(hs, rfile, wfile)
        server.close()
        return status

    return serve_stream(hs, sys.stdin.buffer, sys.stdout.buffer)


if __name__ == "__main__":
    raise SystemExit(main())
