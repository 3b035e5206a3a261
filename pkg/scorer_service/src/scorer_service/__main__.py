"""Command line entry point: run the service under uvicorn."""

from __future__ import annotations

import argparse

import uvicorn

from .app import MODES, create_app


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(
        prog="scorer-service",
        description="Serve quality scores, embeddings, and perplexity over HTTP.",
    )
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    parser.add_argument(
        "--mode",
        choices=MODES,
        default=None,
        help="backend mode; defaults to $SCORER_MODE, then 'mock'",
    )
    args = parser.parse_args(argv)
    uvicorn.run(create_app(args.mode), host=args.host, port=args.port, log_level="warning")


if __name__ == "__main__":
    main()
