"""Launcher CLI: start the service or generate the bundled sample database."""

from __future__ import annotations

import argparse
import os
import sys

from .http_api import ServiceConfig, serve
from .sample_db import create_sample_database
from .sql_executor import ExecLimits


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clearquery")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("serve", help="start the HTTP service")
    run.add_argument("--db", required=True, help="path to the SQLite database file")
    run.add_argument("--port", type=int, default=8000)
    run.add_argument("--host", default="127.0.0.1")
    run.add_argument("--store-dir", default=None, help="directory for persisted sessions")
    run.add_argument("--provider", choices=["scripted", "replay", "live"], default="live")
    run.add_argument("--script", default=None, help="transcript file for scripted/replay providers")
    run.add_argument("--ui-dir", default=None, help="directory of built UI assets to serve at /")
    run.add_argument("--max-preview-rows", type=int, default=100)
    run.add_argument("--timeout", type=float, default=5.0, help="per-statement timeout in seconds")

    sample = sub.add_parser("sample-db", help="write the bundled sample database")
    sample.add_argument("path", nargs="?", default="fixtures/schools.sqlite")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "sample-db":
        out = create_sample_database(args.path)
        print(f"wrote {out}")
        return 0

    config = ServiceConfig(
        db_path=args.db,
        store_dir=args.store_dir,
        provider=args.provider,
        script_path=args.script,
        llm_endpoint=os.environ.get("LLM_ENDPOINT", ""),
        llm_model=os.environ.get("LLM_MODEL", ""),
        llm_api_key=os.environ.get("LLM_API_KEY", ""),
        host=args.host,
        port=args.port,
        ui_dir=args.ui_dir,
        limits=ExecLimits(max_preview_rows=args.max_preview_rows, timeout=args.timeout),
    )
    serve(config)
    return 0


if __name__ == "__main__":
    sys.exit(main())
