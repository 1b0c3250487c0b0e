"""Command line for bulk extraction and the embedding sidecar."""

from __future__ import annotations

import argparse
import sys

from .core import AutoregressiveModelError, ModelBackend, extract_corpus


def _parse_model_arg(spec: str) -> tuple[str, str]:
    """'name=path' registers under name; a bare path registers under itself."""
    name, sep, path = spec.partition("=")
    return (name, path) if sep else (spec, spec)


def cmd_extract(args: argparse.Namespace) -> int:
    backend = ModelBackend(args.model)
    layers = [int(x) for x in args.layers.split(",")]
    count = extract_corpus(args.corpus, backend, layers, args.out)
    print(f"{count} records -> {args.out}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .sidecar import create_app

    backends = {}
    for spec in args.model:
        name, path = _parse_model_arg(spec)
        backends[name] = ModelBackend(path)
    uvicorn.run(create_app(backends), host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fs-extract",
        description="Contextual word embedding extraction for masked LMs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="embed a corpus into ingestion JSONL")
    p.add_argument("--corpus", required=True, help="newline-delimited sentences")
    p.add_argument("--model", required=True, help="model name or checkpoint path")
    p.add_argument("--layers", required=True, help="comma-separated layer indices")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("serve", help="run the embedding HTTP sidecar")
    p.add_argument("--model", action="append", required=True,
                   help="model to load: NAME=PATH or a bare name/path; repeatable")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8001)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (AutoregressiveModelError, ValueError, OSError, RuntimeError) as exc:
        print(f"fs-extract: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
