"""Command line entry point for the adapter."""

from __future__ import annotations

import argparse
import sys

from .core import AdapterConfig, AdapterError, interchange_record, read_corpus, write_atomic
from .mock import mock_tokens

MOCK_MODEL = "mock:gold"


def run(config: AdapterConfig, in_path: str, out_path: str) -> int:
    documents = read_corpus(in_path)
    if config.model == MOCK_MODEL:
        predict = mock_tokens
    else:
        from .hf import CheckpointRunner

        predict = CheckpointRunner(config).predict_document
    lines = (
        interchange_record(document.id, config.coords, predict(document))
        for document in documents
    )
    write_atomic(out_path, lines)
    print(f"wrote predictions for {len(documents)} documents", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="onconer-adapter",
        description=(
            "Run a transformer token-classification checkpoint (or the "
            f"{MOCK_MODEL} oracle) over a report corpus and write the "
            "prediction interchange."
        ),
    )
    parser.add_argument("--model", required=True,
                        help=f"checkpoint path, or {MOCK_MODEL} for gold one-hots")
    parser.add_argument("--in", dest="infile", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--max-len", type=int, default=512)
    parser.add_argument("--stride", type=int, default=128,
                        help="overlap between windows of long documents")
    parser.add_argument("--batch-size", type=int, default=8)
    parser.add_argument("--coords", choices=("raw", "clean"), default="raw",
                        help="which text the corpus offsets refer to")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = AdapterConfig(
            model=args.model,
            max_len=args.max_len,
            stride=args.stride,
            batch_size=args.batch_size,
            coords=args.coords,
        )
        return run(config, args.infile, args.out)
    except (AdapterError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
