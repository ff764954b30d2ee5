"""Command-line entry point: embed-export --corpus ... --model ... --output ..."""

import argparse
import sys

from .export import ExportConfig, ExportError, export


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="embed-export",
        description="Encode each comment of a Q&A corpus with a pretrained "
        "transformer and write the embedding interchange file.",
    )
    parser.add_argument("--corpus", required=True, help="corpus JSONL path")
    parser.add_argument("--model", required=True, help="model name or local path")
    parser.add_argument("--output", required=True, help="interchange file to write")
    parser.add_argument("--pooling", choices=["first-token", "mean"], default="first-token")
    parser.add_argument(
        "--max-length",
        default="p99",
        help="token length cap: an integer or 'p99' for the corpus 99th percentile",
    )
    parser.add_argument("--batch-size", type=int, default=32)
    args = parser.parse_args(argv)

    max_length = args.max_length if args.max_length == "p99" else int(args.max_length)
    try:
        summary = export(
            ExportConfig(
                corpus=args.corpus,
                model=args.model,
                output=args.output,
                pooling=args.pooling,
                max_length=max_length,
                batch_size=args.batch_size,
            )
        )
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(
        f"wrote {summary['records']} records (dim {summary['dim']}, "
        f"max_length {summary['max_length']}) to {summary['output']}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
