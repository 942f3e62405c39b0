"""CLI: encode a dataset's texts and write the binary embedding cache.

    embed-exporter --dataset data.tsv --format tsv \
        --encoder hash:64 --out embeddings.slce --normalize

Exit codes: 0 success, 2 bad arguments/encoder, 3 dataset/export failure.
"""

from __future__ import annotations

import argparse
import sys

from .encoders import DEFAULT_ENCODER, EncoderError
from .export import ExportError, ExportJob, run_export


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="embed-exporter", description=__doc__)
    parser.add_argument("--dataset", required=True, help="TSV/CSV/JSONL file with a text column")
    parser.add_argument("--format", default="tsv", choices=["tsv", "csv", "jsonl"])
    parser.add_argument("--text-col", dest="text_col", default="text")
    parser.add_argument("--id-col", dest="id_col", default=None)
    parser.add_argument("--encoder", default=DEFAULT_ENCODER,
                        help="sentence-transformers model name, or hash:<width> for the offline encoder")
    parser.add_argument("--pooling", choices=["mean", "cls", "max"], default=None,
                        help="pooling mode when assembling an encoder from a raw transformer")
    parser.add_argument("--out", required=True, help="output cache path")
    parser.add_argument("--batch-size", dest="batch_size", type=int, default=32)
    parser.add_argument("--normalize", action="store_true", help="L2-normalize rows")
    parser.add_argument("--device", default="cpu")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    job = ExportJob(
        dataset=args.dataset,
        out=args.out,
        format=args.format,
        text_col=args.text_col,
        id_col=args.id_col,
        encoder=args.encoder,
        pooling=args.pooling,
        batch_size=args.batch_size,
        normalize=args.normalize,
        device=args.device,
    )
    try:
        result = run_export(job)
    except EncoderError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ExportError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    print(f"wrote {result.count} x {result.width} embeddings to {result.path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
