"""mmse-export: encode an image-caption dataset into engine store files.

Default mode writes a retrieval store (queries + text/image document parts)
and qrels. --calibration writes pooled role-tagged samples for the engine's
mean estimation instead. Exit codes: 0 ok, 1 bad input, 2 I/O failure.
"""
from __future__ import annotations

import argparse
import sys

from . import __version__
from .export import ExportJob, export, export_calibration
from .storefmt import ExportError


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="mmse-export",
        description="run text/image encoders over a caption dataset and write embedding stores",
    )
    ap.add_argument("--version", action="version", version=f"mmse-export {__version__}")
    ap.add_argument("--model", required=True,
                    help="checkpoint id, or barcode[:gap=G][:sigma=S] for the offline stub")
    ap.add_argument("--dataset", required=True, help="JSONL manifest path")
    ap.add_argument("--out", required=True, help="store file to write")
    ap.add_argument("--qrels", help="qrels path (default: <out>.qrels; export mode only)")
    ap.add_argument("--batch-size", type=int, default=16)
    ap.add_argument("--device", default="cpu")
    ap.add_argument("--query-mode", choices=("text", "average"), default="text",
                    help="reduce image+text queries to text features or their average")
    ap.add_argument("--calibration", action="store_true",
                    help="write pooled calibration samples instead of a retrieval store")
    ap.add_argument("--samples", type=int, default=10000, help="calibration sample budget")
    ap.add_argument("--profile", default="default", help="calibration profile name")
    ap.add_argument("--roles", default="query,text,image",
                    help="calibration roles to pool, comma separated")
    ap.add_argument("--split", default="train", help="manifest split for calibration pooling")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.calibration:
            n = export_calibration(
                model=args.model, manifest=args.dataset, out=args.out,
                samples=args.samples, profile=args.profile,
                roles=tuple(r.strip() for r in args.roles.split(",") if r.strip()),
                split=args.split, device=args.device, batch_size=args.batch_size,
            )
            print(f"wrote {n} calibration samples (profile {args.profile}) -> {args.out}")
        else:
            job = ExportJob(
                model=args.model, manifest=args.dataset, out=args.out,
                batch_size=args.batch_size, device=args.device,
                query_mode=args.query_mode, qrels_out=args.qrels,
            )
            n_queries, n_parts = export(job)
            print(f"wrote {n_queries} queries, {n_parts} document parts -> {args.out}")
        return 0
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
