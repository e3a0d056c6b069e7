"""Command-line pipeline: synth, calibrate, build-corpus, search, eval,
sweep, simulate.

Every run prints a reproducibility header (version, seeds, input digests,
flags) to stdout. Output files are written atomically and contain no
timestamps, so identical invocations produce byte-identical files.
Exit codes: 0 success, 1 validation error, 2 I/O or file-format error.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import __version__
from .core import Modality, ValidationError
from . import calibration, corpusops, fusion, metrics, search, store, synth


def _parse_grid(text: str) -> list[float]:
    """Accept `start:stop:step` (inclusive) or a comma-separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValidationError(f"grid must be start:stop:step, got {text!r}")
        start, stop, step = (float(x) for x in parts)
        if step <= 0:
            raise ValidationError(f"grid step must be positive, got {step}")
        n = int(round((stop - start) / step))
        values = [round(start + i * step, 10) for i in range(n + 1)]
        return [v for v in values if v <= stop + 1e-9]
    return [float(x) for x in text.split(",") if x.strip()]


def _parse_ks(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


def _parse_ratios(text: str) -> tuple[float, float, float]:
    parts = [float(x) for x in text.split(":")]
    if len(parts) != 3:
        raise ValidationError(f"ratios must be text:image:multimodal, got {text!r}")
    return (parts[0], parts[1], parts[2])


def _parse_override(text: str) -> search.ScoreOverride:
    pred, sep, value_s = text.rpartition(":")
    if not sep:
        raise ValidationError(f"override must be <predicate>:<value>, got {text!r}")
    value = float(value_s)
    if pred.startswith("modality="):
        return search.ScoreOverride(value=value, modality=Modality.parse(pred[len("modality="):]))
    if pred.startswith("ids="):
        return search.ScoreOverride(value=value, ids=frozenset(pred[len("ids="):].split(",")))
    raise ValidationError(f"override predicate must be modality=... or ids=..., got {pred!r}")


def _threads(args) -> int:
    if getattr(args, "threads", None):
        return args.threads
    env = os.environ.get("MIXSEARCH_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _print_header(args, inputs: list[str]) -> None:
    print(f"# mixsearch {__version__}")
    for path in inputs:
        print(f"# input {path} fnv1a64={store.file_digest(path)}")
    skip = {"func", "command", "config"}
    flags = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    rendered = " ".join(f"{k}={v}" for k, v in flags.items())
    print(f"# flags {rendered}")


def _load_corpus(path: str, prenormalize: bool):
    corpus, queries = store.assemble_corpus(store.read_store(path))
    if prenormalize:
        corpus = calibration.normalize_corpus(corpus)
        queries = calibration.normalize_queries(queries)
    return corpus, queries


def _resolve_means(args, corpus, queries):
    """--means loads a profile; --self-calibrate computes one in place."""
    if getattr(args, "self_calibrate", False):
        return calibration.compute_means(calibration.corpus_calibration_records(corpus, queries))
    if getattr(args, "means", None):
        return calibration.load_means(args.means)
    return None


def _sweep_csv(rows, key_name: str) -> str:
    lines = [f"{key_name},ndcg10,ndcg100,recall1"]
    for value, report in rows:
        agg = report.aggregate
        lines.append(
            f"{value:g},{agg['ndcg@10']:.6f},{agg['ndcg@100']:.6f},{agg['recall@1']:.6f}"
        )
    return "".join(line + "\n" for line in lines)


def _echo_rows(rows, key_name: str) -> None:
    print(f"{key_name:>8}  ndcg@10  ndcg@100  recall@1")
    for value, report in rows:
        agg = report.aggregate
        print(f"{value:>8g}  {agg['ndcg@10']:.4f}   {agg['ndcg@100']:.4f}    {agg['recall@1']:.4f}")


def cmd_synth(args) -> int:
    config = synth.SynthConfig(
        dimension=args.d,
        n_docs=args.n,
        n_queries=args.n_queries if args.n_queries is not None else args.n,
        gap_magnitude=args.gap,
        noise_sigma=args.sigma,
        semantic_dim=args.semantic_dim,
        seed=args.seed,
        gap_jitter=args.gap_jitter,
        signal_mode=args.signal_mode,
        random_gap_direction=args.random_gap_direction,
        normalize_outputs=not args.raw_outputs,
    )
    _print_header(args, [])
    corpus, queries, qrels = synth.generate(config)
    store.write_store(store.corpus_records(corpus, queries), args.out)
    qrels_path = args.qrels or args.out + ".qrels"
    store.save_qrels(qrels, qrels_path)
    print(f"wrote {len(corpus)} paired documents, {len(queries)} queries -> {args.out}")
    print(f"wrote qrels -> {qrels_path}")
    return 0


def cmd_calibrate(args) -> int:
    _print_header(args, [args.input])
    corpus, queries = _load_corpus(args.input, not args.no_prenormalize)
    records = calibration.corpus_calibration_records(corpus, queries)
    if args.keys:
        wanted = set()
        for item in args.keys.split(","):
            role_s, _, modality_s = item.partition(":")
            wanted.add(calibration.MeanKey(store.Role.parse(role_s), Modality.parse(modality_s)))
        records = [(key, vec) for key, vec in records if key in wanted]
    means = calibration.compute_means(records)
    calibration.save_means(means, args.out)
    for key in sorted(means.means, key=lambda k: (k.role.value, k.modality.value)):
        print(f"mean ({key.role}, {key.modality}): {means.sample_counts[key]} samples")
    print(f"wrote means -> {args.out}")
    return 0


def cmd_build_corpus(args) -> int:
    _print_header(args, [args.input])
    corpus, queries = _load_corpus(args.input, prenormalize=False)
    if args.mode == "replace":
        plan = corpusops.ReplacementPlan(
            p=args.p,
            mode=corpusops.ReplacementMode.parse(args.replacement),
            seed=args.seed,
            source_modality=Modality.parse(args.source),
            target_modality=Modality.parse(args.target),
        )
        corpus, mask = corpusops.apply_replacement(corpus, plan)
        if args.mask_out:
            store.atomic_write_text(args.mask_out, "".join(i + "\n" for i in sorted(mask)))
            print(f"wrote {len(mask)} masked ids -> {args.mask_out}")
    else:
        plan = corpusops.MixPlan(ratios=_parse_ratios(args.ratios), seed=args.seed)
        corpus = corpusops.apply_mix(corpus, plan)
    store.write_store(store.corpus_records(corpus, queries), args.out)
    print(f"wrote {len(corpus)} documents -> {args.out}")
    return 0


def cmd_search(args) -> int:
    _print_header(args, [args.store] + ([args.means] if args.means else []))
    corpus, queries = _load_corpus(args.store, not args.no_prenormalize)
    if not queries:
        raise ValidationError(f"{args.store}: store contains no query records")
    means = _resolve_means(args, corpus, queries)
    overrides = tuple(_parse_override(o) for o in args.override or [])
    run = search.run_retrieval(
        queries,
        corpus,
        args.k,
        spec=fusion.FusionSpec(alpha=args.alpha),
        calibrated=means is not None,
        means=means,
        overrides=overrides,
        run_tag=args.run_tag,
        threads=_threads(args),
    )
    search.save_run(run, args.out)
    print(f"ranked {len(queries)} queries, k={args.k} -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    _print_header(args, [args.run, args.qrels])
    run = search.load_run(args.run)
    qrels = store.load_qrels(args.qrels)
    report = metrics.evaluate_run(run, qrels, k_values=_parse_ks(args.k), recall1=args.recall1)
    for name in sorted(report.aggregate):
        print(f"{name:<12} {report.aggregate[name]:.6f}")
    if args.out:
        store.atomic_write_text(args.out, metrics.report_csv(report))
        print(f"wrote per-query metrics -> {args.out}")
    return 0


def cmd_sweep(args) -> int:
    if (args.alpha_grid is None) == (args.p_grid is None):
        raise ValidationError("specify exactly one of --alpha-grid / --p-grid")
    _print_header(args, [args.store, args.qrels] + ([args.means] if args.means else []))
    corpus, queries = _load_corpus(args.store, not args.no_prenormalize)
    qrels = store.load_qrels(args.qrels)
    means = _resolve_means(args, corpus, queries)
    if args.calibrated and means is None:
        raise ValidationError("--calibrated needs --means or --self-calibrate")

    if args.alpha_grid is not None:
        rows = fusion.alpha_sweep(
            corpus, queries, qrels, _parse_grid(args.alpha_grid),
            calibrated=args.calibrated, means=means, threads=_threads(args),
        )
        key = "alpha"
    else:
        rows = corpusops.p_sweep(
            corpus, queries, qrels, _parse_grid(args.p_grid),
            calibrated=args.calibrated, means=means,
            mode=corpusops.ReplacementMode.parse(args.replacement), seed=args.seed,
            source_modality=Modality.parse(args.source),
            target_modality=Modality.parse(args.target),
            threads=_threads(args),
        )
        key = "p"
    _echo_rows(rows, key)
    if args.out:
        store.atomic_write_text(args.out, _sweep_csv(rows, key))
        print(f"wrote sweep -> {args.out}")
    return 0


def cmd_simulate(args) -> int:
    _print_header(args, [args.store, args.qrels])
    corpus, queries = _load_corpus(args.store, not args.no_prenormalize)
    qrels = store.load_qrels(args.qrels)
    rows = corpusops.pushdown_sweep(
        corpus, queries, qrels, _parse_grid(args.p_grid),
        mode=corpusops.ReplacementMode.parse(args.replacement), seed=args.seed,
        source_modality=Modality.parse(args.source),
        target_modality=Modality.parse(args.target),
    )
    _echo_rows(rows, "p")
    if args.out:
        store.atomic_write_text(args.out, _sweep_csv(rows, "p"))
        print(f"wrote simulated sweep -> {args.out}")
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value file supplying flag defaults")
    p.add_argument("--threads", type=int, help="worker threads (default: MIXSEARCH_THREADS or all cores)")


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="mixsearch",
        description="mixed-modality retrieval engine with modality-gap calibration",
    )
    parser.add_argument("--version", action="version", version=f"mixsearch {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    subs: dict[str, argparse.ArgumentParser] = {}

    p = sub.add_parser("synth", help="generate a gapped synthetic corpus")
    p.add_argument("--d", type=int, default=64)
    p.add_argument("--semantic-dim", type=int, default=32)
    p.add_argument("--n", type=int, default=1000, help="number of documents")
    p.add_argument("--n-queries", type=int, default=None, help="defaults to --n")
    p.add_argument("--gap", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--gap-jitter", type=float, default=0.0)
    p.add_argument("--signal-mode", choices=("shared", "split"), default="shared")
    p.add_argument("--random-gap-direction", action="store_true")
    p.add_argument("--raw-outputs", action="store_true", help="skip output normalization")
    p.add_argument("--out", required=True, help="store file to write")
    p.add_argument("--qrels", help="qrels path (default: <out>.qrels)")
    p.set_defaults(func=cmd_synth)
    subs["synth"] = p

    p = sub.add_parser("calibrate", help="compute role/modality means from a store")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--keys", help="restrict to Role:Modality pairs, comma separated")
    p.add_argument("--no-prenormalize", action="store_true")
    p.set_defaults(func=cmd_calibrate)
    subs["calibrate"] = p

    p = sub.add_parser("build-corpus", help="replacement or mix restructuring of a paired store")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=("replace", "mix"), required=True)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--replacement", default="ExactCount", help="Bernoulli or ExactCount")
    p.add_argument("--ratios", default="1:1:1")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--source", default="Text")
    p.add_argument("--target", default="Image")
    p.add_argument("--mask-out", help="write replaced doc ids, one per line")
    p.set_defaults(func=cmd_build_corpus)
    subs["build-corpus"] = p

    p = sub.add_parser("search", help="rank stored queries against the store's documents")
    p.add_argument("--store", required=True)
    p.add_argument("--means", help="means profile; enables calibration")
    p.add_argument("--self-calibrate", action="store_true")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--override", action="append", help="modality=<tag>:<value> or ids=<a,b>:<value>")
    p.add_argument("--run-tag", default="mixsearch")
    p.add_argument("--no-prenormalize", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_search)
    subs["search"] = p

    p = sub.add_parser("eval", help="score a run file against qrels")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--k", default="10,100")
    p.add_argument("--recall1", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--out", help="long-form CSV destination")
    p.set_defaults(func=cmd_eval)
    subs["eval"] = p

    p = sub.add_parser("sweep", help="alpha or p sweep with CSV output")
    p.add_argument("--store", required=True, help="paired-modality store")
    p.add_argument("--qrels", required=True)
    p.add_argument("--alpha-grid")
    p.add_argument("--p-grid")
    p.add_argument("--calibrated", action="store_true")
    p.add_argument("--means")
    p.add_argument("--self-calibrate", action="store_true")
    p.add_argument("--replacement", default="ExactCount")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--source", default="Text")
    p.add_argument("--target", default="Image")
    p.add_argument("--no-prenormalize", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)
    subs["sweep"] = p

    p = sub.add_parser("simulate", help="push-down simulation over a p grid")
    p.add_argument("--pushdown", action="store_true", help="accepted for clarity; the only mode")
    p.add_argument("--store", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--p-grid", required=True)
    p.add_argument("--replacement", default="ExactCount")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--source", default="Text")
    p.add_argument("--target", default="Image")
    p.add_argument("--no-prenormalize", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)
    subs["simulate"] = p

    for sp in subs.values():
        _add_common(sp)
    return parser, subs


def _load_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValidationError(f"{path}:{lineno}: expected key=value")
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def _apply_config(subparser: argparse.ArgumentParser, values: dict[str, str]) -> None:
    """Feed config entries in as defaults; explicit flags still win."""
    coerced: dict[str, object] = {}
    for action in subparser._actions:
        if action.dest in values:
            raw = values[action.dest]
            if action.nargs == 0 or isinstance(action, argparse.BooleanOptionalAction):
                coerced[action.dest] = raw.lower() in ("1", "true", "yes")
            elif action.type is not None:
                coerced[action.dest] = action.type(raw)
            else:
                coerced[action.dest] = raw
    subparser.set_defaults(**coerced)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "config", None):
            _apply_config(subs[args.command], _load_config_file(args.config))
            args = parser.parse_args(argv)
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (store.StoreError, OSError) as exc:
        print(f"io error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
