"""Command-line interface.

Subcommands: extract, align, filter, stratify, build-targets, evaluate,
train-toy, mine, run-pipeline. Exit codes: 0 success, 1 usage error,
2 data error, 3 client error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path
from typing import Sequence

from . import clients, corpus, metrics, mining, pipeline, stratify, toy_model
from .align import AlignConfig
from .errors import ClientError, DataError, TextgroundError
from .targets import BuildConfig, Order, Variant, VocabLayout, build_target
from .util import stable_hash64


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the toolkit contract is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="seed for all random decisions")
    parser.add_argument("--config", type=Path, default=None, help="JSON config file")
    parser.add_argument("--workers", type=int, default=1, help="parallel worker bound")


def _align_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--partial-threshold", type=float, default=0.6)
    parser.add_argument("--fuzzy-threshold", type=float, default=0.8)
    parser.add_argument("--max-window-slack", type=int, default=2)


def _align_config(args: argparse.Namespace) -> AlignConfig:
    return AlignConfig(
        partial_threshold=args.partial_threshold,
        fuzzy_threshold=args.fuzzy_threshold,
        max_window_slack=args.max_window_slack,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="textground", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("extract", parents=[], help="extract quoted spans from prompts")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    _common_flags(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("align", help="align quoted spans onto OCR words")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    _align_flags(p)
    _common_flags(p)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("filter", help="run the three-stage quality filter")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--on-audit-error", choices=["skip", "abort"], default="abort")
    _align_flags(p)
    _common_flags(p)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("stratify", help="classify difficulty and build a benchmark manifest")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--quota", type=int, required=True, help="samples per difficulty level")
    p.add_argument("--out", type=Path, required=True)
    _common_flags(p)
    p.set_defaults(func=cmd_stratify)

    p = sub.add_parser("build-targets", help="emit training-target token sequences")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--variant", choices=[v.value for v in Variant], default=Variant.TEXT_AND_BBOX.value)
    p.add_argument("--order", choices=[o.value for o in Order], default=Order.POST_IMAGE.value)
    p.add_argument("--image-len", type=int, default=16, help="placeholder image tokens per sample")
    p.add_argument("--n-image-tokens", type=int, default=1024, help="image-token vocabulary size")
    _common_flags(p)
    p.set_defaults(func=cmd_build_targets)

    p = sub.add_parser("evaluate", help="score OCR hypotheses against a benchmark")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--bench", type=Path, required=True)
    p.add_argument("--hyp", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--clip-scorer", choices=["none", "mock"], default="none")
    _common_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("train-toy", help="train the toy model on the glyph task")
    p.add_argument("--variant", choices=[v.value for v in Variant], default=Variant.TEXT_AND_BBOX.value)
    p.add_argument("--order", choices=[o.value for o in Order], default=Order.POST_IMAGE.value)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--samples", type=int, default=64)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.02)
    p.add_argument("--out-dir", type=Path, required=True)
    _common_flags(p)
    p.set_defaults(func=cmd_train_toy)

    p = sub.add_parser("mine", help="generate queries and rank a candidate pool")
    p.add_argument("--taxonomy", type=Path, default=None, help="taxonomy JSON (default: bundled)")
    p.add_argument("--per-subtopic", type=int, default=4)
    p.add_argument("--pool", type=Path, default=None, help="candidate pool JSONL")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--min-resolution", type=int, default=512)
    p.add_argument("--min-ocr-words", type=int, default=5)
    p.add_argument("--expander", choices=["none", "mock"], default="none")
    _common_flags(p)
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("run-pipeline", help="run extract, align, filter, stratify end to end")
    _common_flags(p)
    p.set_defaults(func=cmd_run_pipeline)

    return parser


def cmd_extract(args: argparse.Namespace) -> int:
    from .spans import extract_spans

    with args.out.open("w", encoding="utf-8") as out:
        for sample in corpus.read_corpus(args.corpus):
            spans = extract_spans(sample.prompt)
            out.write(
                corpus.dumps_line(
                    {
                        "id": sample.id,
                        "spans": [{"text": s.text, "start": s.start, "end": s.end} for s in spans],
                    }
                )
            )
    print(f"wrote spans for corpus {args.corpus} to {args.out}")
    return 0


def cmd_align(args: argparse.Namespace) -> int:
    cfg = _align_config(args)
    samples = corpus.load_corpus(args.corpus)
    annotated = [pipeline.annotate_sample(s, cfg) for s in samples]
    corpus.write_corpus(args.out, [a.sample for a in annotated])
    matched = sum(len(a.alignment.matches) for a in annotated)
    unmatched = sum(len(a.alignment.unmatched_span_indices) for a in annotated)
    print(f"aligned {len(samples)} samples: {matched} spans matched, {unmatched} unmatched")
    print(f"wrote {args.out}")
    return 0


def cmd_filter(args: argparse.Namespace) -> int:
    config = _pipeline_config(args, out_dir=args.out_dir, emit_quota=0)
    report = pipeline.run_pipeline(config)
    _print_stage_table(report)
    return 0


def cmd_stratify(args: argparse.Namespace) -> int:
    samples = corpus.load_corpus(args.corpus)
    manifest = stratify.build_bench(samples, args.quota, args.seed)
    manifest.save(args.out)
    stats = stratify.corpus_stats(samples)
    print(f"corpus: {stats.total_samples} samples, {stats.total_spans} grounded spans")
    for n_box, pct in stats.bbox_percentages().items():
        print(f"  {n_box}-box: {pct:.1f}%")
    for level, count in manifest.counts.items():
        gap = manifest.shortfall.get(level)
        note = f" (short by {gap})" if gap else ""
        print(f"{level.value}: {count} selected{note}")
    print(f"wrote {args.out}")
    return 0


def cmd_build_targets(args: argparse.Namespace) -> int:
    cfg = BuildConfig(variant=Variant(args.variant), order=Order(args.order))
    vocab = VocabLayout(n_image_tokens=args.n_image_tokens)
    count = 0
    with args.out.open("w", encoding="utf-8") as out:
        for sample in corpus.read_corpus(args.corpus):
            image_tokens = [
                vocab.image_base + stable_hash64("image-token", sample.id, args.seed, i) % args.n_image_tokens
                for i in range(args.image_len)
            ]
            seq = build_target(image_tokens, sample.grounded_spans, cfg, vocab)
            out.write(
                corpus.dumps_line(
                    {
                        "id": sample.id,
                        "tokens": list(seq.tokens),
                        "img_mask": [int(b) for b in seq.img_mask],
                        "text_mask": [int(b) for b in seq.text_mask],
                    }
                )
            )
            count += 1
    print(f"wrote {count} target sequences to {args.out} "
          f"(variant={cfg.variant.value}, order={cfg.order.value})")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    samples = {s.id: s for s in corpus.read_corpus(args.corpus)}
    manifest = stratify.BenchManifest.load(args.bench)
    hypotheses = corpus.read_hypotheses(args.hyp)
    missing_refs = [i for i in manifest.all_ids() if i not in samples]
    if missing_refs:
        raise DataError(f"bench manifest references unknown sample ids: {missing_refs[:5]}")
    scorer = clients.MockClipScorer() if args.clip_scorer == "mock" else None
    report = metrics.evaluate(samples, manifest, hypotheses, scorer)
    payload = {
        "per_level": {
            level.value: dataclasses.asdict(agg) for level, agg in report.per_level.items()
        },
        "per_sample": {
            sample_id: dataclasses.asdict(ev) for sample_id, ev in sorted(report.per_sample.items())
        },
        "missing": list(report.missing),
        "flagged": report.flagged,
    }
    args.out.write_text(
        json.dumps(payload, sort_keys=True, ensure_ascii=False, indent=1) + "\n", encoding="utf-8"
    )
    print(metrics.render_report_table(report))
    print(f"wrote {args.out}")
    return 0


def cmd_train_toy(args: argparse.Namespace) -> int:
    cfg = BuildConfig(variant=Variant(args.variant), order=Order(args.order), alpha=args.alpha)
    task = toy_model.make_glyph_task(seed=args.seed, n_samples=args.samples, cfg=cfg)
    model = toy_model.ToyModel.create(
        task.vocab.vocab_size, dim=args.dim, learning_rate=args.lr, seed=args.seed
    )
    result = toy_model.train(model, task, steps=args.steps, cfg=cfg)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    curve_path = args.out_dir / "loss.csv"
    with curve_path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["step", "l_img", "l_text", "total"])
        for step, loss in enumerate(result.history):
            writer.writerow([step, f"{loss.l_img:.10f}", f"{loss.l_text:.10f}", f"{loss.total:.10f}"])
    summary = {
        "variant": cfg.variant.value,
        "order": cfg.order.value,
        "alpha": cfg.alpha,
        "steps": args.steps,
        "samples": args.samples,
        "seed": args.seed,
        "initial_total": result.initial.total,
        "final_total": result.final.total,
        "loss_ratio": result.final.total / result.initial.total,
    }
    (args.out_dir / "summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )
    print(
        f"trained {args.steps} steps on {args.samples} samples: "
        f"total {result.initial.total:.3f} -> {result.final.total:.3f}"
    )
    print(f"wrote {curve_path}")
    return 0


def cmd_mine(args: argparse.Namespace) -> int:
    taxonomy = (
        mining.QueryTaxonomy.load(args.taxonomy) if args.taxonomy else mining.default_taxonomy()
    )
    expander = None
    if args.expander == "mock":
        expander = clients.LlmExpandClient(clients.InProcessTransport(clients.mock_expand_handler))
    queries = mining.generate_queries(taxonomy, args.per_subtopic, args.seed, expander)
    payload: dict = {"queries": queries}
    if args.pool is not None:
        pool = []
        with args.pool.open("r", encoding="utf-8") as handle:
            for line in handle:
                if line.strip():
                    record = json.loads(line)
                    pool.append(
                        mining.CandidateImage(
                            id=record["id"],
                            context_text=record.get("context_text", ""),
                            ocr_text=record.get("ocr_text", ""),
                            width=record["width"],
                            height=record["height"],
                        )
                    )
        cfg = mining.RetrievalConfig(
            min_resolution=args.min_resolution, min_ocr_words=args.min_ocr_words
        )
        results = mining.retrieve(queries, pool, cfg)
        payload["retrieval"] = [
            {
                "query": r.query,
                "matches": [{"id": m.candidate_id, "score": m.score} for m in r.matches],
            }
            for r in results
        ]
    args.out.write_text(
        json.dumps(payload, sort_keys=True, ensure_ascii=False, indent=1) + "\n", encoding="utf-8"
    )
    print(f"generated {len(queries)} queries -> {args.out}")
    return 0


def cmd_run_pipeline(args: argparse.Namespace) -> int:
    if args.config is None:
        raise DataError("run-pipeline requires --config pointing to a pipeline JSON file")
    config = pipeline.PipelineConfig.load(args.config)
    overrides = {}
    if args.seed != 0:
        overrides["seed"] = args.seed
    if args.workers != 1:
        overrides["workers"] = args.workers
    if overrides:
        config = dataclasses.replace(config, **overrides)
    report = pipeline.run_pipeline(config)
    _print_stage_table(report)
    return 0


def _pipeline_config(args: argparse.Namespace, out_dir: Path, emit_quota: int) -> pipeline.PipelineConfig:
    base = {}
    if args.config is not None:
        base = json.loads(args.config.read_text(encoding="utf-8"))
    base.setdefault("input_path", str(args.corpus))
    base["out_dir"] = str(out_dir)
    base.setdefault("seed", args.seed)
    base.setdefault("workers", args.workers)
    base.setdefault("quota_per_level", emit_quota)
    base.setdefault("on_audit_error", args.on_audit_error)
    base.setdefault(
        "align",
        {
            "partial_threshold": args.partial_threshold,
            "fuzzy_threshold": args.fuzzy_threshold,
            "max_window_slack": args.max_window_slack,
        },
    )
    return pipeline.PipelineConfig.from_payload(base)


def _print_stage_table(report: pipeline.PipelineReport) -> None:
    print(f"{'stage':<16} {'in':>7} {'kept':>7} {'dropped':>7} {'errors':>7}  reasons")
    for stage in report.stages:
        reasons = ", ".join(f"{k}={v}" for k, v in sorted(stage.reasons.items()))
        print(
            f"{stage.name:<16} {stage.n_in:>7} {stage.kept:>7} {stage.dropped:>7} "
            f"{stage.errors:>7}  {reasons}"
        )
    print(f"final corpus: {report.final_count} samples -> {report.outputs['corpus']}")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "func", None):
        parser.print_help()
        return 1
    try:
        return args.func(args)
    except ClientError as exc:
        print(f"client error: {exc}", file=sys.stderr)
        return 3
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except TextgroundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
