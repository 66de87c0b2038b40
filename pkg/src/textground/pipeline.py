"""End-to-end pipeline: extract, align, filter, stratify, with a full report.

Per-sample work (span extraction, alignment, stage-1 checks) is pure, so it
shards across a thread pool; results are merged in input order and written
in canonical id order, which makes output bytes independent of the worker
count. Every random decision hashes (id, seed), so reruns and permutations
of the input produce identical files.
"""

from __future__ import annotations

import dataclasses
import json
import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .align import AlignConfig, AlignmentResult, align_spans, grounded_spans_from_alignment
from .clients import VlmAuditClient
from .corpus import CorpusManifest, load_corpus, write_corpus
from .errors import ClientTransportError, DataError
from .filters import FilterConfig, FilterVerdict, downsample_verdict, stage1_filter, stage3_semantic_audit
from .geometry import SampleRecord
from .spans import QuotedSpan, extract_spans
from .stratify import NotBenchmarkable, build_bench, classify_sample

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineConfig:
    input_path: str
    out_dir: str
    seed: int = 0
    workers: int = 1
    quota_per_level: int = 100
    audit_retries: int = 2
    on_audit_error: str = "abort"  # or "skip"
    align: AlignConfig = AlignConfig()
    filter: FilterConfig = FilterConfig()

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.on_audit_error not in ("abort", "skip"):
            raise ValueError(f"on_audit_error must be 'abort' or 'skip', got {self.on_audit_error!r}")

    @classmethod
    def from_payload(cls, payload: Mapping) -> "PipelineConfig":
        try:
            return cls(
                input_path=payload["input_path"],
                out_dir=payload["out_dir"],
                seed=payload.get("seed", 0),
                workers=payload.get("workers", 1),
                quota_per_level=payload.get("quota_per_level", 100),
                audit_retries=payload.get("audit_retries", 2),
                on_audit_error=payload.get("on_audit_error", "abort"),
                align=AlignConfig(**payload.get("align", {})),
                filter=FilterConfig(**payload.get("filter", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"invalid pipeline config: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        return cls.from_payload(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_payload(self) -> dict:
        return {
            "input_path": self.input_path,
            "out_dir": self.out_dir,
            "seed": self.seed,
            "workers": self.workers,
            "quota_per_level": self.quota_per_level,
            "audit_retries": self.audit_retries,
            "on_audit_error": self.on_audit_error,
            "align": dataclasses.asdict(self.align),
            "filter": {
                **dataclasses.asdict(self.filter),
                "aspect_range": list(self.filter.aspect_range),
            },
        }


@dataclass(frozen=True)
class StageReport:
    name: str
    n_in: int
    kept: int
    dropped: int
    errors: int = 0
    reasons: dict[str, int] = field(default_factory=dict)

    def to_payload(self) -> dict:
        return {
            "name": self.name,
            "in": self.n_in,
            "kept": self.kept,
            "dropped": self.dropped,
            "errors": self.errors,
            "reasons": dict(sorted(self.reasons.items())),
        }


@dataclass(frozen=True)
class PipelineReport:
    seed: int
    stages: tuple[StageReport, ...]
    final_count: int
    difficulty_counts: dict[str, int]
    corpus_manifest: CorpusManifest | None
    outputs: dict[str, str]

    def to_payload(self) -> dict:
        return {
            "schema_version": 1,
            "seed": self.seed,
            "stages": [s.to_payload() for s in self.stages],
            "final_count": self.final_count,
            "difficulty_counts": dict(sorted(self.difficulty_counts.items())),
            "corpus_manifest": (
                self.corpus_manifest.to_payload() if self.corpus_manifest else None
            ),
            "outputs": dict(sorted(self.outputs.items())),
        }


@dataclass(frozen=True)
class AnnotatedSample:
    """A sample with recomputed spans, alignment, and grounded spans."""

    sample: SampleRecord
    spans: tuple[QuotedSpan, ...]
    alignment: AlignmentResult


def annotate_sample(sample: SampleRecord, align_cfg: AlignConfig) -> AnnotatedSample:
    """Extract quoted spans from the prompt and ground them in the OCR words."""
    spans = tuple(extract_spans(sample.prompt))
    alignment = align_spans(spans, sample.ocr_words, align_cfg)
    grounded = grounded_spans_from_alignment(
        alignment, spans, sample.ocr_words, sample.width, sample.height
    )
    return AnnotatedSample(
        sample=dataclasses.replace(sample, grounded_spans=grounded),
        spans=spans,
        alignment=alignment,
    )


def run_pipeline(
    config: PipelineConfig,
    auditor: VlmAuditClient | None = None,
) -> PipelineReport:
    """Execute extract, align, filter stages 1-3, and stratify; write outputs.

    Writes the filtered corpus (plus manifest sidecar), the benchmark
    manifest, and the report into ``config.out_dir``. Returns the report.
    """
    auditor = auditor if auditor is not None else VlmAuditClient.in_process_mock()
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    samples = load_corpus(config.input_path)
    stages: list[StageReport] = []

    # Extract + align: pure per-sample transforms, sharded across threads.
    def annotate(sample: SampleRecord) -> AnnotatedSample:
        return annotate_sample(sample, config.align)

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            annotated = list(pool.map(annotate, samples))
    else:
        annotated = [annotate(s) for s in samples]

    n_spans = sum(len(a.spans) for a in annotated)
    stages.append(
        StageReport(
            name="extract",
            n_in=len(samples),
            kept=len(samples),
            dropped=0,
            reasons={"quoted_spans": n_spans},
        )
    )
    match_stages = Counter(m.stage.value for a in annotated for m in a.alignment.matches)
    match_stages["unmatched_spans"] = sum(len(a.alignment.unmatched_span_indices) for a in annotated)
    stages.append(
        StageReport(
            name="align",
            n_in=len(annotated),
            kept=len(annotated),
            dropped=0,
            reasons=dict(match_stages),
        )
    )

    # Stage 1: heuristic filters.
    def stage1(a: AnnotatedSample) -> FilterVerdict:
        return stage1_filter(a.sample, a.alignment, config.filter)

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            verdicts = list(pool.map(stage1, annotated))
    else:
        verdicts = [stage1(a) for a in annotated]
    survivors1 = [a for a, v in zip(annotated, verdicts) if v.kept]
    stages.append(_stage_report("filter_stage1", len(annotated), verdicts))

    # Stage 2: seeded downsampling of trivial cases.
    cfg2 = dataclasses.replace(config.filter, seed=config.seed)
    verdicts2 = [downsample_verdict(a.sample, cfg2) for a in survivors1]
    survivors2 = [a for a, v in zip(survivors1, verdicts2) if v.kept]
    stages.append(_stage_report("filter_stage2", len(survivors1), verdicts2))

    # Stage 3: semantic audit via the client.
    survivors3: list[AnnotatedSample] = []
    verdicts3: list[FilterVerdict] = []
    audit_errors = 0
    for a in survivors2:
        try:
            verdict = stage3_semantic_audit(a.sample, auditor, retries=config.audit_retries)
        except ClientTransportError:
            if config.on_audit_error == "abort":
                raise
            audit_errors += 1
            logger.warning("skipping sample %s: semantic audit unavailable", a.sample.id)
            continue
        verdicts3.append(verdict)
        if verdict.kept:
            survivors3.append(a)
    stages.append(
        _stage_report("filter_stage3", len(survivors2), verdicts3, errors=audit_errors)
    )

    # Stratify the kept corpus.
    kept_samples = sorted((a.sample for a in survivors3), key=lambda s: s.id)
    difficulty_counts: Counter[str] = Counter()
    benchmarkable = 0
    for sample in kept_samples:
        try:
            difficulty_counts[classify_sample(sample).value] += 1
            benchmarkable += 1
        except NotBenchmarkable:
            difficulty_counts["not_benchmarkable"] += 1
    stages.append(
        StageReport(
            name="stratify",
            n_in=len(kept_samples),
            kept=benchmarkable,
            dropped=len(kept_samples) - benchmarkable,
            reasons=dict(difficulty_counts),
        )
    )
    bench = build_bench(kept_samples, config.quota_per_level, config.seed)

    corpus_path = out_dir / "corpus.filtered.jsonl"
    bench_path = out_dir / "bench.manifest.json"
    report_path = out_dir / "report.json"
    manifest = write_corpus(corpus_path, kept_samples)
    bench.save(bench_path)
    # Output names are recorded relative to out_dir so reports from runs in
    # different directories stay byte-identical.
    report = PipelineReport(
        seed=config.seed,
        stages=tuple(stages),
        final_count=len(kept_samples),
        difficulty_counts=dict(difficulty_counts),
        corpus_manifest=manifest,
        outputs={
            "corpus": corpus_path.name,
            "bench_manifest": bench_path.name,
            "report": report_path.name,
        },
    )
    report_path.write_text(
        json.dumps(report.to_payload(), sort_keys=True, ensure_ascii=False, indent=1) + "\n",
        encoding="utf-8",
    )
    return report


def _stage_report(
    name: str, n_in: int, verdicts: Sequence[FilterVerdict], errors: int = 0
) -> StageReport:
    reasons: Counter[str] = Counter()
    dropped = 0
    for v in verdicts:
        if not v.kept:
            dropped += 1
            reasons.update(r.value for r in v.reasons)
    return StageReport(
        name=name,
        n_in=n_in,
        kept=n_in - dropped - errors,
        dropped=dropped,
        errors=errors,
        reasons=dict(reasons),
    )
