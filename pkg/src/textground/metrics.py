"""Evaluation suite: word accuracy, F1, character error rate, layout IoU,
and prompt coverage, aggregated per difficulty level into a report.

CLIP-style semantic scoring needs an embedding model and is delegated to a
client; everything else is computed in-process from OCR hypotheses.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Protocol, Sequence

from .align import levenshtein, normalized_similarity
from .geometry import GroundedSpan, NormBox, OcrWord, SampleRecord, box_iou
from .spans import normalize_text, tokenize_words
from .stratify import BenchManifest, Difficulty
from .targets import quantize_box

# A hypothesis span counts as rendering a reference span at or above this
# normalized Levenshtein similarity; exact matches score 1.0.
SIMILARITY_THRESHOLD = 0.8
# Prompt-coverage windows join at most this many reading-order hypothesis entries.
COVERAGE_WINDOW = 6


@dataclass(frozen=True)
class HypothesisOcr:
    """OCR output on a generated image: detected words/lines with pixel boxes."""

    words: tuple[OcrWord, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "words", tuple(self.words))

    def reading_order(self) -> list[OcrWord]:
        return sorted(self.words, key=lambda w: (w.box.y_min, w.box.x_min))


@dataclass(frozen=True)
class CoverageResult:
    total_spans: int
    matched_spans: int
    matched_flags: tuple[bool, ...]

    def __post_init__(self):
        if not 0 <= self.matched_spans <= self.total_spans:
            raise ValueError("matched_spans must lie in [0, total_spans]")

    @property
    def coverage(self) -> float | None:
        """Matched fraction; None when there are no spans to cover."""
        if self.total_spans == 0:
            return None
        return self.matched_spans / self.total_spans


def word_match(refs: Sequence[str], hyps: Sequence[str]) -> list[tuple[int, int]]:
    """Greedy one-to-one pairing of exactly equal normalized words.

    Words pair in reading order and each is consumed once, so duplicated
    reference words need duplicated hypothesis words.
    """
    available: dict[str, list[int]] = {}
    for j, h in enumerate(hyps):
        available.setdefault(normalize_text(h), []).append(j)
    pairs = []
    for i, r in enumerate(refs):
        slots = available.get(normalize_text(r))
        if slots:
            pairs.append((i, slots.pop(0)))
    return pairs


def accuracy_f1(refs: Sequence[str], hyps: Sequence[str]) -> tuple[float, float]:
    """Word exact-match rate (= recall) and harmonic precision/recall mean.

    Conventions keeping aggregation total: both sides empty scores (1, 1);
    an empty reference against any hypothesis scores (0, 0).
    """
    if not refs:
        return (1.0, 1.0) if not hyps else (0.0, 0.0)
    n_pairs = len(word_match(refs, hyps))
    acc = n_pairs / len(refs)
    precision = n_pairs / len(hyps) if hyps else 0.0
    f1 = 0.0 if precision + acc == 0 else 2 * precision * acc / (precision + acc)
    return acc, f1


def cer(ref_spans: Sequence[GroundedSpan], hyp_words: Sequence[OcrWord]) -> float:
    """Character error rate over reading-order concatenations; unclamped.

    Verbose hallucination can push this above 1 by design: it is an error
    magnitude, not a rate bounded by the reference.
    """
    ref_sorted = sorted(ref_spans, key=lambda s: (s.box.y_min, s.box.x_min))
    hyp_sorted = sorted(hyp_words, key=lambda w: (w.box.y_min, w.box.x_min))
    ref_text = " ".join(normalize_text(s.text) for s in ref_sorted)
    hyp_text = " ".join(normalize_text(w.text) for w in hyp_sorted)
    return levenshtein(ref_text, hyp_text) / max(1, len(ref_text))


def layout_iou(
    ref_spans: Sequence[GroundedSpan],
    hyp: HypothesisOcr,
    width: int,
    height: int,
) -> float:
    """Mean IoU between reference boxes and text-matched hypothesis boxes.

    Candidate pairs are gated by text similarity >= SIMILARITY_THRESHOLD so
    wrong text in the right place earns nothing; assignment is one-to-one,
    greedy by descending IoU. Unmatched references contribute 0; unmatched
    hypotheses are free.
    """
    if not ref_spans:
        return 0.0
    hyp_boxes: list[NormBox] = []
    hyp_texts: list[str] = []
    for w in hyp.words:
        hyp_boxes.append(quantize_box(w.box, width, height))
        hyp_texts.append(w.text)
    candidates = []
    for ri, ref in enumerate(ref_spans):
        for hi in range(len(hyp_boxes)):
            if normalized_similarity(ref.text, hyp_texts[hi]) < SIMILARITY_THRESHOLD:
                continue
            candidates.append((-box_iou(ref.box, hyp_boxes[hi]), ri, hi))
    candidates.sort()
    used_refs: set[int] = set()
    used_hyps: set[int] = set()
    total = 0.0
    for neg_iou, ri, hi in candidates:
        if ri in used_refs or hi in used_hyps:
            continue
        used_refs.add(ri)
        used_hyps.add(hi)
        total += -neg_iou
    return total / len(ref_spans)


def prompt_coverage(span_texts: Sequence[str], hyp: HypothesisOcr) -> CoverageResult:
    """Which prompt spans were rendered and recovered by OCR.

    A span counts as matched when any single hypothesis line, or any
    contiguous reading-order window of up to COVERAGE_WINDOW entries,
    matches it exactly or at >= SIMILARITY_THRESHOLD similarity.
    """
    ordered = hyp.reading_order()
    windows: list[str] = []
    for start in range(len(ordered)):
        for length in range(1, min(COVERAGE_WINDOW, len(ordered) - start) + 1):
            windows.append(" ".join(w.text for w in ordered[start : start + length]))
    flags = tuple(
        any(normalized_similarity(span, w) >= SIMILARITY_THRESHOLD for w in windows)
        for span in span_texts
    )
    return CoverageResult(len(span_texts), sum(flags), flags)


class ClipScoreClient(Protocol):
    def score(self, image_ref: str, prompt: str) -> float: ...


@dataclass(frozen=True)
class SampleEval:
    acc: float
    f1: float
    cer: float
    layout_iou: float
    pc: float | None
    cs: float | None = None


@dataclass(frozen=True)
class LevelAggregate:
    count: int
    acc: float | None
    f1: float | None
    cer: float | None
    layout_iou: float | None
    pc: float | None
    cs: float | None


@dataclass(frozen=True)
class EvalReport:
    per_sample: dict[str, SampleEval]
    per_level: dict[Difficulty, LevelAggregate]
    missing: tuple[str, ...]
    flagged: bool


def evaluate_sample(
    sample: SampleRecord,
    hyp: HypothesisOcr,
    scorer: ClipScoreClient | None = None,
) -> SampleEval:
    refs = sample.grounded_spans
    ref_words = [
        tok
        for span in sorted(refs, key=lambda s: (s.box.y_min, s.box.x_min))
        for tok in tokenize_words(span.text)
    ]
    hyp_words = [tok for w in hyp.reading_order() for tok in tokenize_words(w.text)]
    acc, f1 = accuracy_f1(ref_words, hyp_words)
    coverage = prompt_coverage([s.text for s in refs], hyp)
    return SampleEval(
        acc=acc,
        f1=f1,
        cer=cer(refs, hyp.words),
        layout_iou=layout_iou(refs, hyp, sample.width, sample.height),
        pc=coverage.coverage,
        cs=scorer.score(sample.image_ref, sample.prompt) if scorer is not None else None,
    )


def evaluate(
    samples: Mapping[str, SampleRecord],
    manifest: BenchManifest,
    hypotheses: Mapping[str, HypothesisOcr],
    scorer: ClipScoreClient | None = None,
) -> EvalReport:
    """Per-sample metrics over a benchmark manifest, averaged per level.

    Samples without a hypothesis are listed as missing, excluded from the
    means, and flag the run. Coverage for zero-span samples is
    not-applicable and excluded from level means.
    """
    per_sample: dict[str, SampleEval] = {}
    missing: list[str] = []
    per_level: dict[Difficulty, LevelAggregate] = {}
    for level, ids in manifest.levels.items():
        evals = []
        for sample_id in ids:
            if sample_id not in hypotheses:
                missing.append(sample_id)
                continue
            ev = evaluate_sample(samples[sample_id], hypotheses[sample_id], scorer)
            per_sample[sample_id] = ev
            evals.append(ev)
        per_level[level] = LevelAggregate(
            count=len(evals),
            acc=_mean([e.acc for e in evals]),
            f1=_mean([e.f1 for e in evals]),
            cer=_mean([e.cer for e in evals]),
            layout_iou=_mean([e.layout_iou for e in evals]),
            pc=_mean([e.pc for e in evals if e.pc is not None]),
            cs=_mean([e.cs for e in evals if e.cs is not None]),
        )
    return EvalReport(
        per_sample=per_sample,
        per_level=per_level,
        missing=tuple(missing),
        flagged=bool(missing),
    )


def _mean(values: Sequence[float]) -> float | None:
    return sum(values) / len(values) if values else None


def render_report_table(report: EvalReport) -> str:
    """Aligned text table with rate metrics scaled by 100; CS printed raw."""
    header = f"{'level':<8} {'n':>5} {'CS':>7} {'Acc':>7} {'F1':>7} {'CER':>7} {'IOU':>7} {'PC':>7}"
    lines = [header, "-" * len(header)]
    for level in Difficulty:
        agg = report.per_level.get(level)
        if agg is None:
            continue
        lines.append(
            f"{level.value:<8} {agg.count:>5} {_cell(agg.cs, scale=1):>7}"
            f" {_cell(agg.acc):>7} {_cell(agg.f1):>7} {_cell(agg.cer):>7}"
            f" {_cell(agg.layout_iou):>7} {_cell(agg.pc):>7}"
        )
    if report.missing:
        lines.append(f"missing hypotheses: {len(report.missing)} (run flagged)")
    return "\n".join(lines)


def _cell(value: float | None, scale: float = 100.0) -> str:
    return "-" if value is None else f"{value * scale:.2f}"
