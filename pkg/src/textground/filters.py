"""Three-stage corpus quality filtering.

Stage 1 applies heuristic image/box thresholds, stage 2 downsamples trivial
one- and two-box samples via a seeded hash (reproducible across runs, input
orderings, and shards), and stage 3 asks a semantic auditor client to verify
grounding and merge coherence.

Stage 1 never mutates samples: low-confidence and symbol-only words are
removed virtually for the purposes of the checks, keeping grounded-span word
indices valid downstream.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, Sequence

from .align import AlignmentResult
from .clients import AuditRequest, VlmAuditClient
from .errors import ClientTransportError
from .geometry import OcrWord, SampleRecord
from .spans import normalize_text
from .util import stable_unit


class Reason(str, Enum):
    MIN_DIM = "min_dim"
    ASPECT_RATIO = "aspect_ratio"
    TEXT_AREA = "text_area"
    LOW_CONFIDENCE = "low_confidence"
    SYMBOL_ONLY = "symbol_only"
    UNMATCHED_RATIO = "unmatched_ratio"
    DOWNSAMPLED = "downsampled"
    AUDIT_SPAN_UNGROUNDED = "audit_span_ungrounded"
    AUDIT_INCOHERENT = "audit_incoherent"


class Decision(str, Enum):
    KEEP = "keep"
    DROP = "drop"


@dataclass(frozen=True)
class FilterVerdict:
    decision: Decision
    reasons: tuple[Reason, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "reasons", tuple(self.reasons))
        if self.decision is Decision.KEEP and self.reasons:
            raise ValueError("a keep verdict must carry no reasons")
        if self.decision is Decision.DROP and not self.reasons:
            raise ValueError("a drop verdict must carry at least one reason")

    @classmethod
    def keep(cls) -> "FilterVerdict":
        return cls(Decision.KEEP)

    @classmethod
    def drop(cls, reasons: Iterable[Reason]) -> "FilterVerdict":
        return cls(Decision.DROP, tuple(reasons))

    @property
    def kept(self) -> bool:
        return self.decision is Decision.KEEP


@dataclass(frozen=True)
class FilterConfig:
    min_dim: int = 256
    aspect_range: tuple[float, float] = (0.67, 1.5)
    min_text_area_ratio: float = 0.10
    min_ocr_confidence: float = 0.7
    max_unmatched_ratio: float = 0.70
    drop_rate_1box: float = 0.60
    drop_rate_2box: float = 0.40
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "aspect_range", tuple(self.aspect_range))
        lo, hi = self.aspect_range
        if not (0 < lo <= hi):
            raise ValueError(f"aspect_range must be positive and ordered, got {self.aspect_range}")
        for name in ("min_text_area_ratio", "min_ocr_confidence", "max_unmatched_ratio",
                     "drop_rate_1box", "drop_rate_2box"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"FilterConfig.{name} must be in [0, 1], got {v!r}")


def union_text_area_ratio(words: Sequence[OcrWord], width: int, height: int) -> float:
    """Exact covered area of the word rectangles over the image area.

    Overlapping words are not double-counted: the union area is computed by
    a coordinate-compression sweep over x-slabs.
    """
    if width < 1 or height < 1:
        raise ValueError("image dimensions must be >= 1")
    if not words:
        return 0.0
    boxes = [w.box for w in words]
    xs = sorted({x for b in boxes for x in (b.x_min, b.x_max)})
    area = 0.0
    for x0, x1 in zip(xs, xs[1:]):
        if x1 <= x0:
            continue
        intervals = sorted(
            (b.y_min, b.y_max) for b in boxes if b.x_min <= x0 and b.x_max >= x1
        )
        covered = 0.0
        cur_lo = cur_hi = None
        for lo, hi in intervals:
            if cur_hi is None or lo > cur_hi:
                if cur_hi is not None:
                    covered += cur_hi - cur_lo
                cur_lo, cur_hi = lo, hi
            elif hi > cur_hi:
                cur_hi = hi
        if cur_hi is not None:
            covered += cur_hi - cur_lo
        area += (x1 - x0) * covered
    return area / (width * height)


def _is_symbol_only(word: OcrWord) -> bool:
    return not any(ch.isalnum() for ch in normalize_text(word.text))


def stage1_filter(
    sample: SampleRecord,
    alignment: AlignmentResult,
    cfg: FilterConfig = FilterConfig(),
) -> FilterVerdict:
    """Heuristic image- and box-level checks; reports every violated reason.

    Words below the confidence threshold, then symbol-only words, are removed
    virtually; the sample drops when a removal pass leaves nothing readable.
    The unmatched ratio is measured over all OCR words against the alignment,
    so it is independent of confidence values.
    """
    reasons: list[Reason] = []
    if min(sample.width, sample.height) < cfg.min_dim:
        reasons.append(Reason.MIN_DIM)
    aspect = sample.width / sample.height
    lo, hi = cfg.aspect_range
    if not lo <= aspect <= hi:
        reasons.append(Reason.ASPECT_RATIO)
    if union_text_area_ratio(sample.ocr_words, sample.width, sample.height) < cfg.min_text_area_ratio:
        reasons.append(Reason.TEXT_AREA)
    confident = [w for w in sample.ocr_words if w.confidence >= cfg.min_ocr_confidence]
    if sample.ocr_words and not confident:
        reasons.append(Reason.LOW_CONFIDENCE)
    readable = [w for w in confident if not _is_symbol_only(w)]
    if confident and not readable:
        reasons.append(Reason.SYMBOL_ONLY)
    if sample.ocr_words:
        unmatched = len(alignment.unmatched_word_indices) / len(sample.ocr_words)
        if unmatched > cfg.max_unmatched_ratio:
            reasons.append(Reason.UNMATCHED_RATIO)
    if reasons:
        return FilterVerdict.drop(reasons)
    return FilterVerdict.keep()


def downsample_verdict(sample: SampleRecord, cfg: FilterConfig = FilterConfig()) -> FilterVerdict:
    """Seeded keep/drop decision for one sample by its grounded-span count.

    One-box samples drop at ``drop_rate_1box``, two-box at ``drop_rate_2box``;
    everything else is kept. The decision hashes (sample id, seed), so it is
    identical across runs and input orderings.
    """
    n_box = len(sample.grounded_spans)
    if n_box == 1:
        rate = cfg.drop_rate_1box
    elif n_box == 2:
        rate = cfg.drop_rate_2box
    else:
        return FilterVerdict.keep()
    if stable_unit("downsample", sample.id, cfg.seed) < rate:
        return FilterVerdict.drop([Reason.DOWNSAMPLED])
    return FilterVerdict.keep()


def stage2_downsample(
    samples: Iterable[SampleRecord],
    cfg: FilterConfig = FilterConfig(),
) -> Iterator[tuple[SampleRecord, FilterVerdict]]:
    """Streaming form of ``downsample_verdict`` over a corpus."""
    for sample in samples:
        yield sample, downsample_verdict(sample, cfg)


def stage3_semantic_audit(
    sample: SampleRecord,
    auditor: VlmAuditClient,
    retries: int = 2,
) -> FilterVerdict:
    """Ask the auditor whether the sample's annotation is complete and coherent.

    Transport failures are retried ``retries`` times and then re-raised as
    ClientTransportError: the sample is neither kept nor dropped, and the
    caller decides whether to skip it or abort the run.
    """
    request = AuditRequest.from_sample(sample)
    last_error: ClientTransportError | None = None
    for _ in range(retries + 1):
        try:
            response = auditor.audit(request)
            break
        except ClientTransportError as exc:
            last_error = exc
    else:
        raise ClientTransportError(f"semantic audit failed after {retries + 1} attempts") from last_error
    reasons: list[Reason] = []
    if not all(response.span_grounded):
        reasons.append(Reason.AUDIT_SPAN_UNGROUNDED)
    if not response.coherent:
        reasons.append(Reason.AUDIT_INCOHERENT)
    if reasons:
        return FilterVerdict.drop(reasons)
    return FilterVerdict.keep()
