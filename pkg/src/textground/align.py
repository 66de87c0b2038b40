"""Multistage alignment of quoted caption spans onto contiguous OCR word windows.

Stages are tried in priority order per candidate window: exact text match,
token-set partial overlap, then fuzzy string similarity. Conflicts over OCR
words are resolved deterministically (stage, then similarity, then span
order), so the same inputs always produce the same alignment.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .geometry import GroundedSpan, OcrWord, box_union
from .spans import QuotedSpan, normalize_text, tokenize_words
from .targets import quantize_box


def levenshtein(a: str, b: str) -> int:
    """Minimal number of single-character insertions, deletions, substitutions."""
    if a == b:
        return 0
    # Trim the common prefix and suffix; they never contribute edits.
    lo = 0
    hi_a, hi_b = len(a), len(b)
    while lo < hi_a and lo < hi_b and a[lo] == b[lo]:
        lo += 1
    while hi_a > lo and hi_b > lo and a[hi_a - 1] == b[hi_b - 1]:
        hi_a -= 1
        hi_b -= 1
    a, b = a[lo:hi_a], b[lo:hi_b]
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(b) > len(a):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i] + [0] * len(b)
        for j, cb in enumerate(b, 1):
            cost = prev[j - 1] if ca == cb else prev[j - 1] + 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, cost)
        prev = cur
    return prev[-1]


def normalized_similarity(a: str, b: str) -> float:
    """1 minus the edit distance between normalized texts over the longer length.

    Returns 1.0 when both normalize to the empty string.
    """
    na, nb = normalize_text(a), normalize_text(b)
    longest = max(len(na), len(nb))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(na, nb) / longest


class MatchStage(str, Enum):
    EXACT = "exact"
    PARTIAL = "partial"
    FUZZY = "fuzzy"

    @property
    def priority(self) -> int:
        return {MatchStage.EXACT: 0, MatchStage.PARTIAL: 1, MatchStage.FUZZY: 2}[self]


@dataclass(frozen=True)
class AlignConfig:
    """Thresholds for the partial and fuzzy stages and the window size bound.

    Candidate windows run up to (span token count + max_window_slack) words,
    which bounds cost and covers OCR line fragmentation.
    """

    partial_threshold: float = 0.6
    fuzzy_threshold: float = 0.8
    max_window_slack: int = 2

    def __post_init__(self):
        for name in ("partial_threshold", "fuzzy_threshold"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"AlignConfig.{name} must be in [0, 1], got {v!r}")
        if self.max_window_slack < 0:
            raise ValueError("AlignConfig.max_window_slack must be >= 0")


@dataclass(frozen=True)
class SpanMatch:
    """One aligned span: the OCR words it claimed and how they matched.

    ``word_indices`` are positions in the sample's word list (ascending);
    the matched window is contiguous in reading order.
    """

    span_index: int
    word_indices: tuple[int, ...]
    stage: MatchStage
    similarity: float


@dataclass(frozen=True)
class AlignmentResult:
    matches: tuple[SpanMatch, ...]
    unmatched_span_indices: tuple[int, ...]
    unmatched_word_indices: tuple[int, ...]


def reading_order(words: Sequence[OcrWord]) -> list[int]:
    """Word indices sorted top-to-bottom, then left-to-right."""
    return sorted(range(len(words)), key=lambda i: (words[i].box.y_min, words[i].box.x_min, i))


def _window_text(words: Sequence[OcrWord], window: Sequence[int]) -> str:
    return " ".join(words[i].text for i in window)


def align_spans(
    spans: Sequence[QuotedSpan],
    words: Sequence[OcrWord],
    cfg: AlignConfig = AlignConfig(),
) -> AlignmentResult:
    """Associate each span with at most one contiguous reading-order word window.

    Every candidate window is scored at the strongest stage it supports;
    assignment is a global greedy over (stage, similarity, span order), so no
    OCR word is claimed twice. Spans with no admissible window are reported
    in ``unmatched_span_indices``.
    """
    order = reading_order(words)
    # (stage priority, -similarity, span index, window start, window length, window)
    candidates: list[tuple[int, float, int, int, int, tuple[int, ...]]] = []
    for si, span in enumerate(spans):
        span_norm = normalize_text(span.text)
        span_token_list = tokenize_words(span.text)
        span_tokens = set(span_token_list)
        if not span_norm:
            continue
        max_len = len(span_token_list) + cfg.max_window_slack
        for start in range(len(order)):
            for length in range(1, min(max_len, len(order) - start) + 1):
                window = tuple(order[start : start + length])
                joined = _window_text(words, window)
                scored = _score_window(span.text, span_norm, span_tokens, joined, cfg)
                if scored is None:
                    continue
                stage, sim = scored
                candidates.append((stage.priority, -sim, si, start, length, window))

    candidates.sort()
    stage_by_priority = {stage.priority: stage for stage in MatchStage}
    matched_spans: dict[int, SpanMatch] = {}
    used_words: set[int] = set()
    for priority, neg_sim, si, _start, _length, window in candidates:
        if si in matched_spans or used_words.intersection(window):
            continue
        matched_spans[si] = SpanMatch(
            span_index=si,
            word_indices=tuple(sorted(window)),
            stage=stage_by_priority[priority],
            similarity=-neg_sim,
        )
        used_words.update(window)

    matches = tuple(matched_spans[si] for si in sorted(matched_spans))
    unmatched_spans = tuple(si for si in range(len(spans)) if si not in matched_spans)
    unmatched_words = tuple(i for i in range(len(words)) if i not in used_words)
    return AlignmentResult(matches, unmatched_spans, unmatched_words)


def _score_window(
    span_text: str,
    span_norm: str,
    span_tokens: set[str],
    window_text: str,
    cfg: AlignConfig,
) -> tuple[MatchStage, float] | None:
    """Best (stage, similarity) this window supports, or None below all thresholds."""
    if normalize_text(window_text) == span_norm:
        return MatchStage.EXACT, 1.0
    if span_tokens:
        overlap = len(span_tokens.intersection(tokenize_words(window_text))) / len(span_tokens)
        if overlap >= cfg.partial_threshold:
            return MatchStage.PARTIAL, overlap
    sim = normalized_similarity(span_text, window_text)
    if sim >= cfg.fuzzy_threshold:
        return MatchStage.FUZZY, sim
    return None


def grounded_spans_from_alignment(
    result: AlignmentResult,
    spans: Sequence[QuotedSpan],
    words: Sequence[OcrWord],
    width: int,
    height: int,
) -> tuple[GroundedSpan, ...]:
    """One grounded span per match: span text plus the quantized union box."""
    grounded = []
    for match in result.matches:
        union = box_union([words[i].box for i in match.word_indices])
        grounded.append(
            GroundedSpan(
                text=spans[match.span_index].text,
                box=quantize_box(union, width, height),
                source_word_indices=match.word_indices,
            )
        )
    return tuple(grounded)
