from functools import lru_cache

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from textground.align import (
    AlignConfig,
    MatchStage,
    align_spans,
    grounded_spans_from_alignment,
    levenshtein,
    normalized_similarity,
    reading_order,
)
from textground.geometry import NormBox, OcrWord, PixelBox
from textground.spans import QuotedSpan, normalize_text


@lru_cache(maxsize=None)
def naive_distance(a: str, b: str) -> int:
    """Independent oracle: the textbook recursive definition, memoized."""
    if not a:
        return len(b)
    if not b:
        return len(a)
    return min(
        naive_distance(a[1:], b) + 1,
        naive_distance(a, b[1:]) + 1,
        naive_distance(a[1:], b[1:]) + (a[0] != b[0]),
    )


def span_of(text: str) -> QuotedSpan:
    return QuotedSpan(text=text, start=0, end=len(text))


def word_row(texts, y=0.0, confidence=0.9):
    """Words laid out left to right on one row."""
    words = []
    x = 0.0
    for t in texts:
        w = 10.0 * len(t)
        words.append(OcrWord(t, PixelBox(x, y, x + w, y + 20.0), confidence))
        x += w + 5.0
    return words


class TestLevenshtein:
    def test_insertions_only(self):
        assert levenshtein("", "abc") == 3

    def test_identity(self):
        assert levenshtein("kitten", "kitten") == 0

    def test_single_deletion(self):
        assert levenshtein("SUMMER", "SUMER") == 1

    def test_classic_pair(self):
        assert levenshtein("kitten", "sitting") == 3

    @given(st.text(alphabet="abc", max_size=4), st.text(alphabet="abc", max_size=4))
    def test_matches_naive_oracle(self, a, b):
        assert levenshtein(a, b) == naive_distance(a, b)

    @given(
        st.text(alphabet="abcd", max_size=8),
        st.text(alphabet="abcd", max_size=8),
        st.text(alphabet="abcd", max_size=8),
    )
    def test_metric_properties(self, a, b, c):
        assert levenshtein(a, b) == levenshtein(b, a)
        assert levenshtein(a, b) <= levenshtein(a, c) + levenshtein(c, b)
        assert (levenshtein(a, b) == 0) == (a == b)


class TestNormalizedSimilarity:
    def test_case_insensitive_identity(self):
        assert normalized_similarity("SALE", "sale") == 1.0

    def test_one_char_off(self):
        assert normalized_similarity("SUMMER", "SUMER") == pytest.approx(1 - 1 / 6)

    def test_totally_different(self):
        assert normalized_similarity("OPEN", "SHUT") == 0.0

    def test_both_effectively_empty(self):
        assert normalized_similarity("  !! ", "...") == 1.0

    @given(st.text(max_size=12))
    def test_self_similarity(self, s):
        assert normalized_similarity(s, s) == 1.0

    @given(st.text(max_size=12), st.text(max_size=12))
    def test_bounded(self, a, b):
        assert 0.0 <= normalized_similarity(a, b) <= 1.0


def brute_force_has_exact_window(span_text, words, max_len):
    """All-window enumeration oracle for the exact stage."""
    order = reading_order(words)
    target = normalize_text(span_text)
    for start in range(len(order)):
        for length in range(1, min(max_len, len(order) - start) + 1):
            window = order[start : start + length]
            joined = " ".join(words[i].text for i in window)
            if normalize_text(joined) == target:
                return True
    return False


class TestAlignSpans:
    def test_exact_adjacent_words(self):
        words = word_row(["Summer", "Sale"])
        result = align_spans([span_of("Summer Sale")], words)
        (match,) = result.matches
        assert match.stage is MatchStage.EXACT
        assert match.word_indices == (0, 1)
        assert match.similarity == 1.0

    def test_no_candidates(self):
        result = align_spans([span_of("OPEN")], [])
        assert result.unmatched_span_indices == (0,)
        assert result.matches == ()

    def test_fuzzy_window(self):
        words = word_row(["SUMER", "SALE"])
        result = align_spans([span_of("SUMMER SALE")], words)
        (match,) = result.matches
        assert match.stage is MatchStage.FUZZY
        assert match.similarity == pytest.approx(1 - 1 / 11)

    def test_partial_overlap_stage(self):
        # 2 of 3 span tokens present, no exact window, similarity below fuzzy.
        words = word_row(["GRAND", "OPENING", "zzzzzzzzzz"])
        result = align_spans(
            [span_of("GRAND OPENING TODAY")], words, AlignConfig(fuzzy_threshold=0.95)
        )
        (match,) = result.matches
        assert match.stage is MatchStage.PARTIAL
        assert match.similarity == pytest.approx(2 / 3)

    def test_conflicting_spans_resolve_by_stage_then_order(self):
        words = word_row(["OPEN"])
        result = align_spans([span_of("OPEN"), span_of("OPEN")], words)
        (match,) = result.matches
        assert match.span_index == 0
        assert result.unmatched_span_indices == (1,)

    def test_each_word_claimed_once(self):
        words = word_row(["big", "sale", "today"])
        result = align_spans([span_of("big sale"), span_of("sale today")], words)
        claimed = [i for m in result.matches for i in m.word_indices]
        assert len(claimed) == len(set(claimed))

    def test_reading_order_crosses_rows(self):
        words = word_row(["Sale"], y=50.0) + word_row(["Summer"], y=0.0)
        result = align_spans([span_of("Summer Sale")], words)
        (match,) = result.matches
        assert match.stage is MatchStage.EXACT
        assert match.word_indices == (0, 1)

    @given(
        span_text=st.text(alphabet="ab ", min_size=1, max_size=8).filter(lambda s: s.strip()),
        word_texts=st.lists(st.text(alphabet="ab", min_size=1, max_size=4), max_size=6),
    )
    @settings(max_examples=60, deadline=None)
    def test_exact_window_always_found(self, span_text, word_texts):
        # Without competing spans, an existing exact window must be reported
        # as an exact match. (Under conflicts the exact window may be claimed
        # by another span, by design.)
        words = word_row(word_texts) if word_texts else []
        span = span_of(span_text)
        cfg = AlignConfig()
        result = align_spans([span], words, cfg)
        n_tokens = len(span.text.split())
        if brute_force_has_exact_window(span.text, words, n_tokens + cfg.max_window_slack):
            (match,) = result.matches
            assert match.stage is MatchStage.EXACT

    @given(
        word_texts=st.lists(st.text(alphabet="abc", min_size=1, max_size=4), max_size=8),
        span_texts=st.lists(st.text(alphabet="abc ", min_size=1, max_size=10), max_size=4),
    )
    @settings(max_examples=60, deadline=None)
    def test_no_word_claimed_twice_randomized(self, word_texts, span_texts):
        words = word_row(word_texts) if word_texts else []
        quoted = [span_of(s) for s in span_texts if s.strip()]
        result = align_spans(quoted, words)
        claimed = [i for m in result.matches for i in m.word_indices]
        assert len(claimed) == len(set(claimed))
        assert set(result.unmatched_word_indices) == set(range(len(words))) - set(claimed)


class TestGroundedSpans:
    def test_union_and_identity_quantization(self):
        words = [
            OcrWord("Summer", PixelBox(0.0, 0.0, 100.0, 40.0), 0.9),
            OcrWord("Sale", PixelBox(110.0, 0.0, 200.0, 40.0), 0.9),
        ]
        spans = [span_of("Summer Sale")]
        result = align_spans(spans, words)
        (grounded,) = grounded_spans_from_alignment(result, spans, words, 512, 512)
        assert grounded.box == NormBox(0, 0, 200, 40)
        assert grounded.text == "Summer Sale"
        assert grounded.source_word_indices == (0, 1)

    def test_empty_matches(self):
        result = align_spans([span_of("OPEN")], [])
        assert grounded_spans_from_alignment(result, [span_of("OPEN")], [], 512, 512) == ()

    def test_single_word_span(self):
        words = [OcrWord("OPEN", PixelBox(10.0, 10.0, 90.0, 30.0), 0.9)]
        spans = [span_of("OPEN")]
        result = align_spans(spans, words)
        (grounded,) = grounded_spans_from_alignment(result, spans, words, 512, 512)
        assert grounded.box == NormBox(10, 10, 90, 30)
