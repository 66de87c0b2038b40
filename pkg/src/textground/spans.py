"""Quoted-span extraction from captions, plus the toolkit-wide text normalization.

Every string comparison in the toolkit (alignment, coverage, error rates)
goes through ``normalize_text`` / ``tokenize_words`` so that matching is
well-defined and engine-independent.
"""

from __future__ import annotations

import logging
import unicodedata
from dataclasses import dataclass

logger = logging.getLogger(__name__)

# Accepted quote families; a span closes only on its own family's closer.
_QUOTE_CLOSERS = {
    '"': '"',
    "“": "”",  # curly double
    "'": "'",
    "‘": "’",  # curly single
}
# Single-quote characters that double as apostrophes inside words.
_APOSTROPHE_LIKE = {"'", "’"}


@dataclass(frozen=True)
class QuotedSpan:
    """A quoted caption fragment; ``caption[start:end]`` is exactly ``text``."""

    text: str
    start: int
    end: int

    def __post_init__(self):
        if self.end <= self.start:
            raise ValueError(f"QuotedSpan range must be non-empty: ({self.start}, {self.end})")
        if not self.text.strip():
            raise ValueError("QuotedSpan.text must be non-empty after trimming")


def _is_apostrophe(caption: str, i: int) -> bool:
    """True when the quote char at ``i`` sits between two letters/digits."""
    if caption[i] not in _APOSTROPHE_LIKE:
        return False
    return 0 < i < len(caption) - 1 and caption[i - 1].isalnum() and caption[i + 1].isalnum()


def extract_spans(caption: str) -> list[QuotedSpan]:
    """Return quoted spans in left-to-right order.

    Empty-content quotes are dropped; an opening quote with no closer yields
    no span and logs a diagnostic. Nested quotes of other families are kept
    as literal span content.
    """
    spans: list[QuotedSpan] = []
    i = 0
    n = len(caption)
    while i < n:
        ch = caption[i]
        closer = _QUOTE_CLOSERS.get(ch)
        if closer is None or _is_apostrophe(caption, i):
            i += 1
            continue
        j = i + 1
        while j < n:
            if caption[j] == closer and not _is_apostrophe(caption, j):
                break
            j += 1
        if j >= n:
            logger.warning("unmatched %r quote at offset %d: %r", ch, i, caption)
            i += 1
            continue
        text = caption[i + 1 : j]
        if text.strip():
            spans.append(QuotedSpan(text=text, start=i + 1, end=j))
        i = j + 1
    return spans


def normalize_text(s: str) -> str:
    """Canonical form: case-folded, NFC-composed, single-spaced, edges trimmed.

    Leading and trailing punctuation/whitespace is stripped; interior
    punctuation is preserved. Idempotent.
    """
    s = unicodedata.normalize("NFC", s.casefold())
    s = " ".join(s.split())
    start, end = 0, len(s)
    while start < end and _strippable(s[start]):
        start += 1
    while end > start and _strippable(s[end - 1]):
        end -= 1
    return s[start:end]


def _strippable(ch: str) -> bool:
    return ch.isspace() or unicodedata.category(ch).startswith("P")


def tokenize_words(s: str) -> list[str]:
    """Whitespace tokens of the normalized text; [] for effectively-empty input."""
    return normalize_text(s).split()
