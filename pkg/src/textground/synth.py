"""Synthetic corpus generation for tests, demos, and the acceptance suite.

Samples are constructed to be internally consistent: every quoted prompt
span has OCR words laid out on its own row, grounded spans carry the exact
quantized union of their word boxes, and two long filler words supply
incidental scene text. The geometry guarantees each sample clears the
stage-1 thresholds (512x512 canvas, >10% text area, all words confident and
readable, unmatched ratio at most 2/3), so drops downstream come only from
the seeded downsampler.
"""

from __future__ import annotations

import random

from .geometry import GroundedSpan, OcrWord, PixelBox, SampleRecord, SampleSource, box_union
from .targets import quantize_box
from .util import stable_hash64

CANVAS = 512
ROW_HEIGHT = 80
ROW_PITCH = 120
ROW_TOP = 16
CHAR_WIDTH = 14
WORD_GAP = 12
LEFT_MARGIN = 8
FILLER_ROW = 3
FILLER_CHARS = 12

LEXICON = (
    "sale", "open", "fresh", "menu", "shop", "now", "off", "big", "hot", "new",
    "free", "deal", "save", "today", "grand", "pizza", "cafe", "book", "art",
    "show", "live", "music", "park", "exit", "stop", "north", "south", "gate",
    "hall", "room", "tour", "golf", "swim", "run", "fast", "slow", "cool",
    "warm", "50%", "20%",
)

_CONSONANTS = "bcdfghjklmnpqrstvwxz"

_TEMPLATES = (
    'a poster in a {place} that says {quoted}',
    'a storefront photo with a sign reading {quoted} in a {place}',
    'a flyer pinned in a {place} showing {quoted}',
    'an advertisement banner displaying {quoted} above a {place}',
)

_PLACES = ("mall", "station", "market", "plaza", "arcade", "lobby")

_TOPICS = (
    ("signage", "storefront", "retail"),
    ("signage", "road", "highway"),
    ("packaging", "food", "labels"),
)


def _row_words(rng: random.Random, n_words: int) -> list[str]:
    return [rng.choice(LEXICON) for _ in range(n_words)]


def _filler_text(rng: random.Random) -> str:
    return "".join(rng.choice(_CONSONANTS) for _ in range(FILLER_CHARS))


def make_sample(sample_id: str, seed: int) -> SampleRecord:
    """One deterministic sample; independent of every other sample."""
    rng = random.Random(stable_hash64("synth", sample_id, seed))
    n_spans = rng.choices((1, 2, 3), weights=(35, 30, 35))[0]
    span_word_counts = [
        rng.choices((1, 2, 3, 4, 5, 6), weights=(30, 25, 15, 10, 10, 10))[0]
        for _ in range(n_spans)
    ]

    ocr_words: list[OcrWord] = []
    span_texts: list[str] = []
    span_indices: list[tuple[int, ...]] = []
    for row, n_words in enumerate(span_word_counts):
        words = _row_words(rng, n_words)
        y0 = ROW_TOP + row * ROW_PITCH
        x = LEFT_MARGIN
        indices = []
        for word in words:
            w = len(word) * CHAR_WIDTH
            indices.append(len(ocr_words))
            ocr_words.append(
                OcrWord(
                    text=word,
                    box=PixelBox(float(x), float(y0), float(x + w), float(y0 + ROW_HEIGHT)),
                    confidence=round(rng.uniform(0.75, 0.99), 4),
                )
            )
            x += w + WORD_GAP
        span_texts.append(" ".join(words))
        span_indices.append(tuple(indices))

    y0 = ROW_TOP + FILLER_ROW * ROW_PITCH
    x = LEFT_MARGIN
    for _ in range(2):
        text = _filler_text(rng)
        w = len(text) * CHAR_WIDTH
        ocr_words.append(
            OcrWord(
                text=text,
                box=PixelBox(float(x), float(y0), float(x + w), float(y0 + ROW_HEIGHT)),
                confidence=round(rng.uniform(0.75, 0.99), 4),
            )
        )
        x += w + WORD_GAP

    grounded = tuple(
        GroundedSpan(
            text=text,
            box=quantize_box(
                box_union([ocr_words[i].box for i in indices]), CANVAS, CANVAS
            ),
            source_word_indices=indices,
        )
        for text, indices in zip(span_texts, span_indices)
    )

    quoted = " and ".join(f'"{text}"' for text in span_texts)
    prompt = rng.choice(_TEMPLATES).format(place=rng.choice(_PLACES), quoted=quoted)
    return SampleRecord(
        id=sample_id,
        image_ref=f"synth://{sample_id}",
        width=CANVAS,
        height=CANVAS,
        prompt=prompt,
        ocr_words=tuple(ocr_words),
        grounded_spans=grounded,
        source=SampleSource.MINED if rng.random() < 0.2 else SampleSource.PUBLIC,
        topic_path=rng.choice(_TOPICS),
    )


def make_synthetic_corpus(n_samples: int, seed: int = 0) -> list[SampleRecord]:
    return [make_sample(f"synth-{i:06d}", seed) for i in range(n_samples)]
