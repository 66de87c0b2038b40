"""Axis-aligned box geometry and the record types shared by every pipeline stage.

All types are immutable values; all operations are pure, so everything here
is safe to use from concurrent workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

# Normalized coordinates live on a fixed integer grid, independent of the
# source image resolution.
COORD_MAX = 512


@dataclass(frozen=True)
class PixelBox:
    """Box corners in pixel coordinates; (x_min, y_min) is the upper-left."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        for name in ("x_min", "y_min", "x_max", "y_max"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v) or v < 0:
                raise ValueError(f"PixelBox.{name} must be finite and >= 0, got {v!r}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(
                f"degenerate PixelBox ({self.x_min}, {self.y_min}, {self.x_max}, {self.y_max})"
            )

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)


@dataclass(frozen=True)
class NormBox:
    """Box corners as integers on the [0, COORD_MAX] grid."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self):
        for name in ("x_min", "y_min", "x_max", "y_max"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or not 0 <= v <= COORD_MAX:
                raise ValueError(f"NormBox.{name} must be an int in [0, {COORD_MAX}], got {v!r}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(
                f"degenerate NormBox ({self.x_min}, {self.y_min}, {self.x_max}, {self.y_max})"
            )

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)


Box = PixelBox | NormBox


def box_area(b: Box) -> float:
    return (b.x_max - b.x_min) * (b.y_max - b.y_min)


def box_union(boxes: Sequence[PixelBox]) -> PixelBox:
    """Minimal axis-aligned box containing every input box."""
    if not boxes:
        raise ValueError("box_union requires at least one box")
    return PixelBox(
        x_min=min(b.x_min for b in boxes),
        y_min=min(b.y_min for b in boxes),
        x_max=max(b.x_max for b in boxes),
        y_max=max(b.y_max for b in boxes),
    )


def box_iou(a: Box, b: Box) -> float:
    """Intersection over union; 0.0 for disjoint boxes.

    Both boxes must live in the same coordinate space (both pixel or both
    normalized); mixing spaces raises TypeError.
    """
    if type(a) is not type(b):
        raise TypeError(f"cannot mix coordinate spaces: {type(a).__name__} vs {type(b).__name__}")
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = box_area(a) + box_area(b) - inter
    return inter / union


class SampleSource(str, Enum):
    PUBLIC = "public"
    MINED = "mined"


@dataclass(frozen=True)
class OcrWord:
    """One OCR detection: word text, pixel box, and engine confidence."""

    text: str
    box: PixelBox
    confidence: float

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("OcrWord.text must be non-empty after trimming")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"OcrWord.confidence must be in [0, 1], got {self.confidence!r}")


@dataclass(frozen=True)
class GroundedSpan:
    """A prompt-entailed text span with its normalized box.

    ``source_word_indices`` point into the owning sample's OCR words and are
    strictly increasing; the box is the quantized union of those words'
    pixel boxes.
    """

    text: str
    box: NormBox
    source_word_indices: tuple[int, ...]

    def __post_init__(self):
        if not self.text:
            raise ValueError("GroundedSpan.text must be non-empty")
        idx = tuple(self.source_word_indices)
        object.__setattr__(self, "source_word_indices", idx)
        if not idx:
            raise ValueError("GroundedSpan.source_word_indices must be non-empty")
        if any(not isinstance(i, int) or i < 0 for i in idx):
            raise ValueError(f"GroundedSpan.source_word_indices must be non-negative ints: {idx}")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError(f"GroundedSpan.source_word_indices must be strictly increasing: {idx}")


@dataclass(frozen=True)
class SampleRecord:
    """One image's prompt, OCR words, grounded spans, and provenance."""

    id: str
    image_ref: str
    width: int
    height: int
    prompt: str
    ocr_words: tuple[OcrWord, ...] = ()
    grounded_spans: tuple[GroundedSpan, ...] = ()
    source: SampleSource = SampleSource.PUBLIC
    topic_path: tuple[str, ...] | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("SampleRecord.id must be non-empty")
        for name in ("width", "height"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ValueError(f"SampleRecord.{name} must be an int >= 1, got {v!r}")
        object.__setattr__(self, "ocr_words", tuple(self.ocr_words))
        object.__setattr__(self, "grounded_spans", tuple(self.grounded_spans))
        object.__setattr__(self, "source", SampleSource(self.source))
        if self.topic_path is not None:
            object.__setattr__(self, "topic_path", tuple(self.topic_path))
        n = len(self.ocr_words)
        for span in self.grounded_spans:
            if any(i >= n for i in span.source_word_indices):
                raise ValueError(
                    f"sample {self.id!r}: span {span.text!r} references word index "
                    f"outside the {n} OCR words"
                )
