"""Shared strategies and fixtures for the test suite."""

from __future__ import annotations

import hypothesis.strategies as st
import pytest

from textground.geometry import GroundedSpan, NormBox, OcrWord, PixelBox, SampleRecord


@st.composite
def pixel_boxes(draw, max_coord=100, integer=False):
    if integer:
        coords = st.integers(min_value=0, max_value=max_coord)
    else:
        coords = st.floats(min_value=0, max_value=max_coord, allow_nan=False, width=32)
    x0, x1 = sorted((draw(coords), draw(coords)))
    y0, y1 = sorted((draw(coords), draw(coords)))
    if x1 <= x0:
        x1 = x0 + 1
    if y1 <= y0:
        y1 = y0 + 1
    return PixelBox(float(x0), float(y0), float(x1), float(y1))


@st.composite
def norm_boxes(draw, max_coord=512):
    coords = st.integers(min_value=0, max_value=max_coord - 1)
    x0 = draw(coords)
    y0 = draw(coords)
    x1 = draw(st.integers(min_value=x0 + 1, max_value=max_coord))
    y1 = draw(st.integers(min_value=y0 + 1, max_value=max_coord))
    return NormBox(x0, y0, x1, y1)


@st.composite
def ocr_words(draw, max_coord=500):
    text = draw(st.text(alphabet="abcdefgh0123456789", min_size=1, max_size=8))
    return OcrWord(
        text=text,
        box=draw(pixel_boxes(max_coord=max_coord)),
        confidence=draw(st.floats(min_value=0, max_value=1, allow_nan=False)),
    )


@pytest.fixture
def simple_sample():
    """One hand-built, fully consistent sample: two spans, one filler word."""
    words = (
        OcrWord("Summer", PixelBox(10.0, 10.0, 150.0, 60.0), 0.95),
        OcrWord("Sale", PixelBox(160.0, 10.0, 250.0, 60.0), 0.9),
        OcrWord("OPEN", PixelBox(10.0, 100.0, 120.0, 150.0), 0.85),
        OcrWord("zxqvk", PixelBox(10.0, 200.0, 400.0, 400.0), 0.8),
    )
    spans = (
        GroundedSpan("Summer Sale", NormBox(10, 10, 250, 60), (0, 1)),
        GroundedSpan("OPEN", NormBox(10, 100, 120, 150), (2,)),
    )
    return SampleRecord(
        id="sample-001",
        image_ref="mem://sample-001",
        width=512,
        height=512,
        prompt='a storefront with a banner saying "Summer Sale" and a sign reading "OPEN"',
        ocr_words=words,
        grounded_spans=spans,
    )
