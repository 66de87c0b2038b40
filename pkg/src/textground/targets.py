"""Training-target construction: box quantization, the span block grammar,
sequence assembly in all variant/order configurations, and the lossless parser.

A target sequence is image tokens plus one block per grounded span. Each
block is SPAN_START, the span's character tokens (omitted for bbox-only),
BOX_SEP, four coordinate tokens x_min y_min x_max y_max (omitted for
text-only), SPAN_END. Post-image order appends blocks and SEQ_END after the
image tokens; pre-image order emits blocks, SEQ_END_TEXT, then image tokens.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import ClassVar, Iterable, Sequence

from .errors import TargetParseError, VocabError
from .geometry import COORD_MAX, GroundedSpan, NormBox, PixelBox

PRINTABLE_ASCII = "".join(chr(c) for c in range(32, 127))


def quantize_box(box: PixelBox, width: int, height: int) -> NormBox:
    """Scale a pixel box onto the integer [0, COORD_MAX] grid, rounding half up.

    An edge that collapses to zero length is re-opened by one grid unit so
    the result is a valid box. The box must lie inside the image.
    """
    if box.x_max > width or box.y_max > height:
        raise ValueError(
            f"box {box.as_tuple()} extends outside the {width}x{height} image"
        )
    x_min = _quantize(box.x_min, width)
    x_max = _quantize(box.x_max, width)
    y_min = _quantize(box.y_min, height)
    y_max = _quantize(box.y_max, height)
    if x_min == x_max:
        if x_max < COORD_MAX:
            x_max += 1
        else:
            x_min -= 1
    if y_min == y_max:
        if y_max < COORD_MAX:
            y_max += 1
        else:
            y_min -= 1
    return NormBox(x_min, y_min, x_max, y_max)


def _quantize(v: float, dim: int) -> int:
    scaled = math.floor(v * COORD_MAX / dim + 0.5)
    return min(max(scaled, 0), COORD_MAX)


def dequantize_box(box: NormBox, width: int, height: int) -> PixelBox:
    """Map a normalized box back to pixel coordinates."""
    return PixelBox(
        x_min=box.x_min * width / COORD_MAX,
        y_min=box.y_min * height / COORD_MAX,
        x_max=box.x_max * width / COORD_MAX,
        y_max=box.y_max * height / COORD_MAX,
    )


class Variant(str, Enum):
    TEXT_ONLY = "text"
    BBOX_ONLY = "bbox"
    TEXT_AND_BBOX = "both"


class Order(str, Enum):
    POST_IMAGE = "post"
    PRE_IMAGE = "pre"


@dataclass(frozen=True)
class BuildConfig:
    variant: Variant = Variant.TEXT_AND_BBOX
    order: Order = Order.POST_IMAGE
    alpha: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        object.__setattr__(self, "order", Order(self.order))
        if not (math.isfinite(self.alpha) and self.alpha >= 0):
            raise ValueError(f"BuildConfig.alpha must be finite and >= 0, got {self.alpha!r}")


@dataclass(frozen=True)
class VocabLayout:
    """Token id assignment: control tokens, coordinate tokens, characters, image ids.

    Ranges are contiguous and pairwise disjoint; coordinate tokens are a
    bijection with the integers 0..COORD_MAX.
    """

    charset: str = PRINTABLE_ASCII
    n_image_tokens: int = 1024

    SPAN_START: ClassVar[int] = 0
    BOX_SEP: ClassVar[int] = 1
    SPAN_END: ClassVar[int] = 2
    SEQ_END: ClassVar[int] = 3
    SEQ_END_TEXT: ClassVar[int] = 4

    def __post_init__(self):
        if len(set(self.charset)) != len(self.charset) or not self.charset:
            raise ValueError("VocabLayout.charset must be non-empty without duplicates")
        if self.n_image_tokens < 1:
            raise ValueError("VocabLayout.n_image_tokens must be >= 1")
        object.__setattr__(self, "_char_ids", {c: self.char_base + i for i, c in enumerate(self.charset)})

    @property
    def coord_base(self) -> int:
        return 5

    @property
    def char_base(self) -> int:
        return self.coord_base + COORD_MAX + 1

    @property
    def image_base(self) -> int:
        return self.char_base + len(self.charset)

    @property
    def vocab_size(self) -> int:
        return self.image_base + self.n_image_tokens

    def coord_token(self, value: int) -> int:
        if not 0 <= value <= COORD_MAX:
            raise VocabError(f"coordinate {value!r} outside [0, {COORD_MAX}]")
        return self.coord_base + value

    def coord_value(self, token: int) -> int:
        if not self.is_coord(token):
            raise VocabError(f"token {token} is not a coordinate token")
        return token - self.coord_base

    def is_coord(self, token: int) -> bool:
        return self.coord_base <= token <= self.coord_base + COORD_MAX

    def is_char(self, token: int) -> bool:
        return self.char_base <= token < self.char_base + len(self.charset)

    def is_image(self, token: int) -> bool:
        return self.image_base <= token < self.image_base + self.n_image_tokens

    def encode_text(self, text: str) -> list[int]:
        try:
            return [self._char_ids[c] for c in text]
        except KeyError as exc:
            raise VocabError(f"span {text!r} contains unencodable character {exc.args[0]!r}") from None

    def decode_text(self, tokens: Iterable[int]) -> str:
        chars = []
        for t in tokens:
            if not self.is_char(t):
                raise VocabError(f"token {t} is not a character token")
            chars.append(self.charset[t - self.char_base])
        return "".join(chars)


@dataclass(frozen=True)
class TargetSequence:
    """Token ids plus the two disjoint supervision masks covering every position."""

    tokens: tuple[int, ...]
    img_mask: tuple[bool, ...]
    text_mask: tuple[bool, ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "img_mask", tuple(self.img_mask))
        object.__setattr__(self, "text_mask", tuple(self.text_mask))
        if not (len(self.tokens) == len(self.img_mask) == len(self.text_mask)):
            raise ValueError("TargetSequence masks must match token length")
        for i, (im, tm) in enumerate(zip(self.img_mask, self.text_mask)):
            if im and tm:
                raise ValueError(f"masks overlap at position {i}")
            if not (im or tm):
                raise ValueError(f"position {i} is covered by neither mask")

    def __len__(self) -> int:
        return len(self.tokens)


def _reading_order_spans(spans: Sequence[GroundedSpan]) -> list[GroundedSpan]:
    return sorted(spans, key=lambda s: (s.box.y_min, s.box.x_min, s.box.x_max, s.box.y_max))


def span_block(span: GroundedSpan, cfg: BuildConfig, vocab: VocabLayout) -> list[int]:
    """Token block for one span under the configured variant."""
    block = [vocab.SPAN_START]
    if cfg.variant is not Variant.BBOX_ONLY:
        block.extend(vocab.encode_text(span.text))
    block.append(vocab.BOX_SEP)
    if cfg.variant is not Variant.TEXT_ONLY:
        block.extend(vocab.coord_token(v) for v in span.box.as_tuple())
    block.append(vocab.SPAN_END)
    return block


def build_target(
    image_tokens: Sequence[int],
    spans: Sequence[GroundedSpan],
    cfg: BuildConfig = BuildConfig(),
    vocab: VocabLayout = VocabLayout(),
) -> TargetSequence:
    """Assemble the supervised token sequence with its image/text masks.

    Span blocks are emitted in reading order. Post-image sequences keep the
    image tokens as an exact prefix, so truncating at the last image token
    recovers the plain unsupervised target.
    """
    if not image_tokens:
        raise ValueError("image_tokens must be non-empty")
    for t in image_tokens:
        if not vocab.is_image(t):
            raise VocabError(f"id {t} is not in the image-token range")
    blocks: list[int] = []
    for span in _reading_order_spans(spans):
        blocks.extend(span_block(span, cfg, vocab))

    image = list(image_tokens)
    if cfg.order is Order.POST_IMAGE:
        tokens = image + blocks + [vocab.SEQ_END]
        img_mask = [True] * len(image) + [False] * (len(blocks) + 1)
    else:
        tokens = blocks + [vocab.SEQ_END_TEXT] + image
        img_mask = [False] * (len(blocks) + 1) + [True] * len(image)
    text_mask = [not m for m in img_mask]
    return TargetSequence(tuple(tokens), tuple(img_mask), tuple(text_mask))


@dataclass(frozen=True)
class ParsedSpan:
    text: str
    box: NormBox | None


@dataclass(frozen=True)
class ParsedTarget:
    image_tokens: tuple[int, ...]
    spans: tuple[ParsedSpan, ...]
    variant: Variant | None
    order: Order


def parse_target(seq: TargetSequence, vocab: VocabLayout = VocabLayout()) -> ParsedTarget:
    """Reconstruct image tokens and spans from a built sequence.

    Raises TargetParseError (with the offending position) on any block
    grammar violation or mask inconsistency. The variant is None when the
    sequence has no spans to observe it from.
    """
    tokens = seq.tokens
    if not tokens:
        raise TargetParseError("empty sequence", 0)
    pos = 0

    def parse_image_run() -> tuple[int, ...]:
        nonlocal pos
        start = pos
        while pos < len(tokens) and vocab.is_image(tokens[pos]):
            pos += 1
        if pos == start:
            raise TargetParseError("expected at least one image token", pos)
        return tokens[start:pos]

    def parse_blocks(terminators: tuple[int, ...]) -> tuple[tuple[ParsedSpan, ...], Variant | None]:
        nonlocal pos
        spans: list[ParsedSpan] = []
        variant: Variant | None = None
        while pos < len(tokens) and tokens[pos] not in terminators:
            spans.append(_parse_block())
            block_variant = _observed_variant(spans[-1])
            if variant is None:
                variant = block_variant
            elif block_variant is not variant:
                raise TargetParseError(
                    f"blocks mix variants {variant.value} and {block_variant.value}", pos
                )
        return tuple(spans), variant

    def _parse_block() -> ParsedSpan:
        nonlocal pos
        if tokens[pos] != vocab.SPAN_START:
            raise TargetParseError(f"expected SPAN_START, found token {tokens[pos]}", pos)
        pos += 1
        chars = []
        while pos < len(tokens) and vocab.is_char(tokens[pos]):
            chars.append(tokens[pos])
            pos += 1
        if pos >= len(tokens) or tokens[pos] != vocab.BOX_SEP:
            raise TargetParseError("expected BOX_SEP after span text", pos)
        pos += 1
        coords = []
        while pos < len(tokens) and vocab.is_coord(tokens[pos]):
            coords.append(vocab.coord_value(tokens[pos]))
            pos += 1
        if len(coords) not in (0, 4):
            raise TargetParseError(f"expected 0 or 4 coordinate tokens, found {len(coords)}", pos)
        if pos >= len(tokens) or tokens[pos] != vocab.SPAN_END:
            raise TargetParseError("expected SPAN_END", pos)
        pos += 1
        box = NormBox(*coords) if coords else None
        return ParsedSpan(text=vocab.decode_text(chars), box=box)

    if vocab.is_image(tokens[0]):
        order = Order.POST_IMAGE
        image = parse_image_run()
        spans, variant = parse_blocks(terminators=(vocab.SEQ_END,))
        if pos >= len(tokens) or tokens[pos] != vocab.SEQ_END:
            raise TargetParseError("expected SEQ_END", pos)
        pos += 1
    else:
        order = Order.PRE_IMAGE
        spans, variant = parse_blocks(terminators=(vocab.SEQ_END_TEXT,))
        if pos >= len(tokens) or tokens[pos] != vocab.SEQ_END_TEXT:
            raise TargetParseError("expected SEQ_END_TEXT", pos)
        pos += 1
        image = parse_image_run()
    if pos != len(tokens):
        raise TargetParseError("trailing tokens after sequence end", pos)

    _check_masks(seq, len(image), order)
    return ParsedTarget(image_tokens=image, spans=spans, variant=variant, order=order)


def _observed_variant(span: ParsedSpan) -> Variant:
    if span.box is None:
        return Variant.TEXT_ONLY
    if not span.text:
        return Variant.BBOX_ONLY
    return Variant.TEXT_AND_BBOX


def _check_masks(seq: TargetSequence, n_image: int, order: Order) -> None:
    n = len(seq.tokens)
    if order is Order.POST_IMAGE:
        expected_img = [i < n_image for i in range(n)]
    else:
        expected_img = [i >= n - n_image for i in range(n)]
    if list(seq.img_mask) != expected_img:
        first = next(i for i, (a, b) in enumerate(zip(seq.img_mask, expected_img)) if a != b)
        raise TargetParseError("img_mask does not match the parsed image segment", first)


def block_length(span: GroundedSpan, cfg: BuildConfig) -> int:
    """Closed-form token count of one span block."""
    n_chars = 0 if cfg.variant is Variant.BBOX_ONLY else len(span.text)
    n_coords = 0 if cfg.variant is Variant.TEXT_ONLY else 4
    return 3 + n_chars + n_coords


def target_length(image_tokens: Sequence[int], spans: Sequence[GroundedSpan], cfg: BuildConfig) -> int:
    """Closed-form total length of the built sequence."""
    return len(image_tokens) + sum(block_length(s, cfg) for s in spans) + 1
