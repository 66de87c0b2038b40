"""External-service clients and their in-process mocks.

Every client (semantic auditor, CLIP-style scorer, query expander, OCR
stand-in) speaks one transport contract: a single JSON object per line,
request out, response back, over either a subprocess's stdio or an HTTP
endpoint. Mocks run in-process behind the same interface so pipelines are
testable without any model service.

Run ``python -m textground.clients --serve mock-auditor`` to expose the mock
auditor over stdio for transport tests.
"""

from __future__ import annotations

import json
import random
import subprocess
import sys
import urllib.error
import urllib.request
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

from .errors import ClientError, ClientTransportError
from .geometry import OcrWord, PixelBox, SampleRecord, box_union
from .metrics import HypothesisOcr
from .spans import extract_spans
from .targets import dequantize_box, quantize_box
from .util import stable_hash64, stable_unit


class LineTransport(Protocol):
    def call(self, payload: dict) -> dict: ...


class InProcessTransport:
    """Runs a handler directly; the mock deployment mode."""

    def __init__(self, handler: Callable[[dict], dict]):
        self._handler = handler

    def call(self, payload: dict) -> dict:
        return self._handler(payload)


class SubprocessLineTransport:
    """One JSON line per request/response over a child process's stdio."""

    def __init__(self, argv: Sequence[str]):
        self.argv = list(argv)
        self._proc: subprocess.Popen | None = None

    def _ensure(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            try:
                self._proc = subprocess.Popen(
                    self.argv,
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    text=True,
                    encoding="utf-8",
                )
            except OSError as exc:
                raise ClientTransportError(f"failed to start {self.argv}: {exc}") from exc
        return self._proc

    def call(self, payload: dict) -> dict:
        proc = self._ensure()
        try:
            proc.stdin.write(json.dumps(payload, ensure_ascii=False) + "\n")
            proc.stdin.flush()
            line = proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise ClientTransportError(f"subprocess transport failed: {exc}") from exc
        if not line:
            raise ClientTransportError("subprocess closed its output stream")
        try:
            return json.loads(line)
        except json.JSONDecodeError as exc:
            raise ClientTransportError(f"malformed response line: {line!r}") from exc

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            self._proc.stdin.close()
            self._proc.wait(timeout=5)
        self._proc = None


class HttpLineTransport:
    """POSTs one JSON object per request to an HTTP endpoint."""

    def __init__(self, url: str, timeout: float = 10.0):
        self.url = url
        self.timeout = timeout

    def call(self, payload: dict) -> dict:
        body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
        request = urllib.request.Request(
            self.url, data=body, headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as response:
                return json.loads(response.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, json.JSONDecodeError) as exc:
            raise ClientTransportError(f"http transport to {self.url} failed: {exc}") from exc


@dataclass(frozen=True)
class AuditRequest:
    """What the semantic auditor sees for one sample.

    ``grounded_spans`` entries carry the pixel boxes of their source words so
    a rule-based auditor can re-derive the merged box.
    """

    image_ref: str
    width: int
    height: int
    caption: str
    spans: tuple[str, ...]
    grounded_spans: tuple[dict, ...]

    @classmethod
    def from_sample(cls, sample: SampleRecord) -> "AuditRequest":
        return cls(
            image_ref=sample.image_ref,
            width=sample.width,
            height=sample.height,
            caption=sample.prompt,
            spans=tuple(s.text for s in extract_spans(sample.prompt)),
            grounded_spans=tuple(
                {
                    "text": g.text,
                    "box": list(g.box.as_tuple()),
                    "source_boxes": [
                        list(sample.ocr_words[i].box.as_tuple()) for i in g.source_word_indices
                    ],
                }
                for g in sample.grounded_spans
            ),
        )

    def to_payload(self) -> dict:
        return {
            "image_ref": self.image_ref,
            "width": self.width,
            "height": self.height,
            "caption": self.caption,
            "spans": list(self.spans),
            "grounded_spans": [dict(g) for g in self.grounded_spans],
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "AuditRequest":
        return cls(
            image_ref=payload["image_ref"],
            width=payload["width"],
            height=payload["height"],
            caption=payload["caption"],
            spans=tuple(payload["spans"]),
            grounded_spans=tuple(payload["grounded_spans"]),
        )


@dataclass(frozen=True)
class AuditResponse:
    span_grounded: tuple[bool, ...]
    coherent: bool

    def to_payload(self) -> dict:
        return {"span_grounded": list(self.span_grounded), "coherent": self.coherent}

    @classmethod
    def from_payload(cls, payload: dict) -> "AuditResponse":
        try:
            return cls(
                span_grounded=tuple(bool(v) for v in payload["span_grounded"]),
                coherent=bool(payload["coherent"]),
            )
        except (KeyError, TypeError) as exc:
            raise ClientError(f"malformed audit response: {payload!r}") from exc


class VlmAuditClient:
    """Typed facade over a LineTransport for semantic audits."""

    def __init__(self, transport: LineTransport):
        self._transport = transport

    def audit(self, request: AuditRequest) -> AuditResponse:
        return AuditResponse.from_payload(self._transport.call(request.to_payload()))

    @classmethod
    def in_process_mock(cls) -> "VlmAuditClient":
        return cls(InProcessTransport(mock_audit_handler))


def mock_audit_handler(payload: dict) -> dict:
    """Rule-based stand-in for a VLM semantic auditor.

    A caption span counts as grounded when some grounded span carries exactly
    its text (consumed one-for-one). The annotation is coherent when every
    merged box equals the quantized union of its source word boxes.
    """
    request = AuditRequest.from_payload(payload)
    remaining = [g["text"] for g in request.grounded_spans]
    span_grounded = []
    for span_text in request.spans:
        if span_text in remaining:
            remaining.remove(span_text)
            span_grounded.append(True)
        else:
            span_grounded.append(False)
    coherent = True
    for g in request.grounded_spans:
        source = [PixelBox(*b) for b in g["source_boxes"]]
        if not source:
            coherent = False
            break
        merged = quantize_box(box_union(source), request.width, request.height)
        if list(merged.as_tuple()) != list(g["box"]):
            coherent = False
            break
    return AuditResponse(tuple(span_grounded), coherent).to_payload()


class FlakyTransport:
    """Deterministically failing wrapper for exercising retry policies."""

    def __init__(self, inner: LineTransport, fail_first: int):
        self._inner = inner
        self._fail_remaining = fail_first

    def call(self, payload: dict) -> dict:
        if self._fail_remaining > 0:
            self._fail_remaining -= 1
            raise ClientTransportError("injected transport failure")
        return self._inner.call(payload)


class MockClipScorer:
    """Deterministic pseudo-scorer; a stand-in for an embedding-model client."""

    def score(self, image_ref: str, prompt: str) -> float:
        return 0.2 + 0.6 * stable_unit("clip", image_ref, prompt)


class TransportClipScorer:
    """Image-text scorer backed by an external service over a LineTransport."""

    def __init__(self, transport: LineTransport):
        self._transport = transport

    def score(self, image_ref: str, prompt: str) -> float:
        response = self._transport.call({"image_ref": image_ref, "prompt": prompt})
        value = response.get("score")
        if not isinstance(value, (int, float)):
            raise ClientError(f"malformed score response: {response!r}")
        return float(value)


def mock_clip_handler(payload: dict) -> dict:
    return {"score": MockClipScorer().score(payload["image_ref"], payload["prompt"])}


class LlmExpandClient:
    """Typed facade over a LineTransport for query expansion."""

    def __init__(self, transport: LineTransport):
        self._transport = transport

    def expand(self, subtopic: str, objects: Sequence[str], contexts: Sequence[str],
               modifiers: Sequence[str]) -> list[str]:
        payload = {
            "subtopic": subtopic,
            "objects": list(objects),
            "contexts": list(contexts),
            "modifiers": list(modifiers),
        }
        response = self._transport.call(payload)
        queries = response.get("queries")
        if not isinstance(queries, list) or not all(isinstance(q, str) and q.strip() for q in queries):
            raise ClientError(f"malformed expansion response: {response!r}")
        return queries


def mock_expand_handler(payload: dict) -> dict:
    """Deterministic template permutations standing in for an LLM expander."""
    queries = []
    for obj in payload["objects"]:
        for ctx in payload["contexts"]:
            queries.append(f"{obj} beside a {ctx}".capitalize())
            for mod in payload["modifiers"]:
                queries.append(f"{obj} {mod} near a {ctx}".capitalize())
    return {"queries": queries}


@dataclass(frozen=True)
class OcrNoise:
    """Perturbation strengths for the mock OCR engine."""

    char_sub_rate: float = 0.0
    box_jitter_px: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.char_sub_rate <= 1.0:
            raise ValueError("char_sub_rate must be in [0, 1]")
        if self.box_jitter_px < 0:
            raise ValueError("box_jitter_px must be >= 0")


_SUBSTITUTION_ALPHABET = "abcdefghijklmnopqrstuvwxyz0123456789"


def mock_ocr(sample: SampleRecord, noise: OcrNoise = OcrNoise(), seed: int = 0) -> HypothesisOcr:
    """Deterministic OCR stand-in: perturbed readings of the ground-truth spans.

    Each grounded span yields one detected line whose text has per-character
    substitutions at ``char_sub_rate`` and whose box edges are jittered
    uniformly within +/- ``box_jitter_px``. Zero noise reproduces the ground
    truth exactly, so the metric suite scores it perfectly.
    """
    words = []
    for i, span in enumerate(sample.grounded_spans):
        rng = random.Random(stable_hash64("mock-ocr", sample.id, seed, i))
        chars = []
        for ch in span.text:
            if noise.char_sub_rate > 0 and rng.random() < noise.char_sub_rate:
                replacement = rng.choice(_SUBSTITUTION_ALPHABET)
                while replacement == ch:
                    replacement = rng.choice(_SUBSTITUTION_ALPHABET)
                chars.append(replacement)
            else:
                chars.append(ch)
        box = dequantize_box(span.box, sample.width, sample.height)
        if noise.box_jitter_px > 0:
            box = _jitter(box, noise.box_jitter_px, sample.width, sample.height, rng)
        words.append(OcrWord(text="".join(chars), box=box, confidence=1.0))
    return HypothesisOcr(tuple(words))


def _jitter(box: PixelBox, amount: float, width: int, height: int,
            rng: random.Random) -> PixelBox:
    def clamp(v: float, hi: int) -> float:
        return min(max(v, 0.0), float(hi))

    x0 = clamp(box.x_min + rng.uniform(-amount, amount), width)
    x1 = clamp(box.x_max + rng.uniform(-amount, amount), width)
    y0 = clamp(box.y_min + rng.uniform(-amount, amount), height)
    y1 = clamp(box.y_max + rng.uniform(-amount, amount), height)
    if x1 <= x0:
        x0, x1 = max(0.0, x0 - 0.5), min(float(width), x1 + 0.5)
        if x1 <= x0:
            x0, x1 = box.x_min, box.x_max
    if y1 <= y0:
        y0, y1 = max(0.0, y0 - 0.5), min(float(height), y1 + 0.5)
        if y1 <= y0:
            y0, y1 = box.y_min, box.y_max
    return PixelBox(x0, y0, x1, y1)


def _serve_stdio(handler: Callable[[dict], dict]) -> None:
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        response = handler(json.loads(line))
        sys.stdout.write(json.dumps(response, ensure_ascii=False) + "\n")
        sys.stdout.flush()


def main(argv: Sequence[str] | None = None) -> int:
    import argparse

    parser = argparse.ArgumentParser(description="Serve a mock client over stdio.")
    parser.add_argument("--serve", choices=["mock-auditor", "mock-expander"], required=True)
    args = parser.parse_args(argv)
    handler = mock_audit_handler if args.serve == "mock-auditor" else mock_expand_handler
    _serve_stdio(handler)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
