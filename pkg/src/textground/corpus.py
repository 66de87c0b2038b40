"""Line-delimited corpus files with manifest sidecars.

One sample per line, canonical JSON (sorted keys, no whitespace, raw UTF-8),
so identical corpora are byte-identical on disk. A sidecar manifest records
the schema version, the record count, and a digest of the file bytes;
reading verifies all three.

Schema, version 1. Each line is an object:
  id: str                  unique within the corpus
  image_ref: str           opaque URI
  width, height: int       pixels, >= 1
  prompt: str
  ocr_words: [{text: str, box: [x0, y0, x1, y1], confidence: float}]
  grounded_spans: [{text: str, box: [x0, y0, x1, y1] ints in [0, 512],
                    source_word_indices: [int]}]
  source: "public" | "mined"
  topic_path: [str] | null
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .errors import CorpusError, DataError, SchemaVersionError
from .geometry import GroundedSpan, NormBox, OcrWord, PixelBox, SampleRecord
from .metrics import HypothesisOcr

SCHEMA_VERSION = 1


def sample_to_payload(sample: SampleRecord) -> dict:
    return {
        "id": sample.id,
        "image_ref": sample.image_ref,
        "width": sample.width,
        "height": sample.height,
        "prompt": sample.prompt,
        "ocr_words": [
            {"text": w.text, "box": list(w.box.as_tuple()), "confidence": w.confidence}
            for w in sample.ocr_words
        ],
        "grounded_spans": [
            {
                "text": g.text,
                "box": list(g.box.as_tuple()),
                "source_word_indices": list(g.source_word_indices),
            }
            for g in sample.grounded_spans
        ],
        "source": sample.source.value,
        "topic_path": list(sample.topic_path) if sample.topic_path is not None else None,
    }


def sample_from_payload(payload: Mapping) -> SampleRecord:
    try:
        return SampleRecord(
            id=payload["id"],
            image_ref=payload["image_ref"],
            width=payload["width"],
            height=payload["height"],
            prompt=payload["prompt"],
            ocr_words=tuple(
                OcrWord(text=w["text"], box=PixelBox(*w["box"]), confidence=w["confidence"])
                for w in payload["ocr_words"]
            ),
            grounded_spans=tuple(
                GroundedSpan(
                    text=g["text"],
                    box=NormBox(*g["box"]),
                    source_word_indices=tuple(g["source_word_indices"]),
                )
                for g in payload["grounded_spans"]
            ),
            source=payload["source"],
            topic_path=payload.get("topic_path"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CorpusError(f"invalid sample record: {exc}") from exc


def dumps_line(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":")) + "\n"


def manifest_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".manifest.json")


@dataclass(frozen=True)
class CorpusManifest:
    schema_version: int
    count: int
    sha256: str

    def to_payload(self) -> dict:
        return {"schema_version": self.schema_version, "count": self.count, "sha256": self.sha256}

    @classmethod
    def from_payload(cls, payload: Mapping) -> "CorpusManifest":
        try:
            return cls(
                schema_version=payload["schema_version"],
                count=payload["count"],
                sha256=payload["sha256"],
            )
        except KeyError as exc:
            raise CorpusError(f"corpus manifest missing field {exc.args[0]!r}") from exc


def write_corpus(path: str | Path, samples: Iterable[SampleRecord]) -> CorpusManifest:
    """Write samples and the manifest sidecar; returns the manifest.

    Rejects duplicate ids with DataError before anything downstream can
    silently misattribute annotations.
    """
    path = Path(path)
    digest = hashlib.sha256()
    seen: set[str] = set()
    count = 0
    with path.open("w", encoding="utf-8", newline="") as handle:
        for sample in samples:
            if sample.id in seen:
                raise DataError(f"duplicate sample id {sample.id!r}")
            seen.add(sample.id)
            line = dumps_line(sample_to_payload(sample))
            handle.write(line)
            digest.update(line.encode("utf-8"))
            count += 1
    manifest = CorpusManifest(SCHEMA_VERSION, count, digest.hexdigest())
    manifest_path(path).write_text(
        json.dumps(manifest.to_payload(), sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )
    return manifest


def read_manifest(path: str | Path) -> CorpusManifest | None:
    sidecar = manifest_path(path)
    if not sidecar.exists():
        return None
    manifest = CorpusManifest.from_payload(json.loads(sidecar.read_text(encoding="utf-8")))
    if manifest.schema_version != SCHEMA_VERSION:
        raise SchemaVersionError(
            f"corpus schema version {manifest.schema_version} is not supported "
            f"(this toolkit reads version {SCHEMA_VERSION})"
        )
    return manifest


def read_corpus(path: str | Path, verify: bool = True) -> Iterator[SampleRecord]:
    """Stream samples from a corpus file, one record at a time.

    With ``verify`` and a manifest sidecar present, the record count and the
    content digest are checked as a side effect of streaming; mismatches
    raise CorpusError after the last record.
    """
    path = Path(path)
    manifest = read_manifest(path) if verify else None
    digest = hashlib.sha256()
    seen: set[str] = set()
    count = 0
    with path.open("r", encoding="utf-8", newline="") as handle:
        for line_number, line in enumerate(handle, start=1):
            digest.update(line.encode("utf-8"))
            stripped = line.strip()
            if not stripped:
                raise CorpusError(f"{path}:{line_number}: blank line in corpus")
            try:
                payload = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{line_number}: malformed record: {exc}") from exc
            try:
                sample = sample_from_payload(payload)
            except CorpusError as exc:
                raise CorpusError(f"{path}:{line_number}: {exc}") from exc
            if sample.id in seen:
                raise CorpusError(f"{path}:{line_number}: duplicate sample id {sample.id!r}")
            seen.add(sample.id)
            count += 1
            yield sample
    if manifest is not None:
        if manifest.count != count:
            raise CorpusError(
                f"{path}: manifest declares {manifest.count} records, file has {count}"
            )
        if manifest.sha256 != digest.hexdigest():
            raise CorpusError(f"{path}: content digest does not match manifest")


def load_corpus(path: str | Path, verify: bool = True) -> list[SampleRecord]:
    return list(read_corpus(path, verify=verify))


def write_hypotheses(path: str | Path, hypotheses: Mapping[str, HypothesisOcr]) -> None:
    """One line per sample id: the OCR hypothesis for the generated image."""
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        for sample_id in sorted(hypotheses):
            hyp = hypotheses[sample_id]
            payload = {
                "id": sample_id,
                "words": [
                    {"text": w.text, "box": list(w.box.as_tuple()), "confidence": w.confidence}
                    for w in hyp.words
                ],
            }
            handle.write(dumps_line(payload))


def read_hypotheses(path: str | Path) -> dict[str, HypothesisOcr]:
    hypotheses: dict[str, HypothesisOcr] = {}
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as handle:
        for line_number, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                payload = json.loads(stripped)
                words = tuple(
                    OcrWord(text=w["text"], box=PixelBox(*w["box"]), confidence=w["confidence"])
                    for w in payload["words"]
                )
                hypotheses[payload["id"]] = HypothesisOcr(words)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise CorpusError(f"{path}:{line_number}: malformed hypothesis: {exc}") from exc
    return hypotheses
