"""Difficulty stratification and benchmark manifest assembly.

A sample's difficulty is a function of two features only: how many grounded
boxes it has and the longest span's word count. Samples with no grounded
text are excluded rather than classified; a text-rendering benchmark item
without text is meaningless.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DataError, NotBenchmarkable
from .geometry import SampleRecord
from .spans import tokenize_words
from .util import stable_hash64


class Difficulty(str, Enum):
    EASY = "easy"
    MEDIUM = "medium"
    HARD = "hard"


# Quadrant boundaries: up to this many boxes / words per span counts as simple.
MAX_EASY_BOXES = 2
MAX_EASY_WORDS = 4


@dataclass(frozen=True)
class DifficultyFeatures:
    n_box: int
    w_max: int

    def __post_init__(self):
        if self.n_box < 1 or self.w_max < 1:
            raise NotBenchmarkable(
                f"difficulty features require n_box >= 1 and w_max >= 1, "
                f"got ({self.n_box}, {self.w_max})"
            )

    @classmethod
    def from_sample(cls, sample: SampleRecord) -> "DifficultyFeatures":
        if not sample.grounded_spans:
            raise NotBenchmarkable(f"sample {sample.id!r} has no grounded spans")
        w_max = max(len(tokenize_words(s.text)) for s in sample.grounded_spans)
        if w_max == 0:
            raise NotBenchmarkable(f"sample {sample.id!r} has only empty-token spans")
        return cls(n_box=len(sample.grounded_spans), w_max=w_max)


def classify(features: DifficultyFeatures) -> Difficulty:
    few_boxes = features.n_box <= MAX_EASY_BOXES
    short_spans = features.w_max <= MAX_EASY_WORDS
    if few_boxes and short_spans:
        return Difficulty.EASY
    if few_boxes or short_spans:
        return Difficulty.MEDIUM
    return Difficulty.HARD


def classify_sample(sample: SampleRecord) -> Difficulty:
    return classify(DifficultyFeatures.from_sample(sample))


@dataclass(frozen=True)
class BenchManifest:
    """Seeded per-level sample selection plus provenance of the source corpus."""

    levels: dict[Difficulty, tuple[str, ...]]
    seed: int
    corpus_digest: str
    shortfall: dict[Difficulty, int] = field(default_factory=dict)

    @property
    def counts(self) -> dict[Difficulty, int]:
        return {level: len(ids) for level, ids in self.levels.items()}

    def all_ids(self) -> list[str]:
        return [sample_id for ids in self.levels.values() for sample_id in ids]

    def to_payload(self) -> dict:
        return {
            "schema_version": 1,
            "seed": self.seed,
            "corpus_digest": self.corpus_digest,
            "levels": {level.value: list(ids) for level, ids in self.levels.items()},
            "counts": {level.value: n for level, n in self.counts.items()},
            "shortfall": {level.value: n for level, n in self.shortfall.items()},
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "BenchManifest":
        if payload.get("schema_version") != 1:
            raise DataError(f"unsupported bench manifest version {payload.get('schema_version')!r}")
        return cls(
            levels={Difficulty(k): tuple(v) for k, v in payload["levels"].items()},
            seed=payload["seed"],
            corpus_digest=payload["corpus_digest"],
            shortfall={Difficulty(k): v for k, v in payload.get("shortfall", {}).items()},
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_payload(), sort_keys=True, ensure_ascii=False, indent=1) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path: str | Path) -> "BenchManifest":
        return cls.from_payload(json.loads(Path(path).read_text(encoding="utf-8")))


def corpus_digest(samples: Sequence[SampleRecord]) -> str:
    """Order-insensitive digest of the corpus ids and annotation shape."""
    h = hashlib.sha256()
    keys = sorted(
        f"{s.id}\x1f{s.prompt}\x1f{len(s.ocr_words)}\x1f{len(s.grounded_spans)}" for s in samples
    )
    for key in keys:
        h.update(key.encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()


def build_bench(
    samples: Sequence[SampleRecord],
    quota_per_level: int,
    seed: int,
) -> BenchManifest:
    """Deterministic seeded selection of up to ``quota_per_level`` ids per level.

    Selection order is a stable hash of (level, id, seed), so the manifest is
    identical under any permutation of the input corpus. Levels with fewer
    candidates than the quota are filled completely and the gap recorded.
    """
    if quota_per_level < 0:
        raise ValueError("quota_per_level must be >= 0")
    buckets: dict[Difficulty, list[str]] = {level: [] for level in Difficulty}
    for sample in samples:
        try:
            buckets[classify_sample(sample)].append(sample.id)
        except NotBenchmarkable:
            continue
    levels: dict[Difficulty, tuple[str, ...]] = {}
    shortfall: dict[Difficulty, int] = {}
    for level, ids in buckets.items():
        ranked = sorted(ids, key=lambda i: (stable_hash64("bench", level.value, i, seed), i))
        chosen = ranked[:quota_per_level]
        levels[level] = tuple(chosen)
        if len(chosen) < quota_per_level:
            shortfall[level] = quota_per_level - len(chosen)
    return BenchManifest(
        levels=levels,
        seed=seed,
        corpus_digest=corpus_digest(samples),
        shortfall=shortfall,
    )


@dataclass(frozen=True)
class CorpusStats:
    """Structural distributions over a corpus: box counts and span token lengths."""

    total_samples: int
    total_spans: int
    bbox_histogram: dict[int, int]
    token_histogram: dict[int, int]
    joint: dict[tuple[int, int], int]

    def bbox_percentages(self) -> dict[int, float]:
        if self.total_samples == 0:
            return {}
        return {k: 100.0 * v / self.total_samples for k, v in sorted(self.bbox_histogram.items())}

    def token_percentages(self) -> dict[int, float]:
        if self.total_spans == 0:
            return {}
        return {k: 100.0 * v / self.total_spans for k, v in sorted(self.token_histogram.items())}


def corpus_stats(samples: Iterable[SampleRecord]) -> CorpusStats:
    bbox_hist: Counter[int] = Counter()
    token_hist: Counter[int] = Counter()
    joint: Counter[tuple[int, int]] = Counter()
    total_samples = 0
    total_spans = 0
    for sample in samples:
        total_samples += 1
        n_box = len(sample.grounded_spans)
        bbox_hist[n_box] += 1
        for span in sample.grounded_spans:
            total_spans += 1
            n_tokens = len(tokenize_words(span.text))
            token_hist[n_tokens] += 1
            joint[(n_box, n_tokens)] += 1
    return CorpusStats(
        total_samples=total_samples,
        total_spans=total_spans,
        bbox_histogram=dict(bbox_hist),
        token_histogram=dict(token_hist),
        joint=dict(joint),
    )
