"""Query-generation and retrieval stubs for corpus mining.

Queries compose a hierarchical taxonomy (domain, topic, subtopic with key
objects, contexts, and modifiers) through deterministic templates; an LLM
expander client can replace the templates when available and falls back to
them on failure. Retrieval is desk-scale lexical matching: token overlap
between a query and a candidate's surrounding text plus OCR content, gated
by resolution and text density.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .clients import LlmExpandClient
from .errors import ClientError, DataError
from .spans import tokenize_words
from .util import stable_hash64

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Subtopic:
    name: str
    key_objects: tuple[str, ...]
    contexts: tuple[str, ...]
    modifiers: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.name.strip():
            raise ValueError("Subtopic.name must be non-empty")
        if not self.key_objects or not self.contexts:
            raise ValueError(f"subtopic {self.name!r} needs key objects and contexts")


@dataclass(frozen=True)
class Topic:
    name: str
    subtopics: tuple[Subtopic, ...]

    def __post_init__(self):
        if not self.name.strip():
            raise ValueError("Topic.name must be non-empty")


@dataclass(frozen=True)
class QueryTaxonomy:
    """domain -> topic -> subtopic tree; acyclic by construction (pure values)."""

    domains: tuple[tuple[str, tuple[Topic, ...]], ...]

    def subtopics(self) -> list[tuple[str, str, Subtopic]]:
        out = []
        for domain, topics in self.domains:
            if not domain.strip():
                raise ValueError("domain name must be non-empty")
            for topic in topics:
                for sub in topic.subtopics:
                    out.append((domain, topic.name, sub))
        return out

    @classmethod
    def from_payload(cls, payload: dict) -> "QueryTaxonomy":
        try:
            domains = tuple(
                (
                    domain["name"],
                    tuple(
                        Topic(
                            name=topic["name"],
                            subtopics=tuple(
                                Subtopic(
                                    name=sub["name"],
                                    key_objects=tuple(sub["key_objects"]),
                                    contexts=tuple(sub["contexts"]),
                                    modifiers=tuple(sub.get("modifiers", ())),
                                )
                                for sub in topic["subtopics"]
                            ),
                        )
                        for topic in domain["topics"]
                    ),
                )
                for domain in payload["domains"]
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"invalid taxonomy: {exc}") from exc
        return cls(domains)

    @classmethod
    def load(cls, path: str | Path) -> "QueryTaxonomy":
        return cls.from_payload(json.loads(Path(path).read_text(encoding="utf-8")))


def default_taxonomy() -> QueryTaxonomy:
    """Small bundled taxonomy for demos and tests."""
    return QueryTaxonomy(
        domains=(
            (
                "signage",
                (
                    Topic(
                        name="road",
                        subtopics=(
                            Subtopic(
                                name="highway",
                                key_objects=("exit sign", "billboard"),
                                contexts=("quiet suburban road", "busy interchange"),
                                modifiers=("with red text",),
                            ),
                        ),
                    ),
                    Topic(
                        name="storefront",
                        subtopics=(
                            Subtopic(
                                name="retail",
                                key_objects=("sale banner", "neon sign"),
                                contexts=("shopping street", "mall entrance"),
                                modifiers=("with bold lettering",),
                            ),
                        ),
                    ),
                ),
            ),
            (
                "packaging",
                (
                    Topic(
                        name="food",
                        subtopics=(
                            Subtopic(
                                name="labels",
                                key_objects=("cereal box", "juice carton"),
                                contexts=("kitchen counter", "supermarket shelf"),
                            ),
                        ),
                    ),
                ),
            ),
        )
    )


def _sentence_case(s: str) -> str:
    return s[:1].upper() + s[1:] if s else s


def _template_queries(sub: Subtopic) -> list[str]:
    queries = []
    for obj in sub.key_objects:
        for ctx in sub.contexts:
            queries.append(_sentence_case(f"{obj} on a {ctx}"))
            for mod in sub.modifiers:
                queries.append(_sentence_case(f"{obj} {mod} on a {ctx}"))
    return queries


def generate_queries(
    taxonomy: QueryTaxonomy,
    per_subtopic: int,
    seed: int,
    expander: LlmExpandClient | None = None,
) -> list[str]:
    """Up to ``per_subtopic`` deduplicated queries for every subtopic.

    Without an expander, queries come from deterministic object/context/
    modifier templates in seeded order. Expander responses are validated and
    deduplicated; any client failure falls back to the templates with a
    warning rather than aborting the run.
    """
    if per_subtopic < 0:
        raise ValueError("per_subtopic must be >= 0")
    queries: list[str] = []
    seen: set[str] = set()
    for domain, topic, sub in taxonomy.subtopics():
        candidates: list[str] | None = None
        if expander is not None:
            try:
                candidates = expander.expand(sub.name, sub.key_objects, sub.contexts, sub.modifiers)
            except ClientError as exc:
                logger.warning("query expander failed for %s/%s/%s, falling back to "
                               "templates: %s", domain, topic, sub.name, exc)
        if candidates is None:
            candidates = _template_queries(sub)
        rng = random.Random(stable_hash64("queries", domain, topic, sub.name, seed))
        rng.shuffle(candidates)
        taken = 0
        for query in candidates:
            if taken >= per_subtopic:
                break
            if query not in seen:
                seen.add(query)
                queries.append(query)
                taken += 1
    return queries


@dataclass(frozen=True)
class CandidateImage:
    """A minable candidate: its surrounding text, OCR content, and resolution."""

    id: str
    context_text: str
    ocr_text: str
    width: int
    height: int


@dataclass(frozen=True)
class RetrievalConfig:
    """Gate thresholds approximating 'high-resolution, text-heavy' candidates."""

    min_resolution: int = 512
    min_ocr_words: int = 5


@dataclass(frozen=True)
class RankedMatch:
    candidate_id: str
    score: int


@dataclass(frozen=True)
class RetrievalResult:
    query: str
    matches: tuple[RankedMatch, ...]


def retrieve(
    queries: Sequence[str],
    pool: Sequence[CandidateImage],
    cfg: RetrievalConfig = RetrievalConfig(),
) -> list[RetrievalResult]:
    """Rank gated candidates per query by lexical token overlap.

    The score is the number of distinct query tokens present in the
    candidate's combined context and OCR text; zero-overlap candidates are
    not matches. Ties break on candidate id.
    """
    gated = []
    for cand in pool:
        if min(cand.width, cand.height) < cfg.min_resolution:
            continue
        ocr_tokens = tokenize_words(cand.ocr_text)
        if len(ocr_tokens) < cfg.min_ocr_words:
            continue
        gated.append((cand, set(tokenize_words(cand.context_text)) | set(ocr_tokens)))

    results = []
    for query in queries:
        query_tokens = set(tokenize_words(query))
        scored = []
        for cand, tokens in gated:
            score = len(query_tokens & tokens)
            if score > 0:
                scored.append(RankedMatch(cand.id, score))
        scored.sort(key=lambda m: (-m.score, m.candidate_id))
        results.append(RetrievalResult(query=query, matches=tuple(scored)))
    return results
