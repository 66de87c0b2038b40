import logging

import pytest

from textground.clients import InProcessTransport, LlmExpandClient, mock_expand_handler
from textground.errors import ClientTransportError, DataError
from textground.mining import (
    CandidateImage,
    QueryTaxonomy,
    RetrievalConfig,
    Subtopic,
    Topic,
    default_taxonomy,
    generate_queries,
    retrieve,
)


def single_subtopic_taxonomy():
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
                                key_objects=("exit sign",),
                                contexts=("quiet suburban road",),
                            ),
                        ),
                    ),
                ),
            ),
        )
    )


class TestGenerateQueries:
    def test_template_composition(self):
        queries = generate_queries(single_subtopic_taxonomy(), per_subtopic=4, seed=0)
        assert queries == ["Exit sign on a quiet suburban road"]

    def test_per_subtopic_zero(self):
        assert generate_queries(default_taxonomy(), per_subtopic=0, seed=0) == []

    def test_deduplication(self):
        # two subtopics producing overlapping template output collapse to one
        sub = Subtopic(name="dup", key_objects=("sign",), contexts=("wall",))
        tax = QueryTaxonomy(
            domains=(
                ("a", (Topic(name="t1", subtopics=(sub,)),)),
                ("b", (Topic(name="t2", subtopics=(sub,)),)),
            )
        )
        queries = generate_queries(tax, per_subtopic=5, seed=0)
        assert queries == ["Sign on a wall"]

    def test_deterministic_per_seed(self):
        tax = default_taxonomy()
        assert generate_queries(tax, 3, seed=5) == generate_queries(tax, 3, seed=5)

    def test_expander_used(self):
        expander = LlmExpandClient(InProcessTransport(mock_expand_handler))
        queries = generate_queries(single_subtopic_taxonomy(), 2, seed=0, expander=expander)
        assert len(queries) == 1  # one subtopic, one object x context combo
        assert "Exit sign beside a quiet suburban road" in queries

    def test_expander_failure_falls_back(self, caplog):
        def boom(payload):
            raise ClientTransportError("down")

        expander = LlmExpandClient(InProcessTransport(boom))
        with caplog.at_level(logging.WARNING, logger="textground.mining"):
            queries = generate_queries(single_subtopic_taxonomy(), 4, seed=0, expander=expander)
        assert queries == ["Exit sign on a quiet suburban road"]
        assert any("falling back" in r.message for r in caplog.records)

    def test_invalid_taxonomy_payload(self):
        with pytest.raises(DataError):
            QueryTaxonomy.from_payload({"domains": [{"name": "x"}]})


def candidate(id, text, width=1024, height=1024, ocr="lots of words appear in this scene today"):
    return CandidateImage(id=id, context_text=text, ocr_text=ocr, width=width, height=height)


class TestRetrieve:
    def test_query_subset_ranks_first(self):
        pool = [
            candidate("a", "an exit sign near a quiet suburban road"),
            candidate("b", "a busy downtown street with neon"),
        ]
        (result,) = retrieve(["Exit sign on a quiet suburban road"], pool)
        assert result.matches[0].candidate_id == "a"

    def test_empty_pool(self):
        (result,) = retrieve(["anything"], [])
        assert result.matches == ()

    def test_resolution_gate(self):
        pool = [candidate("small", "exit sign suburban road", width=100, height=100)]
        (result,) = retrieve(["exit sign"], pool)
        assert result.matches == ()

    def test_text_density_gate(self):
        pool = [candidate("sparse", "exit sign suburban road", ocr="one two")]
        (result,) = retrieve(["exit sign"], pool, RetrievalConfig(min_ocr_words=3))
        assert result.matches == ()

    def test_zero_overlap_is_not_a_match(self):
        pool = [candidate("x", "totally unrelated content here")]
        (result,) = retrieve(["zebra quantum"], pool)
        assert result.matches == ()

    def test_tie_breaks_by_id(self):
        pool = [candidate("b", "exit sign"), candidate("a", "exit sign")]
        (result,) = retrieve(["exit sign"], pool)
        assert [m.candidate_id for m in result.matches] == ["a", "b"]

    def test_descending_scores(self):
        pool = [
            candidate("two", "exit sign visible"),
            candidate("one", "a sign"),
        ]
        (result,) = retrieve(["exit sign banner"], pool)
        scores = [m.score for m in result.matches]
        assert scores == sorted(scores, reverse=True)
