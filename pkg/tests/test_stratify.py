import random

import pytest

from textground.errors import NotBenchmarkable
from textground.geometry import GroundedSpan, NormBox, OcrWord, PixelBox, SampleRecord
from textground.stratify import (
    BenchManifest,
    Difficulty,
    DifficultyFeatures,
    build_bench,
    classify,
    classify_sample,
    corpus_stats,
)


def sample_with(n_box, words_per_span, id="s"):
    spans = tuple(
        GroundedSpan(
            " ".join(["word"] * words_per_span),
            NormBox(1, 1 + 10 * i, 100, 10 + 10 * i),
            (i,),
        )
        for i in range(n_box)
    )
    words = tuple(
        OcrWord("word", PixelBox(1, 1 + 10 * i, 100, 10 + 10 * i), 0.9) for i in range(n_box)
    )
    return SampleRecord(
        id=id, image_ref=f"mem://{id}", width=512, height=512,
        prompt="p", ocr_words=words, grounded_spans=spans,
    )


class TestClassify:
    @pytest.mark.parametrize(
        "n_box,w_max,expected",
        [
            (2, 4, Difficulty.EASY),
            (3, 4, Difficulty.MEDIUM),
            (2, 5, Difficulty.MEDIUM),
            (3, 5, Difficulty.HARD),
            (1, 1, Difficulty.EASY),
        ],
    )
    def test_quadrants(self, n_box, w_max, expected):
        assert classify(DifficultyFeatures(n_box, w_max)) is expected

    def test_exhaustive_partition(self):
        for n_box in range(1, 51):
            for w_max in range(1, 51):
                level = classify(DifficultyFeatures(n_box, w_max))
                few, short = n_box <= 2, w_max <= 4
                if few and short:
                    assert level is Difficulty.EASY
                elif few or short:
                    assert level is Difficulty.MEDIUM
                else:
                    assert level is Difficulty.HARD

    def test_monotone(self):
        rank = {Difficulty.EASY: 0, Difficulty.MEDIUM: 1, Difficulty.HARD: 2}
        for n_box in range(1, 20):
            for w_max in range(1, 20):
                here = rank[classify(DifficultyFeatures(n_box, w_max))]
                assert rank[classify(DifficultyFeatures(n_box + 1, w_max))] >= here
                assert rank[classify(DifficultyFeatures(n_box, w_max + 1))] >= here

    def test_zero_boxes_not_benchmarkable(self):
        with pytest.raises(NotBenchmarkable):
            DifficultyFeatures(0, 3)
        sample = sample_with(1, 1)
        import dataclasses

        empty = dataclasses.replace(sample, grounded_spans=())
        with pytest.raises(NotBenchmarkable):
            classify_sample(empty)

    def test_features_from_sample(self):
        f = DifficultyFeatures.from_sample(sample_with(3, 5))
        assert (f.n_box, f.w_max) == (3, 5)


class TestBuildBench:
    def corpus(self):
        samples = []
        for i in range(30):
            samples.append(sample_with(1, 2, id=f"easy{i}"))
        for i in range(20):
            samples.append(sample_with(3, 2, id=f"med{i}"))
        for i in range(5):
            samples.append(sample_with(3, 6, id=f"hard{i}"))
        return samples

    def test_quota_zero(self):
        manifest = build_bench(self.corpus(), 0, seed=1)
        assert all(len(ids) == 0 for ids in manifest.levels.values())

    def test_shortfall_recorded(self):
        manifest = build_bench(self.corpus(), 10, seed=1)
        assert len(manifest.levels[Difficulty.HARD]) == 5
        assert manifest.shortfall[Difficulty.HARD] == 5
        assert Difficulty.EASY not in manifest.shortfall

    def test_deterministic_and_permutation_stable(self):
        corpus = self.corpus()
        shuffled = corpus[:]
        random.Random(9).shuffle(shuffled)
        a = build_bench(corpus, 10, seed=42)
        b = build_bench(shuffled, 10, seed=42)
        assert a == b

    def test_levels_disjoint_and_ids_exist(self):
        corpus = self.corpus()
        ids = {s.id for s in corpus}
        manifest = build_bench(corpus, 10, seed=0)
        selected = manifest.all_ids()
        assert len(selected) == len(set(selected))
        assert set(selected) <= ids

    def test_save_load_round_trip(self, tmp_path):
        manifest = build_bench(self.corpus(), 10, seed=3)
        path = tmp_path / "bench.json"
        manifest.save(path)
        assert BenchManifest.load(path) == manifest


class TestCorpusStats:
    def test_empty(self):
        stats = corpus_stats([])
        assert stats.total_samples == 0
        assert stats.bbox_histogram == {}
        assert stats.bbox_percentages() == {}

    def test_single_one_box(self):
        stats = corpus_stats([sample_with(1, 2)])
        assert stats.bbox_histogram == {1: 1}
        assert stats.bbox_percentages() == {1: 100.0}

    def test_hand_counted_corpus(self):
        samples = [
            sample_with(1, 2, id="a"),
            sample_with(1, 5, id="b"),
            sample_with(2, 3, id="c"),
        ]
        stats = corpus_stats(samples)
        assert stats.total_samples == 3
        assert stats.total_spans == 4
        assert stats.bbox_histogram == {1: 2, 2: 1}
        assert stats.token_histogram == {2: 1, 5: 1, 3: 2}
        assert stats.joint == {(1, 2): 1, (1, 5): 1, (2, 3): 2}
        assert sum(stats.bbox_percentages().values()) == pytest.approx(100.0)
