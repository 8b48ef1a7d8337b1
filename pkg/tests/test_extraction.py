import itertools
import math
import random

import numpy as np
import pytest
from numpy.testing import assert_allclose

from litmine.corpus import KeywordLibrary, build_keyword_library, record_from_raw
from litmine.embedding import HashEmbeddingProvider, PrecomputedEmbeddingProvider
from litmine.extraction import (
    SelectionConfig,
    candidate_tokens,
    extract_for_paper,
    finalize_keywords,
    keyword_f1,
    select_cosine,
    select_max_sum,
    select_mmr,
    steer_document_embedding,
    tune_alpha,
)

WORDS = ["cyber", "risk", "insurance", "malware", "breach", "cloud", "audit", "network",
         "privacy", "threat", "endpoint", "actuarial", "loss", "market", "vector"]


def provider2d(mapping):
    vectors = {k: np.asarray(v, dtype=np.float32) for k, v in mapping.items()}
    return PrecomputedEmbeddingProvider(vectors, 2)


def random_text(rng, n_words):
    return " ".join(rng.choice(WORDS) for _ in range(n_words))


class TestCandidateTokens:
    def test_enumeration_range_1_2(self):
        got = candidate_tokens("cyber risk insurance", (1, 2), frozenset())
        assert got.candidates == ["cyber", "risk", "insurance", "cyber risk", "risk insurance"]

    def test_stopwords_excluded_at_edges(self):
        got = candidate_tokens("the cost of risk", (1, 1), frozenset({"the", "of"}))
        assert got.candidates == ["cost", "risk"]

    def test_interior_stopword_allowed(self):
        got = candidate_tokens("internet of things", (3, 3), frozenset({"of"}))
        assert got.candidates == ["internet of things"]

    def test_distinct_first_occurrence_order(self):
        got = candidate_tokens("risk risk cyber risk", (1, 2), frozenset())
        assert got.candidates == ["risk", "cyber", "risk risk", "risk cyber", "cyber risk"]

    def test_empty_abstract_rejected(self):
        with pytest.raises(ValueError):
            candidate_tokens("", (1, 2), frozenset())

    def test_matches_sliding_window_oracle(self):
        rng = random.Random(99)
        abstract = random_text(rng, 200)
        stop = frozenset({"cyber", "loss"})
        got = candidate_tokens(abstract, (1, 3), stop).candidates

        # Independent enumerator: dict-as-ordered-set over explicit windows.
        tokens = abstract.split()
        expected: dict[str, None] = {}
        for n in (1, 2, 3):
            for i in range(len(tokens)):
                window = tokens[i:i + n]
                if len(window) < n:
                    continue
                if window[0] in stop or window[-1] in stop:
                    continue
                expected.setdefault(" ".join(window))
        assert got == list(expected)


class TestSteering:
    def test_weight_zero_keeps_document(self):
        doc = np.array([0.6, 0.8])
        out = steer_document_embedding(doc, [np.array([0.0, 1.0])], 0.0)
        assert_allclose(out, doc, atol=1e-12)

    def test_weight_one_is_seed_mean(self):
        seeds = [np.array([1.0, 0.0]), np.array([0.0, 1.0])]
        out = steer_document_embedding(np.array([-1.0, 0.0]), seeds, 1.0)
        assert_allclose(out, np.array([1.0, 1.0]) / math.sqrt(2), atol=1e-12)

    def test_hand_mixture(self):
        out = steer_document_embedding(np.array([1.0, 0.0]), [np.array([0.0, 1.0])], 0.5)
        assert_allclose(out, np.array([1.0, 1.0]) / math.sqrt(2), atol=1e-12)

    def test_empty_seeds_error(self):
        with pytest.raises(ValueError):
            steer_document_embedding(np.array([1.0, 0.0]), [], 0.5)


class TestSelectCosine:
    def test_m_at_least_pool_returns_all_sorted(self):
        provider = provider2d({"a": [1, 0], "b": [0, 1], "c": [0.7, 0.7]})
        got = select_cosine(["a", "b", "c"], np.array([1.0, 0.0]), 10, provider)
        assert [k for k, _ in got] == ["a", "c", "b"]

    def test_candidate_equal_to_doc_ranks_first(self):
        provider = provider2d({"match": [0.6, 0.8], "other": [1, 0], "third": [0, 1]})
        got = select_cosine(["other", "match", "third"], np.array([0.6, 0.8]), 1, provider)
        assert got[0][0] == "match"
        assert got[0][1] == pytest.approx(1.0, abs=1e-6)

    def test_matches_exhaustive_sort_oracle(self):
        angles = [0.1, 1.2, 0.4, 2.2, 0.9]
        names = [f"c{i}" for i in range(5)]
        provider = provider2d({n: [math.cos(a), math.sin(a)] for n, a in zip(names, angles)})
        doc = np.array([1.0, 0.0])
        got = select_cosine(names, doc, 2, provider)
        oracle = sorted(names, key=lambda n: -math.cos(angles[names.index(n)]))[:2]
        assert [k for k, _ in got] == oracle

    def test_tie_broken_by_candidate_order(self):
        provider = provider2d({"x": [1, 0], "y": [1, 0], "z": [0, 1]})
        got = select_cosine(["y", "x", "z"], np.array([1.0, 0.0]), 2, provider)
        assert [k for k, _ in got] == ["y", "x"]


class TestSelectMmr:
    def test_alpha_zero_equals_cosine_on_random_instances(self):
        provider = HashEmbeddingProvider(dimension=24, seed=12)
        rng = random.Random(5)
        for _ in range(100):
            cands = list(dict.fromkeys(random_text(rng, rng.randint(4, 18)).split()))
            doc = provider.embed(random_text(rng, 10))
            m = rng.randint(1, 6)
            mmr = select_mmr(cands, doc, m, 0.0, provider)
            cos = select_cosine(cands, doc, m, provider)
            assert [k for k, _ in mmr] == [k for k, _ in cos]

    def test_near_duplicate_suppressed(self):
        provider = provider2d({
            "A": [1.0, 0.0],
            "B": [0.99, 0.14],
            "C": [0.0, 1.0],
        })
        doc = np.array([1.0, 0.0])
        got = select_mmr(["A", "B", "C"], doc, 2, 0.7, provider)
        assert [k for k, _ in got] == ["A", "C"]

    def test_greedy_steps_match_bruteforce_criterion(self):
        # Independent oracle: replay the greedy argmax with explicit loops.
        provider = HashEmbeddingProvider(dimension=16, seed=3)
        rng = random.Random(17)
        for _ in range(25):
            cands = list(dict.fromkeys(random_text(rng, 12).split()))
            doc = provider.embed(random_text(rng, 8)).astype(np.float64)
            alpha = rng.choice([0.0, 0.3, 0.5, 0.7, 1.0])
            m = min(3, len(cands))
            got = [k for k, _ in select_mmr(cands, doc, m, alpha, provider)]

            vecs = {c: provider.embed(c).astype(np.float64) for c in cands}
            doc_u = doc / np.linalg.norm(doc)

            def sim(u, v):
                return float(np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v)))

            chosen: list[str] = []
            while len(chosen) < m:
                best, best_score = None, None
                for c in cands:
                    if c in chosen:
                        continue
                    rel = sim(vecs[c], doc_u)
                    pen = max((sim(vecs[c], vecs[s]) for s in chosen), default=0.0)
                    score = (1 - alpha) * rel - alpha * pen
                    if best_score is None or score > best_score:
                        best, best_score = c, score
                chosen.append(best)
            assert got == chosen

    def test_m_one_is_most_relevant_for_any_alpha(self):
        provider = provider2d({"A": [1, 0], "B": [0.9, 0.43], "C": [0, 1]})
        doc = np.array([1.0, 0.0])
        for alpha in (0.0, 0.25, 0.5, 0.75, 1.0):
            got = select_mmr(["A", "B", "C"], doc, 1, alpha, provider)
            assert [k for k, _ in got] == ["A"]

    def test_selected_length_bound(self):
        provider = provider2d({"A": [1, 0], "B": [0, 1]})
        got = select_mmr(["A", "B"], np.array([1.0, 0.0]), 5, 0.5, provider)
        assert len(got) == 2


class TestSelectMaxSum:
    def test_pool_not_larger_than_m_returns_pool(self):
        provider = provider2d({"A": [1, 0], "B": [0, 1]})
        got = select_max_sum(["A", "B"], np.array([1.0, 0.0]), 3, provider)
        assert {k for k, _ in got} == {"A", "B"}

    def test_never_picks_near_duplicates(self):
        provider = provider2d({
            "A": [1.0, 0.0],
            "A2": [0.999, 0.045],
            "B": [0.0, 1.0],
            "B2": [0.045, 0.999],
        })
        doc = np.array([1.0, 1.0]) / math.sqrt(2)
        got = {k for k, _ in select_max_sum(["A", "A2", "B", "B2"], doc, 2, provider)}
        assert got in ({"A", "B"}, {"A", "B2"}, {"A2", "B"}, {"A2", "B2"})

    def test_matches_exhaustive_oracle(self):
        provider = HashEmbeddingProvider(dimension=12, seed=8)
        rng = random.Random(31)
        for trial in range(50):
            cands = list(dict.fromkeys(random_text(rng, 14).split()))
            if len(cands) < 6:
                continue
            doc = provider.embed(random_text(rng, 6)).astype(np.float64)
            m = 3
            got = {k for k, _ in select_max_sum(cands, doc, m, provider)}

            # Oracle with independent similarity arithmetic on the same rule set.
            def sim(a, b):
                va, vb = provider.embed(a).astype(np.float64), provider.embed(b).astype(np.float64)
                return float(np.dot(va, vb) / (np.linalg.norm(va) * np.linalg.norm(vb)))

            doc_u = doc / np.linalg.norm(doc)
            rel = {c: float(np.dot(provider.embed(c).astype(np.float64)
                                   / np.linalg.norm(provider.embed(c)), doc_u)) for c in cands}
            pool = sorted(cands, key=lambda c: (-rel[c], cands.index(c)))[:2 * m]
            pool = sorted(pool, key=cands.index)
            best_key, best_set = None, None
            for combo in itertools.combinations(pool, m):
                total = sum(sim(a, b) for a, b in itertools.combinations(combo, 2))
                key = (round(total, 12), -round(sum(rel[c] for c in combo), 12),
                       tuple(cands.index(c) for c in combo))
                if best_key is None or key < best_key:
                    best_key, best_set = key, set(combo)
            assert got == best_set, f"trial {trial}"

    def test_cap_enforced(self):
        provider = provider2d({"A": [1, 0]})
        with pytest.raises(ValueError, match="combinatorial cap"):
            select_max_sum(["A"], np.array([1.0, 0.0]), 11, provider)


class TestFinalize:
    def library(self, *keywords):
        return KeywordLibrary(entries={k: 1 for k in keywords})

    def test_intersection(self):
        lib = self.library("cyber security")
        got = finalize_keywords(["cyber security", "zzz novel phrase"], lib)
        assert got == {"cyber security"}

    def test_all_in_library_unchanged(self):
        lib = self.library("a", "b")
        assert finalize_keywords([("a", 0.9), ("b", 0.8)], lib) == {"a", "b"}

    def test_normalizes_before_intersecting(self):
        lib = self.library("cyber security")
        assert finalize_keywords(["Cyber-Security"], lib) == {"cyber security"}

    def test_empty_result_allowed(self):
        assert finalize_keywords(["nope"], self.library("other")) == set()

    def test_fixture_matches_set_intersection_oracle(self, fixture_store):
        lib = build_keyword_library(fixture_store)
        provider = HashEmbeddingProvider(dimension=48, seed=2)
        config = SelectionConfig(strategy="cosine", m=8, ngram_range=(1, 3))
        for paper in fixture_store:
            if not paper.abstract:
                continue
            result = extract_for_paper(paper, lib, provider, config)
            oracle = {k for k, _ in result.selected} & set(lib.entries)
            assert result.final == oracle
            assert result.final <= set(lib.entries)


class TestTuneAlpha:
    def make_paper(self, ident, abstract, keywords):
        return record_from_raw({
            "identifier": ident, "title": ident, "description": abstract,
            "authkeywords": "|".join(keywords), "coverDate": "2021-01-01",
        })

    def test_f1_identity(self):
        assert keyword_f1({"a", "b"}, {"a", "b"}) == 1.0
        assert keyword_f1(set(), {"a"}) == 0.0
        assert keyword_f1({"a"}, {"a", "b"}) == pytest.approx(2 / 3)

    def test_single_grid_value(self):
        papers = [self.make_paper("P1", "malware threat network", ["malware"])]
        assert tune_alpha(papers, [0.4], HashEmbeddingProvider(dimension=16)) == 0.4

    def test_relevance_aligned_corpus_prefers_alpha_zero(self):
        # Doc vector equals the author keyword's vector, so pure relevance
        # (alpha=0) always recovers the truth and wins or ties; ties break low.
        mapping = {
            "alpha beta gamma": [1.0, 0.0],
            "alpha": [1.0, 0.0],
            "beta": [0.05, 1.0],
            "gamma": [-0.4, 0.4],
            "alpha beta": [0.4, 0.5],
            "beta gamma": [-0.3, 0.8],
        }
        provider = provider2d(mapping)
        papers = [self.make_paper("P1", "alpha beta gamma", ["alpha"])]
        config = SelectionConfig(m=1, ngram_range=(1, 1))
        best = tune_alpha(papers, [0.0, 0.5, 1.0], provider, config=config)
        assert best == 0.0

    def test_no_training_papers_error(self):
        with pytest.raises(ValueError):
            tune_alpha([], [0.1], HashEmbeddingProvider(dimension=8))


class TestExtractForPaper:
    def test_deterministic(self, fixture_store):
        lib = build_keyword_library(fixture_store)
        provider = HashEmbeddingProvider(dimension=32, seed=6)
        paper = next(p for p in fixture_store if not p.author_keywords)
        r1 = extract_for_paper(paper, lib, provider)
        r2 = extract_for_paper(paper, lib, provider)
        assert r1.selected == r2.selected and r1.final == r2.final

    def test_selected_bounded_by_m(self, fixture_store):
        lib = build_keyword_library(fixture_store)
        provider = HashEmbeddingProvider(dimension=32, seed=6)
        config = SelectionConfig(strategy="mmr", m=4)
        for paper in list(fixture_store)[:10]:
            result = extract_for_paper(paper, lib, provider, config)
            assert len(result.selected) <= 4

    def test_seed_steering_changes_selection_basis(self):
        mapping = {
            "storm": [1.0, 0.0], "calm": [0.0, 1.0],
            "storm calm": [0.7, 0.7], "guide": [0.0, 1.0],
        }
        provider = provider2d(mapping)
        paper = record_from_raw({
            "identifier": "P1", "title": "t", "description": "storm calm",
            "authkeywords": "", "coverDate": "2020-01-01",
        })
        lib = KeywordLibrary(entries={"storm": 1, "calm": 1})
        plain = extract_for_paper(paper, lib, provider,
                                  SelectionConfig(strategy="cosine", m=1, ngram_range=(1, 1)))
        steered = extract_for_paper(
            paper, lib, provider,
            SelectionConfig(strategy="cosine", m=1, ngram_range=(1, 1),
                            seed_keywords=["guide"], seed_weight=1.0))
        assert plain.selected[0][0] == "storm"
        assert steered.selected[0][0] == "calm"
