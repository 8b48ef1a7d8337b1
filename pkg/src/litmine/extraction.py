"""Candidate keyword generation and selection for papers without author keywords.

Candidates are contiguous n-grams of the preprocessed abstract.  Three
selection strategies pick the m most representative: plain similarity to the
document vector, maximal marginal relevance (greedy relevance/diversity
trade-off), and max-sum (exhaustive search for the most mutually distant
subset of the top-2m pool).  Selected keywords are finalized by intersecting
with the global keyword library.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import KeywordLibrary, PaperRecord, normalize_keyword, preprocess_abstract
from .embedding import EmbeddingProvider, l2_normalize
from .stopwords import ENGLISH_STOPWORDS

DEFAULT_M = 5
DEFAULT_ALPHA = 0.5
DEFAULT_NGRAM_RANGE = (1, 3)
DEFAULT_SEED_WEIGHT = 0.5
MAX_SUM_CAP = 10


@dataclass
class CandidateSet:
    paper_id: str
    candidates: list[str]


@dataclass
class SelectionConfig:
    strategy: str = "mmr"
    m: int = DEFAULT_M
    alpha: float = DEFAULT_ALPHA
    ngram_range: tuple[int, int] = DEFAULT_NGRAM_RANGE
    seed_keywords: list[str] = field(default_factory=list)
    seed_weight: float = DEFAULT_SEED_WEIGHT

    def validate(self) -> None:
        if self.strategy not in ("cosine", "mmr", "max_sum"):
            raise ValueError(f"unknown strategy: {self.strategy}")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        low, high = self.ngram_range
        if low < 1 or low > high:
            raise ValueError(f"bad ngram range: {self.ngram_range}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        if not 0.0 <= self.seed_weight <= 1.0:
            raise ValueError("seed_weight must be in [0, 1]")
        if self.strategy == "max_sum" and self.m > MAX_SUM_CAP:
            raise ValueError("combinatorial cap exceeded")


@dataclass
class ExtractionResult:
    paper_id: str
    selected: list[tuple[str, float]]
    final: set[str]
    strategy: str


def candidate_tokens(
    abstract: str,
    ngram_range: tuple[int, int] = DEFAULT_NGRAM_RANGE,
    stopwords: frozenset[str] | set[str] = ENGLISH_STOPWORDS,
    paper_id: str = "",
) -> CandidateSet:
    """Distinct contiguous n-grams, skipping any that start or end on a stopword."""
    tokens = abstract.split()
    if not tokens:
        raise ValueError("empty abstract")
    low, high = ngram_range
    if low < 1 or low > high:
        raise ValueError(f"bad ngram range: {ngram_range}")
    seen: set[str] = set()
    ordered: list[str] = []
    for n in range(low, high + 1):
        for start in range(len(tokens) - n + 1):
            gram = tokens[start:start + n]
            if gram[0] in stopwords or gram[-1] in stopwords:
                continue
            phrase = " ".join(gram)
            if phrase not in seen:
                seen.add(phrase)
                ordered.append(phrase)
    return CandidateSet(paper_id=paper_id, candidates=ordered)


def steer_document_embedding(
    doc: np.ndarray,
    seeds: Sequence[np.ndarray],
    weight: float,
) -> np.ndarray:
    """Pull the document vector toward the mean of the seed vectors."""
    if not len(seeds):
        raise ValueError("no seed vectors")
    if not 0.0 <= weight <= 1.0:
        raise ValueError("weight must be in [0, 1]")
    seed_mean = np.mean(np.stack([np.asarray(s, dtype=np.float64) for s in seeds]), axis=0)
    mixed = (1.0 - weight) * np.asarray(doc, dtype=np.float64) + weight * seed_mean
    return l2_normalize(mixed)


def _unit_rows(vectors: Sequence[np.ndarray]) -> np.ndarray:
    mat = np.stack([np.asarray(v, dtype=np.float64) for v in vectors])
    norms = np.linalg.norm(mat, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("zero vector among candidates")
    return mat / norms


def _doc_similarities(
    candidates: Sequence[str],
    doc: np.ndarray,
    provider: EmbeddingProvider,
) -> tuple[np.ndarray, np.ndarray]:
    """Candidate unit matrix and cosine similarity of each candidate to doc."""
    mat = _unit_rows(provider.embed_many(list(candidates)))
    doc_unit = np.asarray(doc, dtype=np.float64)
    doc_unit = doc_unit / np.linalg.norm(doc_unit)
    return mat, mat @ doc_unit


def select_cosine(
    candidates: Sequence[str],
    doc: np.ndarray,
    m: int,
    provider: EmbeddingProvider,
) -> list[tuple[str, float]]:
    """Top-m candidates by document similarity; ties keep candidate order."""
    if not candidates:
        raise ValueError("no candidates")
    _, sims = _doc_similarities(candidates, doc, provider)
    order = sorted(range(len(candidates)), key=lambda i: (-sims[i], i))
    return [(candidates[i], float(sims[i])) for i in order[:m]]


def select_mmr(
    candidates: Sequence[str],
    doc: np.ndarray,
    m: int,
    alpha: float,
    provider: EmbeddingProvider,
) -> list[tuple[str, float]]:
    """Greedy maximal-marginal-relevance selection.

    Each step adds the candidate maximizing
    (1 - alpha) * sim(candidate, doc) - alpha * max sim(candidate, selected);
    the first pick has no diversity penalty.  Reported scores are document
    similarities.
    """
    if not candidates:
        raise ValueError("no candidates")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    mat, sims = _doc_similarities(candidates, doc, provider)
    pairwise = mat @ mat.T
    n = len(candidates)
    selected: list[int] = []
    remaining = list(range(n))
    while remaining and len(selected) < m:
        best_index = None
        best_score = None
        for i in remaining:
            penalty = max(pairwise[i, j] for j in selected) if selected else 0.0
            score = (1.0 - alpha) * sims[i] - alpha * penalty
            if best_score is None or score > best_score:
                best_score = score
                best_index = i
        selected.append(best_index)
        remaining.remove(best_index)
    return [(candidates[i], float(sims[i])) for i in selected]


def select_max_sum(
    candidates: Sequence[str],
    doc: np.ndarray,
    m: int,
    provider: EmbeddingProvider,
    cap: int = MAX_SUM_CAP,
) -> list[tuple[str, float]]:
    """Most mutually distant m-subset of the 2m most relevant candidates.

    Exhaustive over all C(2m, m) subsets; ties prefer higher total relevance,
    then earlier candidate order.  Output is ordered by document similarity.
    """
    if not candidates:
        raise ValueError("no candidates")
    if m > cap:
        raise ValueError("combinatorial cap exceeded")
    mat, sims = _doc_similarities(candidates, doc, provider)
    pool = sorted(range(len(candidates)), key=lambda i: (-sims[i], i))[:2 * m]
    pool.sort()
    if len(pool) <= m:
        chosen = pool
    else:
        pairwise = mat @ mat.T
        best_key = None
        chosen = None
        for combo in combinations(pool, m):
            pair_sum = 0.0
            for a, b in combinations(combo, 2):
                pair_sum += pairwise[a, b]
            key = (pair_sum, -sum(sims[i] for i in combo), combo)
            if best_key is None or key < best_key:
                best_key = key
                chosen = list(combo)
    chosen = sorted(chosen, key=lambda i: (-sims[i], i))
    return [(candidates[i], float(sims[i])) for i in chosen]


def finalize_keywords(
    selected: Iterable[str | tuple[str, float]],
    library: KeywordLibrary,
    abbreviations: Mapping[str, str] | None = None,
) -> set[str]:
    """Normalize selected keywords and keep those present in the library."""
    final: set[str] = set()
    for item in selected:
        keyword = item[0] if isinstance(item, tuple) else item
        normalized = normalize_keyword(keyword, abbreviations)
        if normalized and normalized in library:
            final.add(normalized)
    return final


def _select(
    candidates: Sequence[str],
    doc: np.ndarray,
    provider: EmbeddingProvider,
    config: SelectionConfig,
) -> list[tuple[str, float]]:
    if config.strategy == "cosine":
        return select_cosine(candidates, doc, config.m, provider)
    if config.strategy == "mmr":
        return select_mmr(candidates, doc, config.m, config.alpha, provider)
    return select_max_sum(candidates, doc, config.m, provider)


def extract_for_paper(
    paper: PaperRecord,
    library: KeywordLibrary,
    provider: EmbeddingProvider,
    config: SelectionConfig | None = None,
    abbreviations: Mapping[str, str] | None = None,
    stopwords: frozenset[str] | set[str] = ENGLISH_STOPWORDS,
) -> ExtractionResult:
    """Full extraction pass for one paper: tokenize, embed, select, finalize."""
    config = config or SelectionConfig()
    config.validate()
    cleaned = preprocess_abstract(paper.abstract, abbreviations)
    candidate_set = candidate_tokens(cleaned, config.ngram_range, stopwords, paper.identifier)
    if not candidate_set.candidates:
        return ExtractionResult(paper.identifier, [], set(), config.strategy)
    doc = provider.embed(cleaned)
    seeds = [normalize_keyword(s, abbreviations) for s in config.seed_keywords]
    seeds = [s for s in seeds if s]
    if seeds:
        doc = steer_document_embedding(doc, provider.embed_many(seeds), config.seed_weight)
    selected = _select(candidate_set.candidates, doc, provider, config)
    final = finalize_keywords(selected, library, abbreviations)
    return ExtractionResult(paper.identifier, selected, final, config.strategy)


def keyword_f1(predicted: set[str], truth: set[str]) -> float:
    """Harmonic mean of keyword precision and recall (0 when either side is empty)."""
    if not predicted or not truth:
        return 0.0
    hits = len(predicted & truth)
    if hits == 0:
        return 0.0
    precision = hits / len(predicted)
    recall = hits / len(truth)
    return 2.0 * precision * recall / (precision + recall)


def tune_alpha(
    papers: Sequence[PaperRecord],
    grid: Sequence[float],
    provider: EmbeddingProvider,
    library: KeywordLibrary | None = None,
    config: SelectionConfig | None = None,
    abbreviations: Mapping[str, str] | None = None,
) -> float:
    """Pick the grid alpha maximizing mean keyword F1 on papers with author keywords."""
    training = [p for p in papers if p.author_keywords and p.abstract]
    if not training:
        raise ValueError("no training papers with author keywords")
    if not grid:
        raise ValueError("empty alpha grid")
    if library is None:
        from .corpus import build_keyword_library

        library = build_keyword_library(training)
    base = config or SelectionConfig()
    best_alpha = None
    best_score = None
    for alpha in sorted(grid):
        trial = SelectionConfig(
            strategy="mmr",
            m=base.m,
            alpha=alpha,
            ngram_range=base.ngram_range,
            seed_keywords=list(base.seed_keywords),
            seed_weight=base.seed_weight,
        )
        scores = []
        for paper in training:
            result = extract_for_paper(paper, library, provider, trial, abbreviations)
            scores.append(keyword_f1(result.final, set(paper.author_keywords)))
        mean_score = float(np.mean(scores))
        if best_score is None or mean_score > best_score:
            best_score = mean_score
            best_alpha = alpha
    return float(best_alpha)
