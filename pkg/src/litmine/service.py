"""Read-only HTTP facade over the persisted pipeline artifacts.

All state is loaded at startup and shared immutably across requests; the
reload endpoint swaps the whole state object atomically.  Every number in a
response comes from the artifacts (index distances, rule metrics, cluster
weights) with no re-scoring in this layer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import numpy as np
from fastapi import FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import association, clustering, corpus, embedding, vindex
from .config import PipelineConfig

DEFAULT_R = 10
FILTER_OVERFETCH = 4


class StageError(Exception):
    """An upstream pipeline stage has not produced its artifact yet."""


class ApiError(Exception):
    def __init__(self, status: int, message: str) -> None:
        super().__init__(message)
        self.status = status
        self.message = message


@dataclass
class SearchFilters:
    year_from: int | None = None
    year_to: int | None = None
    subtype: str | None = None
    cluster_ids: set[int] = field(default_factory=set)

    def active(self) -> bool:
        return bool(self.year_from or self.year_to or self.subtype or self.cluster_ids)

    def matches(self, record: corpus.PaperRecord, clusters: set[int]) -> bool:
        year = record.year
        if self.year_from is not None and (year is None or year < self.year_from):
            return False
        if self.year_to is not None and (year is None or year > self.year_to):
            return False
        if self.subtype and record.subtype_description != self.subtype:
            return False
        if self.cluster_ids and not (clusters & self.cluster_ids):
            return False
        return True


@dataclass
class PipelineState:
    config: PipelineConfig
    store: corpus.CorpusStore
    library: corpus.KeywordLibrary
    provider: embedding.EmbeddingProvider
    clusters: clustering.Clustering | None = None
    keyword_vectors: dict[str, np.ndarray] = field(default_factory=dict)
    rules: list[association.AssociationRule] = field(default_factory=list)
    index: vindex.IvfPqIndex | None = None
    index_ids: list[str] = field(default_factory=list)
    projection: clustering.CentroidProjection | None = None
    cluster_paper_counts: dict[int, int] = field(default_factory=dict)

    def paper_tags(self, record: corpus.PaperRecord) -> set[int]:
        if self.clusters is None:
            return set()
        return clustering.paper_clusters(record, self.clusters.assignments)


def build_provider(config: PipelineConfig) -> embedding.EmbeddingProvider:
    provider = config.provider
    if provider.mode == "deterministic":
        return embedding.HashEmbeddingProvider(provider.dimension, provider.seed)
    if provider.mode == "precomputed":
        path = Path(provider.path)
        if not path.is_absolute():
            path = Path(config.base_dir) / path
        return embedding.PrecomputedEmbeddingProvider.from_file(path)
    if provider.mode == "remote":
        return embedding.RemoteEmbeddingProvider(provider.url, provider.dimension,
                                                 provider.batch_size)
    raise StageError(f"unknown provider mode: {provider.mode}")


def _require(path: Path, stage: str) -> Path:
    if not path.exists():
        raise StageError(f"missing {path.name}: run {stage} first")
    return path


def load_state(config: PipelineConfig, need: tuple[str, ...] = ("corpus",)) -> PipelineState:
    """Load whatever artifacts exist; the ones in ``need`` are mandatory."""
    store = corpus.CorpusStore()
    corpus_path = config.resolve("corpus")
    if "corpus" in need or corpus_path.exists():
        store = corpus.CorpusStore.load(_require(corpus_path, "ingest"))

    library = corpus.KeywordLibrary()
    library_path = config.resolve("library")
    if library_path.exists():
        library = corpus.KeywordLibrary.from_json(library_path.read_text("utf-8"))
    elif "library" in need:
        raise StageError(f"missing {library_path.name}: run ingest first")

    state = PipelineState(config=config, store=store, library=library,
                          provider=build_provider(config))

    clustering_path = config.resolve("clustering")
    if clustering_path.exists():
        state.clusters = clustering.Clustering.from_json(clustering_path.read_text("utf-8"))
        state.keyword_vectors = {
            kw: state.provider.embed(kw) for kw in state.clusters.assignments
        }
    elif "clustering" in need:
        raise StageError(f"missing {clustering_path.name}: run cluster first")

    rules_path = config.resolve("rules_json")
    if rules_path.exists():
        state.rules = association.rules_from_json(rules_path.read_text("utf-8"))
    elif "rules" in need:
        raise StageError(f"missing {rules_path.name}: run mine first")

    index_path = config.resolve("index")
    if index_path.exists():
        state.index = vindex.load_index(index_path)
        import json as _json

        ids_path = _require(config.resolve("index_ids"), "index")
        state.index_ids = _json.loads(ids_path.read_text("utf-8"))
    elif "index" in need:
        raise StageError(f"missing {index_path.name}: run index first")

    if state.clusters is not None:
        counts = {cid: 0 for cid in range(1, state.clusters.k + 1)}
        for record in state.store:
            for cid in state.paper_tags(record):
                counts[cid] += 1
        state.cluster_paper_counts = counts
        if state.clusters.k >= 2:
            edges = [(tuple(sorted(rule.lhs)), min(rule.rhs)) for rule in state.rules]
            state.projection = clustering.make_projection(state.clusters, edges)
    return state


def paper_summary(state: PipelineState, record: corpus.PaperRecord,
                  score: float | None = None) -> dict:
    out = {
        "identifier": record.identifier,
        "title": record.title,
        "year": record.year,
        "venue": record.publication_name,
        "subtype": record.subtype_description,
        "doi": record.doi,
        "url": record.url,
        "citedby_count": record.citedby_count,
        "clusters": sorted(state.paper_tags(record)),
    }
    if score is not None:
        out["score"] = score
    return out


def search_payload(state: PipelineState, q: str, r: int = DEFAULT_R,
                   tau: int | None = None,
                   filters: SearchFilters | None = None) -> dict:
    """Shared search implementation behind both the CLI and /api/search."""
    if not q or not q.strip():
        raise ApiError(400, "empty query")
    if r < 1:
        raise ApiError(400, "r must be >= 1")
    if state.index is None:
        raise ApiError(503, "index not loaded: run index first")
    filters = filters or SearchFilters()
    try:
        cleaned = corpus.preprocess_abstract(q)
        query_vec = state.provider.embed(cleaned)
    except embedding.EmbeddingError as exc:
        raise ApiError(502, f"embedding provider failed: {exc}") from exc
    except ValueError as exc:
        raise ApiError(400, str(exc)) from exc

    predicted = None
    if state.clusters is not None:
        predicted = clustering.assign_new(query_vec, state.clusters)

    fetch = r * FILTER_OVERFETCH if filters.active() else r
    tau_used = tau if tau is not None else state.index.params.tau
    hits = vindex.search(state.index, query_vec, fetch, tau_used)

    results = []
    for hit in hits:
        identifier = state.index_ids[hit.doc_id]
        record = state.store.get(identifier)
        if record is None:
            continue
        tags = state.paper_tags(record)
        if not filters.matches(record, tags):
            continue
        results.append(paper_summary(state, record, score=hit.estimated_distance))
        if len(results) == r:
            break
    return {
        "query": q,
        "r": r,
        "tau": tau_used,
        "predicted_cluster": predicted,
        "results": results,
    }


def trend_points(records) -> list[list[int]]:
    counts: dict[int, int] = {}
    for record in records:
        if record.year is not None:
            counts[record.year] = counts.get(record.year, 0) + 1
    return [[year, counts[year]] for year in sorted(counts)]


class StateHolder:
    def __init__(self, loader: Callable[[], PipelineState], state: PipelineState) -> None:
        self.loader = loader
        self.state = state

    def reload(self) -> PipelineState:
        self.state = self.loader()
        return self.state


def create_app(config: PipelineConfig | None = None,
               state: PipelineState | None = None,
               loader: Callable[[], PipelineState] | None = None) -> FastAPI:
    """Service over a loaded pipeline state (or a loader for lazy/reloadable state)."""
    if loader is None:
        if config is None:
            raise ValueError("need a config or an explicit loader")
        loader = lambda: load_state(config, need=("corpus",))  # noqa: E731
    holder = StateHolder(loader, state if state is not None else loader())

    app = FastAPI(title="litmine", docs_url=None, redoc_url=None)

    @app.exception_handler(ApiError)
    async def _api_error(_req: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status,
                            content={"code": exc.status, "message": exc.message})

    @app.exception_handler(RequestValidationError)
    async def _validation_error(_req: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"code": 400, "message": str(exc)})

    @app.get("/api/search")
    def api_search(q: str = "", r: int = DEFAULT_R, tau: int | None = None,
                   year_from: int | None = None, year_to: int | None = None,
                   subtype: str | None = None,
                   cluster: list[int] = Query(default=[])):
        filters = SearchFilters(year_from=year_from, year_to=year_to,
                                subtype=subtype, cluster_ids=set(cluster))
        return search_payload(holder.state, q, r, tau, filters)

    @app.get("/api/papers")
    def api_papers(page: int = 1, page_size: int = 20,
                   subtype: str | None = None,
                   year_from: int | None = None, year_to: int | None = None):
        if page < 1 or page_size < 1:
            raise ApiError(400, "page and page_size must be >= 1")
        state = holder.state
        filters = SearchFilters(year_from=year_from, year_to=year_to, subtype=subtype)
        records = [rec for rec in state.store.records_by_identifier()
                   if filters.matches(rec, state.paper_tags(rec))]
        start = (page - 1) * page_size
        items = [paper_summary(state, rec) for rec in records[start:start + page_size]]
        return {"total": len(records), "page": page, "page_size": page_size, "items": items}

    @app.get("/api/papers/{identifier}")
    def api_paper(identifier: str):
        state = holder.state
        record = state.store.get(identifier)
        if record is None:
            raise ApiError(404, f"unknown paper: {identifier}")
        payload = corpus.record_to_raw(record)
        payload["clusters"] = sorted(state.paper_tags(record))
        return payload

    def _cluster_entry(state: PipelineState, cid: int) -> dict:
        return {
            "id": cid,
            "label": state.clusters.labels.get(cid, ""),
            "keyword_count": state.clusters.sizes().get(cid, 0),
            "paper_count": state.cluster_paper_counts.get(cid, 0),
        }

    @app.get("/api/clusters")
    def api_clusters():
        state = holder.state
        if state.clusters is None:
            raise ApiError(503, "clustering not loaded: run cluster first")
        return {"k": state.clusters.k,
                "clusters": [_cluster_entry(state, cid)
                             for cid in range(1, state.clusters.k + 1)]}

    @app.get("/api/clusters/{cid}")
    def api_cluster(cid: int):
        state = holder.state
        if state.clusters is None:
            raise ApiError(503, "clustering not loaded: run cluster first")
        if not 1 <= cid <= state.clusters.k:
            raise ApiError(404, f"unknown cluster: {cid}")
        spec = clustering.wordcloud_weights(cid, state.clusters, state.keyword_vectors)
        entry = _cluster_entry(state, cid)
        entry["wordcloud"] = {kw: spec.weights[kw] for kw in sorted(spec.weights)}
        entry["members"] = sorted(state.clusters.members(cid))
        if state.projection is not None:
            entry["coords"] = list(state.projection.coords[cid])
        return entry

    @app.get("/api/rules")
    def api_rules():
        return {"rules": association.rules_to_records(holder.state.rules)}

    @app.get("/api/trends")
    def api_trends(cluster: list[int] = Query(default=[]), q: str | None = None,
                   r: int = DEFAULT_R):
        state = holder.state
        series = []
        if q:
            payload = search_payload(state, q, r)
            matched = [state.store.get(item["identifier"]) for item in payload["results"]]
            series.append({"query": q, "points": trend_points(matched)})
        for cid in cluster:
            if state.clusters is None or not 1 <= cid <= state.clusters.k:
                raise ApiError(404, f"unknown cluster: {cid}")
            records = [rec for rec in state.store if cid in state.paper_tags(rec)]
            series.append({"cluster": cid,
                           "label": state.clusters.labels.get(cid, ""),
                           "points": trend_points(records)})
        return {"series": series}

    @app.get("/api/projection")
    def api_projection():
        state = holder.state
        if state.projection is None:
            raise ApiError(503, "projection unavailable: run cluster first")
        edges = []
        for rule in state.rules:
            edges.append({
                "lhs": sorted(rule.lhs),
                "rhs": sorted(rule.rhs),
                "support": rule.support,
                "confidence": rule.confidence,
                "lift": rule.lift,
            })
        return {
            "coords": {str(cid): list(xy) for cid, xy in sorted(state.projection.coords.items())},
            "node_sizes": {str(cid): n for cid, n in sorted(state.projection.node_sizes.items())},
            "edges": edges,
        }

    @app.post("/api/admin/reload")
    def api_reload():
        holder.reload()
        return {"status": "reloaded", "papers": len(holder.state.store)}

    static_dir = holder.state.config.paths.static_dir
    if static_dir:
        root = Path(static_dir)
        if not root.is_absolute():
            root = Path(holder.state.config.base_dir) / root
        if root.is_dir():
            app.mount("/", StaticFiles(directory=root, html=True), name="ui")

    return app
