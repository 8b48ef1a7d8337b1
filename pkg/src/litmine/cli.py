"""Batch driver for the pipeline: ingest -> extract -> cluster -> mine -> index -> serve.

Each stage reads its upstream artifacts, writes its own artifact files, and
prints a short summary.  Exit codes: 0 success, 1 user error (bad input,
missing upstream artifact), 2 internal error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import association, clustering, corpus, extraction, vindex
from .config import ConfigError, PipelineConfig, load_config
from .service import ApiError, SearchFilters, StageError, load_state, search_payload

log = logging.getLogger("litmine")

LOCK_NAME = ".litmine.lock"


class UserError(Exception):
    pass


def derive_seed(base: int, stage: str) -> int:
    """Per-stage seed: stable hash of (base seed, stage name)."""
    digest = hashlib.sha256(f"{base}:{stage}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") >> 1


@contextmanager
def workdir_lock(base_dir: str):
    path = Path(base_dir) / LOCK_NAME
    try:
        fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise UserError(f"another litmine command holds {path}; remove it if stale") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        path.unlink(missing_ok=True)


def _abbreviations(config: PipelineConfig):
    if config.paths.abbreviations:
        return corpus.load_abbreviations(config.resolve("abbreviations"))
    return corpus.default_abbreviations()


def _load_store(config: PipelineConfig) -> corpus.CorpusStore:
    path = config.resolve("corpus")
    if not path.exists():
        raise UserError(f"missing {path.name}: run ingest first")
    return corpus.CorpusStore.load(path)


def _save_library(config: PipelineConfig, store: corpus.CorpusStore) -> corpus.KeywordLibrary:
    library = corpus.build_keyword_library(store)
    config.resolve("library").write_text(library.to_json() + "\n", encoding="utf-8")
    return library


def cmd_ingest(config: PipelineConfig, files: list[str], fmt: str) -> int:
    table = _abbreviations(config)
    corpus_path = config.resolve("corpus")
    store = corpus.CorpusStore.load(corpus_path) if corpus_path.exists() else corpus.CorpusStore()
    totals = corpus.IngestReport()
    for name in files:
        file_fmt = fmt or ("csv" if name.endswith(".csv") else "jsonl")
        report = corpus.ingest_records(name, file_fmt, store, table)
        totals.added += report.added
        totals.duplicates_dropped += report.duplicates_dropped
        totals.malformed += report.malformed
        totals.malformed_reasons.extend(report.malformed_reasons)
        log.debug("ingested %s: %s", name, report)
    store.save(corpus_path)
    library = _save_library(config, store)
    print(f"ingest: added={totals.added} duplicates={totals.duplicates_dropped} "
          f"malformed={totals.malformed} papers={len(store)} library={library.size}")
    for index, reason in totals.malformed_reasons[:10]:
        print(f"  malformed record {index}: {reason}")
    return 0


def cmd_extract(config: PipelineConfig, seed: int) -> int:
    store = _load_store(config)
    library_path = config.resolve("library")
    if not library_path.exists():
        raise UserError(f"missing {library_path.name}: run ingest first")
    library = corpus.KeywordLibrary.from_json(library_path.read_text("utf-8"))
    table = _abbreviations(config)
    from .service import build_provider

    provider = build_provider(config)
    ex = config.extraction
    selection = extraction.SelectionConfig(
        strategy=ex.strategy, m=ex.m, alpha=ex.alpha,
        ngram_range=(ex.ngram_low, ex.ngram_high),
        seed_keywords=list(ex.seed_keywords), seed_weight=ex.seed_weight)
    selection.validate()

    processed = empty_final = skipped = 0
    for record in store:
        if record.author_keywords and not ex.force_all:
            continue
        if not record.abstract:
            skipped += 1
            continue
        result = extraction.extract_for_paper(record, library, provider, selection, table)
        record.derived_keywords = sorted(result.final)
        processed += 1
        if not result.final:
            empty_final += 1
            log.debug("no library keywords for %s", record.identifier)
    store.save(config.resolve("corpus"))
    print(f"extract: processed={processed} unmatched={empty_final} "
          f"skipped_no_abstract={skipped} strategy={ex.strategy} m={ex.m}")
    return 0


def cmd_cluster(config: PipelineConfig, seed: int) -> int:
    store = _load_store(config)
    library_path = config.resolve("library")
    if not library_path.exists():
        raise UserError(f"missing {library_path.name}: run ingest first")
    library = corpus.KeywordLibrary.from_json(library_path.read_text("utf-8"))
    if library.size == 0:
        raise UserError("keyword library is empty; nothing to cluster")
    from .service import build_provider

    provider = build_provider(config)
    vectors = {kw: provider.embed(kw) for kw in library.keywords()}
    cc = config.clustering
    k = min(cc.k, library.size)
    try:
        result = clustering.kmeans(vectors, k, seed=derive_seed(seed, "cluster"),
                                   max_iter=cc.max_iter, tol=cc.tol,
                                   restarts=cc.restarts, init=cc.init)
    except ValueError as exc:
        raise UserError(str(exc)) from exc
    config.resolve("clustering").write_text(result.to_json() + "\n", encoding="utf-8")
    for record in store:
        record.cluster_ids = clustering.paper_clusters(record, result.assignments)
    store.save(config.resolve("corpus"))
    tagged = sum(1 for record in store if record.cluster_ids)
    print(f"cluster: k={k} iterations={result.iterations} "
          f"wcss={result.wcss_history[-1]:.6f} tagged_papers={tagged}/{len(store)}")
    return 0


def cmd_mine(config: PipelineConfig) -> int:
    store = _load_store(config)
    clustering_path = config.resolve("clustering")
    if not clustering_path.exists():
        raise UserError(f"missing {clustering_path.name}: run cluster first")
    clusters = clustering.Clustering.from_json(clustering_path.read_text("utf-8"))
    transactions, excluded = association.build_transactions(store, clusters.assignments)
    ac = config.association
    rule_filter = association.RuleFilter(ac.min_support, ac.min_confidence,
                                         ac.min_lift, ac.max_len)
    rules: list[association.AssociationRule] = []
    if transactions:
        itemsets = association.frequent_itemsets(transactions, ac.min_support, ac.max_len)
        rules = association.generate_rules(itemsets, transactions, rule_filter,
                                           singleton_rhs=ac.singleton_rhs)
    config.resolve("rules_json").write_text(association.rules_to_json(rules) + "\n",
                                            encoding="utf-8")
    config.resolve("rules_csv").write_text(association.rules_to_csv(rules), encoding="utf-8")
    print(f"mine: transactions={len(transactions)} excluded={excluded} rules={len(rules)}")
    return 0


def cmd_index(config: PipelineConfig, seed: int) -> int:
    store = _load_store(config)
    table = _abbreviations(config)
    from .service import build_provider

    provider = build_provider(config)
    records = [r for r in store.records_by_identifier() if r.abstract]
    if not records:
        raise UserError("no abstracts to index")
    texts = [corpus.preprocess_abstract(r.abstract, table) for r in records]
    vectors = np.stack(provider.embed_many(texts))

    ic = config.index
    nlist = ic.nlist or vindex.default_nlist(len(records))
    params = vindex.IndexParams(p=vectors.shape[1], nlist=nlist, b=ic.b,
                                ksub=min(ic.ksub, len(records)), tau=min(ic.tau, nlist),
                                seed=derive_seed(seed, "index"))
    try:
        params.validate()
        index = vindex.train_index(vectors, params, retain_raw=ic.store_raw)
    except ValueError as exc:
        raise UserError(str(exc)) from exc
    for position, vec in enumerate(vectors):
        vindex.add(index, position, vec)
    vindex.seal(index)
    vindex.save_index(index, config.resolve("index"))
    ids = [r.identifier for r in records]
    config.resolve("index_ids").write_text(json.dumps(ids, indent=0) + "\n", encoding="utf-8")
    if ic.store_raw:
        vindex.save_raw(index, config.resolve("raw_vectors"))
    print(f"index: vectors={len(records)} p={params.p} nlist={params.nlist} "
          f"b={params.b} ksub={params.ksub} tau={params.tau}")
    return 0


def cmd_search(config: PipelineConfig, query: str, r: int, tau: int | None,
               as_json: bool) -> int:
    try:
        state = load_state(config, need=("corpus", "index"))
        payload = search_payload(state, query, r=r, tau=tau, filters=SearchFilters())
    except (StageError, ApiError) as exc:
        raise UserError(str(exc)) from exc
    if as_json:
        print(json.dumps(payload, sort_keys=True))
        return 0
    print(f"query: {payload['query']}  (predicted cluster: {payload['predicted_cluster']})")
    for rank, item in enumerate(payload["results"], 1):
        clusters = ",".join(str(c) for c in item["clusters"]) or "-"
        print(f"{rank:2d}. [{item['score']:.4f}] {item['title']}  "
              f"({item['year']}, {item['venue']}) clusters={clusters}")
    return 0


def cmd_report(config: PipelineConfig) -> int:
    store = _load_store(config)
    with_kw = sum(1 for r in store if r.author_keywords)
    print(f"papers: {len(store)} ({with_kw} with author keywords)")
    library_path = config.resolve("library")
    if library_path.exists():
        library = corpus.KeywordLibrary.from_json(library_path.read_text("utf-8"))
        print(f"library: {library.size} keywords")
    clustering_path = config.resolve("clustering")
    if clustering_path.exists():
        clusters = clustering.Clustering.from_json(clustering_path.read_text("utf-8"))
        counts = {cid: 0 for cid in range(1, clusters.k + 1)}
        for record in store:
            for cid in clustering.paper_clusters(record, clusters.assignments):
                counts[cid] += 1
        sizes = clusters.sizes()
        print(f"clusters: k={clusters.k} seed={clusters.seed} iterations={clusters.iterations}")
        print("  id  label                 keywords  papers")
        for cid in range(1, clusters.k + 1):
            label = clusters.labels.get(cid, "")
            print(f"  {cid:<3d} {label:<20.20s} {sizes.get(cid, 0):>8d}  {counts[cid]:>6d}")
    rules_path = config.resolve("rules_json")
    if rules_path.exists():
        rules = association.rules_from_json(rules_path.read_text("utf-8"))
        print(f"rules: {len(rules)}")
        for rule in rules[:10]:
            lhs = ",".join(f"C{i}" for i in sorted(rule.lhs))
            rhs = ",".join(f"C{i}" for i in sorted(rule.rhs))
            print(f"  {lhs} => {rhs}  support={rule.support:.3f} "
                  f"confidence={rule.confidence:.3f} lift={rule.lift:.3f}")
    return 0


def cmd_serve(config: PipelineConfig, host: str, port: int) -> int:
    import uvicorn

    from .service import create_app

    try:
        app = create_app(config)
    except StageError as exc:
        raise UserError(str(exc)) from exc
    uvicorn.run(app, host=host, port=port, log_level="info")
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UserError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="litmine", description=__doc__)
    parser.add_argument("--config", default="", help="pipeline config JSON")
    parser.add_argument("--seed", type=int, default=None, help="base seed for all stages")
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="ingest JSONL/CSV metadata files")
    p.add_argument("files", nargs="+")
    p.add_argument("--format", choices=("jsonl", "csv"), default="",
                   help="force input format (default: by extension)")

    sub.add_parser("extract", help="derive keywords for papers without author keywords")
    sub.add_parser("cluster", help="k-means over library keyword embeddings")
    sub.add_parser("mine", help="mine association rules over paper cluster sets")
    sub.add_parser("index", help="build the IVF-PQ abstract index")

    p = sub.add_parser("search", help="semantic search against the index")
    p.add_argument("query")
    p.add_argument("-r", type=int, default=10)
    p.add_argument("--tau", type=int, default=None)
    p.add_argument("--json", action="store_true", help="print the raw API payload")

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8674)

    sub.add_parser("report", help="summarize corpus, clusters, and rules")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UserError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config) if args.config else PipelineConfig()
        seed = args.seed if args.seed is not None else config.seed
        mutating = args.command in ("ingest", "extract", "cluster", "mine", "index")
        if mutating:
            with workdir_lock(config.base_dir):
                return _dispatch(args, config, seed)
        return _dispatch(args, config, seed)
    except (UserError, ConfigError, corpus.CorpusError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # internal error
        if args.verbose:
            raise
        print(f"internal error: {exc!r}", file=sys.stderr)
        return 2


def _dispatch(args, config: PipelineConfig, seed: int) -> int:
    if args.command == "ingest":
        return cmd_ingest(config, args.files, args.format)
    if args.command == "extract":
        return cmd_extract(config, seed)
    if args.command == "cluster":
        return cmd_cluster(config, seed)
    if args.command == "mine":
        return cmd_mine(config)
    if args.command == "index":
        return cmd_index(config, seed)
    if args.command == "search":
        return cmd_search(config, args.query, args.r, args.tau, args.json)
    if args.command == "serve":
        return cmd_serve(config, args.host, args.port)
    if args.command == "report":
        return cmd_report(config)
    raise UserError(f"unknown command: {args.command}")


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
