"""Pipeline configuration: one JSON file drives every CLI stage and the service."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .extraction import DEFAULT_ALPHA, DEFAULT_M, DEFAULT_NGRAM_RANGE, DEFAULT_SEED_WEIGHT


class ConfigError(Exception):
    pass


@dataclass
class ProviderConfig:
    mode: str = "deterministic"  # deterministic | precomputed | remote
    dimension: int = 384
    seed: int = 0
    path: str = ""
    url: str = ""
    batch_size: int = 64


@dataclass
class ExtractionConfig:
    strategy: str = "mmr"
    m: int = DEFAULT_M
    alpha: float = DEFAULT_ALPHA
    ngram_low: int = DEFAULT_NGRAM_RANGE[0]
    ngram_high: int = DEFAULT_NGRAM_RANGE[1]
    seed_keywords: list[str] = field(default_factory=list)
    seed_weight: float = DEFAULT_SEED_WEIGHT
    force_all: bool = False


@dataclass
class ClusteringConfig:
    k: int = 30
    restarts: int = 10
    max_iter: int = 300
    tol: float = 1e-6
    init: str = "random"


@dataclass
class AssociationConfig:
    min_support: float = 0.05
    min_confidence: float = 0.5
    min_lift: float = 1.5
    max_len: int = 3
    singleton_rhs: bool = True


@dataclass
class IndexConfig:
    nlist: int = 0  # 0 = round(sqrt(N))
    b: int = 8
    ksub: int = 256
    tau: int = 8
    store_raw: bool = False


@dataclass
class PathsConfig:
    corpus: str = "corpus.jsonl"
    library: str = "library.json"
    clustering: str = "clustering.json"
    rules_json: str = "rules.json"
    rules_csv: str = "rules.csv"
    index: str = "index.lmix"
    index_ids: str = "index_ids.json"
    raw_vectors: str = "index.lmrv"
    abbreviations: str = ""  # empty = packaged default table
    static_dir: str = ""


@dataclass
class PipelineConfig:
    seed: int = 0
    base_dir: str = "."
    paths: PathsConfig = field(default_factory=PathsConfig)
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    extraction: ExtractionConfig = field(default_factory=ExtractionConfig)
    clustering: ClusteringConfig = field(default_factory=ClusteringConfig)
    association: AssociationConfig = field(default_factory=AssociationConfig)
    index: IndexConfig = field(default_factory=IndexConfig)

    def resolve(self, name: str) -> Path:
        """Absolute path for a PathsConfig entry, relative to base_dir."""
        raw = getattr(self.paths, name)
        if not raw:
            raise ConfigError(f"path {name!r} is not configured")
        path = Path(raw)
        return path if path.is_absolute() else Path(self.base_dir) / path

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out.pop("base_dir")
        return out

    @classmethod
    def from_dict(cls, data: dict, base_dir: str = ".") -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)} - {"base_dir"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")

        def build(klass, payload):
            names = {f.name for f in dataclasses.fields(klass)}
            extra = set(payload) - names
            if extra:
                raise ConfigError(f"unknown {klass.__name__} keys: {sorted(extra)}")
            return klass(**payload)

        return cls(
            seed=int(data.get("seed", 0)),
            base_dir=base_dir,
            paths=build(PathsConfig, data.get("paths", {})),
            provider=build(ProviderConfig, data.get("provider", {})),
            extraction=build(ExtractionConfig, data.get("extraction", {})),
            clustering=build(ClusteringConfig, data.get("clustering", {})),
            association=build(AssociationConfig, data.get("association", {})),
            index=build(IndexConfig, data.get("index", {})),
        )


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config parse failure at {path}:{exc.lineno}: {exc.msg}") from exc
    try:
        return PipelineConfig.from_dict(data, base_dir=str(path.parent))
    except TypeError as exc:
        raise ConfigError(f"bad config {path}: {exc}") from exc


def save_config(config: PipelineConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")
