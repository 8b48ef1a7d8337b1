import json
from pathlib import Path

import pytest

from litmine import cli
from litmine.config import load_config
from litmine.corpus import CorpusStore, ingest_records

DATA_DIR = Path(__file__).parent / "data"
FIXTURE_CORPUS = DATA_DIR / "corpus40.jsonl"

PIPELINE_CONFIG = {
    "seed": 7,
    "provider": {"mode": "deterministic", "dimension": 64, "seed": 7},
    "extraction": {"strategy": "mmr", "m": 5},
    "clustering": {"k": 6, "restarts": 3},
    "association": {"min_support": 0.05, "min_confidence": 0.5, "min_lift": 1.5},
    "index": {"b": 8, "ksub": 16, "tau": 4},
}


def run_pipeline(base_dir: Path, seed: int = 7, config_overrides: dict | None = None) -> Path:
    """Drive every batch stage against the bundled fixture; returns config path."""
    payload = json.loads(json.dumps(PIPELINE_CONFIG))
    if config_overrides:
        for key, value in config_overrides.items():
            payload.setdefault(key, {}).update(value)
    config_path = base_dir / "config.json"
    config_path.write_text(json.dumps(payload, indent=2))
    config = load_config(config_path)
    cli.cmd_ingest(config, [str(FIXTURE_CORPUS)], "")
    cli.cmd_extract(config, seed)
    cli.cmd_cluster(config, seed)
    cli.cmd_mine(config)
    cli.cmd_index(config, seed)
    return config_path


@pytest.fixture(scope="session")
def pipeline_config_path(tmp_path_factory) -> Path:
    return run_pipeline(tmp_path_factory.mktemp("pipeline"))


@pytest.fixture(scope="session")
def fixture_path() -> Path:
    return FIXTURE_CORPUS


@pytest.fixture(scope="session")
def fixture_rows() -> list[dict]:
    with open(FIXTURE_CORPUS, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


@pytest.fixture()
def fixture_store() -> CorpusStore:
    store = CorpusStore()
    report = ingest_records(FIXTURE_CORPUS, "jsonl", store)
    assert report.added == 40 and report.malformed == 0
    return store
