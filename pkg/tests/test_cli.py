import json
import os

import pytest
from fastapi.testclient import TestClient

from litmine.cli import LOCK_NAME, derive_seed, main
from litmine.config import PipelineConfig, load_config, save_config
from litmine.service import create_app

from conftest import FIXTURE_CORPUS, run_pipeline


def write_config(path, **overrides):
    payload = {
        "seed": 3,
        "provider": {"mode": "deterministic", "dimension": 32, "seed": 3},
        "clustering": {"k": 4, "restarts": 2},
        "index": {"b": 8, "ksub": 8, "tau": 2},
    }
    payload.update(overrides)
    path.write_text(json.dumps(payload))
    return path


class TestConfig:
    def test_round_trip_lossless(self, tmp_path):
        config = PipelineConfig(seed=11)
        config.extraction.m = 9
        config.paths.corpus = "other.jsonl"
        target = tmp_path / "cfg.json"
        save_config(config, target)
        again = load_config(target)
        assert again.to_dict() == config.to_dict()

    def test_parse_error_reports_line(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{\n "seed": 1,\n "oops\n}')
        with pytest.raises(Exception) as info:
            load_config(bad)
        assert ":3" in str(info.value)

    def test_unknown_keys_rejected(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"sneed": 1}')
        with pytest.raises(Exception, match="unknown config keys"):
            load_config(bad)

    def test_paths_resolve_relative_to_config(self, tmp_path):
        cfg = write_config(tmp_path / "config.json")
        config = load_config(cfg)
        assert config.resolve("corpus") == tmp_path / "corpus.jsonl"


class TestSeedDerivation:
    def test_stable_and_stage_dependent(self):
        assert derive_seed(7, "cluster") == derive_seed(7, "cluster")
        assert derive_seed(7, "cluster") != derive_seed(7, "index")
        assert derive_seed(7, "cluster") != derive_seed(8, "cluster")


class TestStageOrdering:
    def test_mine_before_cluster_fails(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "config.json")
        assert main(["--config", str(cfg), "ingest", str(FIXTURE_CORPUS)]) == 0
        code = main(["--config", str(cfg), "mine"])
        assert code == 1
        assert "run cluster first" in capsys.readouterr().err

    def test_extract_before_ingest_fails(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "config.json")
        assert main(["--config", str(cfg), "extract"]) == 1
        assert "run ingest first" in capsys.readouterr().err

    def test_search_before_index_fails(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "config.json")
        main(["--config", str(cfg), "ingest", str(FIXTURE_CORPUS)])
        assert main(["--config", str(cfg), "search", "anything"]) == 1
        assert "run index first" in capsys.readouterr().err


class TestCliBasics:
    def test_usage_error_exit_code_1(self, capsys):
        assert main(["bogus-command"]) == 1
        assert main([]) == 1

    def test_bad_config_exit_code_1(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{nope")
        assert main(["--config", str(bad), "report"]) == 1
        assert "parse failure" in capsys.readouterr().err

    def test_lock_blocks_second_writer(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "config.json")
        lock = tmp_path / LOCK_NAME
        lock.write_text("123")
        assert main(["--config", str(cfg), "ingest", str(FIXTURE_CORPUS)]) == 1
        assert "litmine" in capsys.readouterr().err
        lock.unlink()
        assert main(["--config", str(cfg), "ingest", str(FIXTURE_CORPUS)]) == 0
        assert not lock.exists()

    def test_report_runs_after_pipeline(self, tmp_path, capsys):
        cfg = run_pipeline(tmp_path, seed=5)
        assert main(["--config", str(cfg), "report"]) == 0
        out = capsys.readouterr().out
        assert "papers: 40" in out
        assert "clusters: k=6" in out

    def test_csv_ingest_by_extension(self, tmp_path, capsys):
        csv_path = tmp_path / "input.csv"
        csv_path.write_text(
            "identifier,title,description,authkeywords,coverDate\n"
            "CSV1,T,A body.,kw one|kw two,2020-01-01\n")
        cfg = write_config(tmp_path / "config.json")
        assert main(["--config", str(cfg), "ingest", str(csv_path)]) == 0
        assert "added=1" in capsys.readouterr().out


class TestSearchParity:
    def test_cli_json_equals_api_response(self, pipeline_config_path, capsys):
        cfg = str(pipeline_config_path)
        client = TestClient(create_app(load_config(pipeline_config_path)))
        for query in ["cyber insurance pricing", "malware detection"]:
            assert main(["--config", cfg, "search", query, "-r", "6", "--json"]) == 0
            cli_payload = json.loads(capsys.readouterr().out)
            api_payload = client.get("/api/search", params={"q": query, "r": 6}).json()
            assert cli_payload == api_payload

    def test_human_readable_output(self, pipeline_config_path, capsys):
        assert main(["--config", str(pipeline_config_path),
                     "search", "network security", "-r", "3"]) == 0
        out = capsys.readouterr().out
        assert "query: network security" in out
        assert out.count("\n") >= 3


class TestStageIdempotence:
    def test_rerunning_stages_reproduces_artifacts(self, tmp_path):
        cfg_path = run_pipeline(tmp_path, seed=9)
        config = load_config(cfg_path)
        names = ["corpus", "library", "clustering", "rules_json", "rules_csv",
                 "index", "index_ids"]
        first = {n: config.resolve(n).read_bytes() for n in names}

        from litmine import cli as cli_mod

        cli_mod.cmd_extract(config, 9)
        cli_mod.cmd_cluster(config, 9)
        cli_mod.cmd_mine(config)
        cli_mod.cmd_index(config, 9)
        second = {n: config.resolve(n).read_bytes() for n in names}
        assert first == second
