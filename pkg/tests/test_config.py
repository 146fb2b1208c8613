import json

import pytest
import yaml

from shapcraft.config import ConfigError, build_backends, load_config, parse_config, snapshot
from shapcraft.llm import ChatCompletionsClient
from shapcraft.mocks import ScenarioEvaluator, scenario_points


def base_document(tmp_path):
    dataset = tmp_path / "train.jsonl"
    with dataset.open("w") as handle:
        for record in scenario_points(10):
            handle.write(json.dumps(record) + "\n")
    return {
        "task": {
            "instruction": "Classify.",
            "kind": "classification",
            "labels": ["negative", "positive"],
        },
        "optimizer": {"seed": 3},
        "endpoints": {},
        "data": {"train": "train.jsonl"},
        "output_dir": "out",
    }


def test_load_config_resolves_paths_and_defaults(tmp_path):
    document = base_document(tmp_path)
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(document))
    config = load_config(path)
    assert config.train_path == tmp_path / "train.jsonl"
    assert config.test_path is None
    assert config.optimizer.seed == 3
    assert config.optimizer.n_initial == 16
    assert config.task.metric == "exact_match"
    assert config.cache_mode == "ordered"


def test_generation_default_metric(tmp_path):
    document = base_document(tmp_path)
    document["task"] = {"instruction": "Summarize.", "kind": "generation"}
    config = parse_config(document, base_dir=tmp_path)
    assert config.task.metric == "rouge_avg"


def test_per_role_endpoints_with_shared_default(tmp_path):
    document = base_document(tmp_path)
    document["endpoints"] = {
        "default": {"base_url": "http://shared:8000", "model": "m1"},
        "evaluator": {"base_url": "http://eval:8000", "model": "m2", "temperature": 0.0},
    }
    config = parse_config(document, base_dir=tmp_path)
    assert config.endpoints["proposer"].base_url == "http://shared:8000"
    assert config.endpoints["proposer"].temperature == 0.7
    assert config.endpoints["evaluator"].base_url == "http://eval:8000"
    assert config.endpoints["evaluator"].temperature == 0.0
    clients = build_backends(config)
    assert isinstance(clients["evaluator"], ChatCompletionsClient)


def test_roles_may_differ_between_mock_and_live(tmp_path):
    document = base_document(tmp_path)
    document["endpoints"] = {
        "proposer": {"base_url": "http://live:8000", "model": "m"},
        "improver": "mock",
        "evaluator": "mock",
    }
    config = parse_config(document, base_dir=tmp_path)
    clients = build_backends(config)
    assert isinstance(clients["proposer"], ChatCompletionsClient)
    assert isinstance(clients["evaluator"], ScenarioEvaluator)


def test_force_mock_overrides_live_endpoints(tmp_path):
    document = base_document(tmp_path)
    document["endpoints"] = {"default": {"base_url": "http://live:8000", "model": "m"}}
    config = parse_config(document, base_dir=tmp_path)
    clients = build_backends(config, force_mock=True)
    assert isinstance(clients["evaluator"], ScenarioEvaluator)


def test_missing_dataset_path_rejected_at_load(tmp_path):
    document = base_document(tmp_path)
    document["data"]["train"] = "missing.jsonl"
    with pytest.raises(ConfigError, match="does not exist"):
        parse_config(document, base_dir=tmp_path)


def test_dataset_path_lookup(tmp_path):
    config = parse_config(base_document(tmp_path), base_dir=tmp_path)
    with pytest.raises(ConfigError, match="split"):
        config.dataset_path("test")


def test_snapshot_is_json_serializable_and_carries_seed(tmp_path):
    config = parse_config(base_document(tmp_path), base_dir=tmp_path)
    payload = snapshot(config, seed=9)
    assert payload["optimizer"]["seed"] == 9
    assert json.loads(json.dumps(payload)) == payload


def test_bad_yaml_rejected(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("task: [unclosed")
    with pytest.raises(ConfigError, match="YAML"):
        load_config(path)
