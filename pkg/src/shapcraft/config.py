"""Run configuration: one declarative YAML document describes a whole run.

CLI flags only override keys that already live here, so any run can be
reproduced from its config snapshot. Each role (proposer, improver,
evaluator) resolves to its own endpoint or to the built-in mock backend,
which also covers setups where the roles talk to different models.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping

import yaml

from .llm import ChatCompletionsClient, CompletionClient, EndpointConfig, endpoint_defaults
from .metrics import DEFAULT_METRICS
from .mocks import scenario_backend
from .optimizer import OptimizerConfig
from .types import TaskSpec
from .utility import KEY_MODES


class ConfigError(ValueError):
    """The run configuration is missing or inconsistent."""


@dataclass(frozen=True)
class RunConfig:
    task: TaskSpec
    optimizer: OptimizerConfig
    endpoints: dict  # role -> EndpointConfig | "mock"
    train_path: Path | None
    test_path: Path | None
    output_dir: Path
    cache_mode: str = "ordered"

    def dataset_path(self, split: str) -> Path:
        path = {"train": self.train_path, "test": self.test_path}.get(split)
        if path is None:
            raise ConfigError(f"no dataset path configured for split {split!r}")
        return path


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        document = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from exc
    if not isinstance(document, Mapping):
        raise ConfigError(f"{path}: config must be a mapping")
    return parse_config(document, base_dir=path.parent)


def parse_config(document: Mapping, base_dir: Path | None = None) -> RunConfig:
    base_dir = base_dir or Path.cwd()
    task = _parse_task(document.get("task"))
    optimizer = _parse_optimizer(document.get("optimizer") or {})
    endpoints = _parse_endpoints(document.get("endpoints") or {})
    data = document.get("data") or {}
    train_path = _resolve_path(data.get("train"), base_dir)
    test_path = _resolve_path(data.get("test"), base_dir)
    for name, value in (("train", train_path), ("test", test_path)):
        if value is not None and not value.exists():
            raise ConfigError(f"{name} dataset path does not exist: {value}")
    output_dir = _resolve_path(document.get("output_dir"), base_dir) or base_dir / "run"
    cache_mode = document.get("cache", "ordered")
    if cache_mode not in KEY_MODES:
        raise ConfigError(f"cache must be one of {KEY_MODES}")
    return RunConfig(
        task=task,
        optimizer=optimizer,
        endpoints=endpoints,
        train_path=train_path,
        test_path=test_path,
        output_dir=output_dir,
        cache_mode=cache_mode,
    )


def _resolve_path(value, base_dir: Path) -> Path | None:
    if value is None:
        return None
    path = Path(str(value))
    return path if path.is_absolute() else base_dir / path


def _parse_task(section) -> TaskSpec:
    if not isinstance(section, Mapping):
        raise ConfigError("config needs a 'task' section")
    if "instruction" not in section:
        raise ConfigError("task.instruction is required")
    labels = section.get("labels")
    try:
        return TaskSpec(
            instruction=section["instruction"],
            task_kind=section.get("kind", "classification"),
            labels=tuple(labels) if labels else None,
            metric=section.get("metric", _default_metric(section.get("kind", "classification"))),
            input_field=section.get("input_field", ""),
            target_field=section.get("target_field", ""),
            description=section.get("description", ""),
            example_template=section.get("example_template"),
            query_template=section.get("query_template"),
        )
    except ValueError as exc:
        raise ConfigError(f"task: {exc}") from exc


def _default_metric(kind: str) -> str:
    return DEFAULT_METRICS.get(kind, "exact_match")


def _parse_optimizer(section: Mapping) -> OptimizerConfig:
    known = {
        "n_initial",
        "subsample_size",
        "n_iterations",
        "n_candidates",
        "replay_size",
        "n_permutations",
        "selector",
        "initial_only",
        "insert_position",
        "seed",
    }
    unknown = set(section) - known
    if unknown:
        raise ConfigError(f"unknown optimizer keys: {sorted(unknown)}")
    try:
        return OptimizerConfig(**dict(section))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"optimizer: {exc}") from exc


def _parse_endpoints(section: Mapping) -> dict:
    endpoints: dict = {}
    for role in ("proposer", "improver", "evaluator"):
        entry = section.get(role, section.get("default"))
        if entry is None or entry == "mock" or entry == {"mock": True}:
            endpoints[role] = "mock"
            continue
        if not isinstance(entry, Mapping):
            raise ConfigError(f"endpoints.{role} must be a mapping or the string 'mock'")
        temperature, max_tokens = endpoint_defaults(role)
        try:
            endpoints[role] = EndpointConfig(
                base_url=entry["base_url"],
                model=entry.get("model", ""),
                api_key_env=entry.get("api_key_env", "OPENAI_API_KEY"),
                temperature=float(entry.get("temperature", temperature)),
                max_tokens=int(entry.get("max_tokens", max_tokens)),
                timeout=float(entry.get("timeout", 60.0)),
                retries=int(entry.get("retries", 3)),
                max_concurrency=int(entry.get("max_concurrency", 4)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"endpoints.{role}: {exc}") from exc
    return endpoints


def build_backends(config: RunConfig, force_mock: bool = False) -> dict[str, CompletionClient]:
    """Role -> client map; mock roles share one deterministic scripted backend."""
    mock = None
    clients: dict[str, CompletionClient] = {}
    for role in ("proposer", "improver", "evaluator"):
        endpoint = "mock" if force_mock else config.endpoints.get(role, "mock")
        if endpoint == "mock":
            if mock is None:
                mock = scenario_backend(config.task)
            clients[role] = getattr(mock, role)
        else:
            clients[role] = ChatCompletionsClient(endpoint)
    return clients


def snapshot(config: RunConfig, seed: int) -> dict:
    """JSON-serializable view of the resolved config, written next to artifacts."""
    optimizer = replace(config.optimizer, seed=seed)
    return {
        "task": {
            "instruction": config.task.instruction,
            "kind": config.task.task_kind,
            "labels": list(config.task.labels) if config.task.labels else None,
            "metric": config.task.metric,
            "input_field": config.task.input_field,
            "target_field": config.task.target_field,
            "description": config.task.description,
            "example_template": config.task.example_template,
            "query_template": config.task.query_template,
        },
        "optimizer": {
            "n_initial": optimizer.n_initial,
            "subsample_size": optimizer.subsample_size,
            "n_iterations": optimizer.n_iterations,
            "n_candidates": optimizer.n_candidates,
            "replay_size": optimizer.replay_size,
            "n_permutations": optimizer.n_permutations,
            "selector": optimizer.selector,
            "initial_only": optimizer.initial_only,
            "insert_position": optimizer.insert_position,
            "seed": optimizer.seed,
        },
        "endpoints": {
            role: (entry if entry == "mock" else _endpoint_dict(entry))
            for role, entry in config.endpoints.items()
        },
        "data": {
            "train": str(config.train_path) if config.train_path else None,
            "test": str(config.test_path) if config.test_path else None,
        },
        "output_dir": str(config.output_dir),
        "cache": config.cache_mode,
    }


def _endpoint_dict(endpoint: EndpointConfig) -> dict:
    return {
        "base_url": endpoint.base_url,
        "model": endpoint.model,
        "api_key_env": endpoint.api_key_env,
        "temperature": endpoint.temperature,
        "max_tokens": endpoint.max_tokens,
        "timeout": endpoint.timeout,
        "retries": endpoint.retries,
        "max_concurrency": endpoint.max_concurrency,
    }
