"""Operator commands: optimize, eval, shapley-report.

Every command takes one declarative config file; flags are overrides of
config keys. Each run writes its resolved config and seed next to the
artifacts so a mock run can be reproduced byte-for-byte.
"""

from __future__ import annotations

import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import click

from .config import ConfigError, RunConfig, build_backends, load_config, snapshot
from .generation import GenerationError
from .io import DatasetError, load_dataset, load_examples, save_examples, write_json, write_runlog
from .llm import EndpointError, TransportError
from .metrics import score_prediction
from .optimizer import (
    SHAPLEY_STREAM,
    SUBSAMPLE_STREAM,
    RunLog,
    rng_stream,
    run_optimization,
    subsample,
)
from .prompting import assemble_prefix, render_query_block
from .shapley import EXACT_SIZE_LIMIT, exact_shapley, mc_shapley, worst_index
from .utility import UtilityCache, make_value_fn

_ERRORS = (ConfigError, DatasetError, GenerationError, TransportError, EndpointError, ValueError)


@click.group()
def main() -> None:
    """Craft, score, and inspect few-shot prompt example sets."""


def _load(config_path: Path, seed: int | None, output: Path | None) -> RunConfig:
    config = load_config(config_path)
    if seed is not None:
        config = replace(config, optimizer=replace(config.optimizer, seed=seed))
    if output is not None:
        config = replace(config, output_dir=output)
    return config


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(path_type=Path))
@click.option("--seed", type=int, default=None, help="Override the configured seed.")
@click.option("--mock", is_flag=True, help="Force the deterministic mock backends.")
@click.option("--output", type=click.Path(path_type=Path), default=None)
def optimize(config_path: Path, seed: int | None, mock: bool, output: Path | None) -> None:
    """Run the crafting loop and persist the final example set and prompt."""
    started = time.monotonic()
    try:
        config = _load(config_path, seed, output)
        backends = build_backends(config, force_mock=mock)
        dataset = () if config.optimizer.initial_only else load_dataset(
            config.dataset_path("train"), config.task.task_kind
        )
    except _ERRORS as exc:
        _fail(str(exc))
        return

    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "config.snapshot", snapshot(config, config.optimizer.seed))

    cache = UtilityCache(key_mode=config.cache_mode)
    partial = RunLog(seed=config.optimizer.seed, config=snapshot(config, config.optimizer.seed))
    try:
        examples, log = run_optimization(
            config.optimizer,
            dataset,
            config.task,
            proposer=backends["proposer"],
            improver=backends["improver"],
            evaluator=backends["evaluator"],
            cache=cache,
            record_sink=partial.records.append,
        )
    except _ERRORS as exc:
        write_runlog(out / "runlog.jsonl", partial)
        _fail(f"run aborted after {len(partial.records)} iterations: {exc}")
        return

    save_examples(out / "examples.jsonl", examples)
    (out / "prompt.txt").write_text(assemble_prefix(config.task, examples.items), encoding="utf-8")
    write_runlog(out / "runlog.jsonl", log)
    summary = {
        "final_utility": log.final_utility,
        "iterations": len(log.records),
        "decision_counts": log.decision_counts(),
        "example_count": len(examples),
        "evaluator_calls": backends["evaluator"].call_count,
        "cache": {"hits": cache.hits, "misses": cache.misses},
        "seed": config.optimizer.seed,
        "wall_time_seconds": round(time.monotonic() - started, 3),
    }
    write_json(out / "summary.json", summary)
    click.echo(
        f"optimize: {summary['iterations']} iterations, "
        f"final utility {summary['final_utility']}, "
        f"{summary['example_count']} examples, "
        f"{summary['evaluator_calls']} evaluator calls "
        f"({summary['wall_time_seconds']}s) -> {out}"
    )


@main.command("eval")
@click.option("--config", "config_path", required=True, type=click.Path(path_type=Path))
@click.option("--prompt", "prompt_path", required=True, type=click.Path(path_type=Path))
@click.option("--split", type=click.Choice(["train", "test"]), default="test")
@click.option("--mock", is_flag=True, help="Force the deterministic mock backends.")
@click.option("--output", type=click.Path(path_type=Path), default=None)
@click.option("--seed", type=int, default=None)
def eval_command(
    config_path: Path,
    prompt_path: Path,
    split: str,
    mock: bool,
    output: Path | None,
    seed: int | None,
) -> None:
    """Score a stored prompt on a dataset split with the task metric."""
    try:
        config = _load(config_path, seed, output)
        if not prompt_path.exists():
            raise ConfigError(f"prompt file not found: {prompt_path}")
        prefix = prompt_path.read_text(encoding="utf-8").rstrip("\n")
        points = load_dataset(config.dataset_path(split), config.task.task_kind)
        evaluator = build_backends(config, force_mock=mock)["evaluator"]
        prompts = [
            prefix + "\n\n" + render_query_block(config.task, point.input) for point in points
        ]
        predictions = evaluator.complete_many(prompts)
        scores = [
            score_prediction(config.task.metric, prediction, point, config.task)
            for point, prediction in zip(points, predictions)
        ]
    except _ERRORS as exc:
        _fail(str(exc))
        return

    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    results_path = out / f"eval_{split}.jsonl"
    with results_path.open("w", encoding="utf-8") as handle:
        for point, prediction, score in zip(points, predictions, scores):
            handle.write(
                json.dumps(
                    {"id": point.id, "prediction": prediction, "score": score},
                    ensure_ascii=False,
                )
                + "\n"
            )
    mean = sum(scores) / len(scores)
    click.echo(f"eval[{split}]: mean {config.task.metric} = {mean:.4f} over {len(scores)} points")
    click.echo(f"per-point results -> {results_path}")


@main.command("shapley-report")
@click.option("--config", "config_path", required=True, type=click.Path(path_type=Path))
@click.option("--examples", "examples_path", required=True, type=click.Path(path_type=Path))
@click.option("--exact", is_flag=True, help="Also enumerate exact values (set size <= 8).")
@click.option("--mock", is_flag=True, help="Force the deterministic mock backends.")
@click.option("--output", type=click.Path(path_type=Path), default=None)
@click.option("--seed", type=int, default=None)
def shapley_report(
    config_path: Path,
    examples_path: Path,
    exact: bool,
    mock: bool,
    output: Path | None,
    seed: int | None,
) -> None:
    """Per-example value estimates for a stored example set."""
    try:
        config = _load(config_path, seed, output)
        if not examples_path.exists():
            raise ConfigError(f"example set file not found: {examples_path}")
        examples = load_examples(examples_path)
        if len(examples) == 0:
            raise ConfigError("example set is empty")
        if exact and len(examples) > EXACT_SIZE_LIMIT:
            raise ConfigError(
                f"--exact refused for {len(examples)} examples (limit {EXACT_SIZE_LIMIT})"
            )
        points = load_dataset(config.dataset_path("train"), config.task.task_kind)
        evaluator = build_backends(config, force_mock=mock)["evaluator"]
        run_seed = config.optimizer.seed
        batch = subsample(
            points,
            config.optimizer.subsample_size,
            rng_stream(run_seed, SUBSAMPLE_STREAM),
        )
        cache = UtilityCache(key_mode=config.cache_mode)
        value_fn = make_value_fn(batch, evaluator, config.task, cache)
        estimate = mc_shapley(
            examples.items,
            value_fn,
            config.optimizer.n_permutations,
            rng_stream(run_seed, SHAPLEY_STREAM),
        )
        exact_values = exact_shapley(examples.items, value_fn) if exact else None
    except _ERRORS as exc:
        _fail(str(exc))
        return

    click.echo(
        f"shapley-report: {len(examples)} examples, "
        f"P={config.optimizer.n_permutations}, batch={len(batch)}, seed={run_seed}"
    )
    header = f"{'idx':>4} {'estimate':>12}" + (f" {'exact':>12}" if exact_values else "")
    click.echo(header)
    for i, value in enumerate(estimate.values):
        line = f"{i:>4} {value:>12.6f}"
        if exact_values:
            line += f" {exact_values[i]:>12.6f}"
        click.echo(line)
    worst = worst_index(estimate)
    click.echo(f"worst index: {worst} (example id {examples[worst].id})")

    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    report = {
        "example_ids": list(examples.ids()),
        "estimate": estimate.to_dict(),
        "worst_index": worst,
        "exact_values": list(exact_values) if exact_values else None,
        "batch_point_ids": list(batch.ids()),
        "seed": run_seed,
    }
    write_json(out / "shapley_report.json", report)
    click.echo(f"report -> {out / 'shapley_report.json'}")


if __name__ == "__main__":
    main()
