"""Dataset ingestion and run-artifact persistence.

Datasets are line-delimited JSON: {"input", "label"} for classification and
math, {"input", "references": [...]} for generation. Example sets persist as
line-delimited {"id", "input_text", "target_text", "origin"} records whose
file order is the set order.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable

from .optimizer import RunLog
from .types import DataPoint, Example, ExampleSet


class DatasetError(ValueError):
    """A dataset file is missing, empty, or has a bad record."""


def load_dataset(path: str | Path, task_kind: str) -> tuple[DataPoint, ...]:
    """Data points with stable ids equal to their 1-based line numbers."""
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"dataset file not found: {path}")
    points: list[DataPoint] = []
    with path.open(encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            try:
                points.append(_point_from_record(record, str(lineno), task_kind))
            except (KeyError, TypeError, ValueError) as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from exc
    if not points:
        raise DatasetError(f"{path}: empty dataset")
    return tuple(points)


def _point_from_record(record: dict, point_id: str, task_kind: str) -> DataPoint:
    if not isinstance(record, dict):
        raise ValueError("record must be a JSON object")
    text = record.get("input")
    if not isinstance(text, str):
        raise ValueError("missing string field 'input'")
    if task_kind == "generation":
        references = record.get("references")
        if not isinstance(references, list) or not references:
            raise ValueError("generation records need a non-empty 'references' list")
        if not all(isinstance(r, str) for r in references):
            raise ValueError("'references' must contain strings")
        return DataPoint(id=point_id, input=text, gold=tuple(references))
    label = record.get("label")
    if not isinstance(label, str):
        raise ValueError("missing string field 'label'")
    return DataPoint(id=point_id, input=text, gold=label)


def save_examples(path: str | Path, examples: Iterable[Example]) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        for example in examples:
            record = {
                "id": example.id,
                "input_text": example.input_text,
                "target_text": example.target_text,
                "origin": example.origin,
            }
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def load_examples(path: str | Path) -> ExampleSet:
    path = Path(path)
    examples: list[Example] = []
    with path.open(encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                examples.append(
                    Example(
                        id=record["id"],
                        input_text=record["input_text"],
                        target_text=record["target_text"],
                        origin=record.get("origin", "manual"),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DatasetError(f"{path}:{lineno}: bad example record ({exc})") from exc
    return ExampleSet(tuple(examples))


def runlog_lines(log: RunLog) -> list[str]:
    return [json.dumps(record.to_dict(), ensure_ascii=False) for record in log.records]


def write_runlog(path: str | Path, log: RunLog) -> None:
    text = "".join(line + "\n" for line in runlog_lines(log))
    Path(path).write_text(text, encoding="utf-8")


def write_json(path: str | Path, payload: dict) -> None:
    Path(path).write_text(
        json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
