"""Prompt assembly: instruction + numbered example blocks + the query.

Block layouts are plain format strings so a task can override them; the
defaults quote the input line, leave classification/math targets bare, and
quote generation targets. Assembly is deterministic: identical inputs give
identical strings.
"""

from __future__ import annotations

from typing import Sequence

from .types import Example, TaskSpec

DEFAULT_EXAMPLE_TEMPLATES = {
    "classification": 'Example{index}:\n{input_field}: "{input}"\n{target_field}: {target}',
    "generation": 'Example{index}:\n{input_field}: "{input}"\n{target_field}: "{target}"',
    "math": 'Example{index}:\n{input_field}: "{input}"\n{target_field}: {target}',
}
DEFAULT_QUERY_TEMPLATE = '{input_field}: "{input}"\n{target_field}:'


def example_template(task: TaskSpec) -> str:
    return task.example_template or DEFAULT_EXAMPLE_TEMPLATES[task.task_kind]


def query_template(task: TaskSpec) -> str:
    return task.query_template or DEFAULT_QUERY_TEMPLATE


def render_example_block(task: TaskSpec, examples: Sequence[Example], start_index: int = 1) -> str:
    """The numbered example blocks, joined by blank lines."""
    template = example_template(task)
    blocks = [
        template.format(
            index=start_index + offset,
            input=example.input_text,
            target=example.target_text,
            input_field=task.input_field,
            target_field=task.target_field,
        )
        for offset, example in enumerate(examples)
    ]
    return "\n\n".join(blocks)


def render_query_block(task: TaskSpec, query: str) -> str:
    """The query in the example's input-line style, target left blank."""
    return query_template(task).format(
        input=query,
        input_field=task.input_field,
        target_field=task.target_field,
    )


def assemble_prompt(task: TaskSpec, examples: Sequence[Example], query: str) -> str:
    """Full prompt: instruction, example blocks in set order, then the query."""
    if not query.strip():
        raise ValueError("query must be non-empty")
    parts = [task.instruction.strip()]
    if len(examples) > 0:
        parts.append(render_example_block(task, examples))
    parts.append(render_query_block(task, query))
    return "\n\n".join(parts)


def assemble_prefix(task: TaskSpec, examples: Sequence[Example]) -> str:
    """The reusable prompt prefix (instruction + examples, no query)."""
    parts = [task.instruction.strip()]
    if len(examples) > 0:
        parts.append(render_example_block(task, examples))
    return "\n\n".join(parts) + "\n"
