"""Relation-extraction prompts built from four sections: instruction,
reasoning steps, output format examples and tips.

The chain-of-thought style renders all four. The few-shot style drops the
reasoning steps and appends worked demonstrations to the format section.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from seqfusion.corpus import DatasetKind, Sample
from seqfusion.errors import DataError

HEADER_INSTRUCTION = "### INSTRUCTION"
HEADER_REASON = "### REASON"
HEADER_FORMAT = "### FORMAT"
HEADER_TIPS = "### TIPS"
HEADER_INPUT = "### INPUT"
SECTION_ORDER = (HEADER_INSTRUCTION, HEADER_REASON, HEADER_FORMAT, HEADER_TIPS, HEADER_INPUT)


class PromptStyle(str, enum.Enum):
    COT = "CoT"
    FEW_SHOT = "FewShot"

    @classmethod
    def parse(cls, value: "str | PromptStyle") -> "PromptStyle":
        if isinstance(value, cls):
            return value
        for member in cls:
            if member.value.lower() == str(value).lower().replace("-", "").replace("_", ""):
                return member
        raise ValueError(f"unknown prompt style {value!r} (expected CoT or FewShot)")


@dataclass(frozen=True)
class PromptTemplate:
    instruction: str
    reasoning_steps: tuple[str, ...]
    format_examples: tuple[str, ...]
    tips: str
    format_intro: str = ""

    def __post_init__(self) -> None:
        if not self.instruction.strip():
            raise DataError("prompt instruction must not be empty")


_INSTRUCTION = (
    "Task Definition is as follows:\n"
    "INPUT: consists of a sentence, drug mentions within the sentence, and an enclosing "
    "context (e.g. paragraph or abstract).\n"
    "OUTPUT: a set of relations, each consisting of a set of participating drug spans "
    "and a relation label"
)

DCE_TEMPLATE = PromptTemplate(
    instruction=_INSTRUCTION,
    reasoning_steps=(
        "First, determine the content of the key 'sentence.' If the sentence does not state "
        "that the given drugs are used in combination, even if a combination is indicated "
        "elsewhere in the wider context, you should output an empty list ([]).",
        "If the sentence indicates that the drugs are used in combination, you should combine "
        "it with the content of the key 'paragraph' to determine the effect of the combination. "
        "If the effect is positive, you should label it as POS. If the effect is negative, "
        "label it as NEG. If the effect is unclear, label it as COMB.",
    ),
    format_intro=(
        "Here are some output examples,you should output the results in the following format"
    ),
    format_examples=(
        '[{"class": "POS", "spans": [0, 1, 2], "is_context_needed": True}]',
        '[{"class": "NEG", "spans": [0, 1], "is_context_needed": false}, '
        '{"class": "NEG", "spans": [0, 2], "is_context_needed": False}]',
        '[{"class": "COMB", "spans": [1, 2, 3], "is_context_needed": true}, '
        '{"class": "COMB", "spans": [4, 5], "is_context_needed": True}]',
    ),
    tips=(
        "Spans are IDs for the combinations of drugs used, and sometimes there may be multiple "
        'combinations, such as [{"class": "POS", "spans": [0, 2], "is_context_needed": true}, '
        '{"class": "COMB", "spans": [0, 1], "is_context_needed": true}]". You need to separately '
        "assess their effects. The `is_context_needed` indicates whether you need to rely on the "
        "content of the key 'paragraph' to determine the effects of the drug combinations."
    ),
)

MEE_TEMPLATE = PromptTemplate(
    instruction=_INSTRUCTION,
    reasoning_steps=(
        "First, you need to determine the content of the key 'sentence.' If the sentence does "
        "not state that the given drugs are used in combination, even if a combination is "
        "indicated somewhere else in the wider context, you should output ([]).",
        "Then, if the sentence indicates that the drugs are used in combination, you should "
        "combine it with the content of the key 'paragraph' to determine the effect of the "
        "combination. If the effect is positive, you should label it as POS. If the effect is "
        "negative, you should label it as NEG. If the effect is not yet clear, you should label "
        "it as COMB.",
    ),
    format_intro=(
        "Here are some output examples,you should output the results in the following format:"
    ),
    format_examples=(
        "[]",
        '[{"class": "POS", "spans": [0, 1]}]',
        '[{"class": "NEG", "spans": [0, 1]}]',
    ),
    tips=(
        "The mention of variables may not always correspond exactly with the variable names "
        "that appear in the text; a comprehensive judgment based on the content of the text "
        "is required."
    ),
)


def default_template(kind: "DatasetKind | str") -> PromptTemplate:
    kind = DatasetKind.parse(kind)
    return DCE_TEMPLATE if kind is DatasetKind.DCE else MEE_TEMPLATE


def load_template_overrides(directory: "str | Path", base: PromptTemplate) -> PromptTemplate:
    """Replace sections of *base* from files in *directory*.

    Recognized files: ``instruction.txt``, ``reason.txt`` (steps separated by
    blank lines), ``format.txt`` (intro line, then one example per line) and
    ``tips.txt``. Missing files keep the base section.
    """
    directory = Path(directory)
    changes: dict = {}

    def read(name: str) -> str | None:
        path = directory / name
        return path.read_text(encoding="utf-8").strip("\n") if path.is_file() else None

    if (text := read("instruction.txt")) is not None:
        changes["instruction"] = text
    if (text := read("reason.txt")) is not None:
        steps = [" ".join(b.split("\n")).strip() for b in text.split("\n\n")]
        changes["reasoning_steps"] = tuple(s for s in steps if s)
    if (text := read("format.txt")) is not None:
        lines = [ln for ln in text.splitlines() if ln.strip()]
        changes["format_intro"] = lines[0] if lines else ""
        changes["format_examples"] = tuple(lines[1:])
    if (text := read("tips.txt")) is not None:
        changes["tips"] = text
    return replace(base, **changes)


def serialize_input(sample: Sample) -> str:
    return json.dumps(sample.input_dict(), ensure_ascii=False)


def build_re_prompt(
    template: PromptTemplate,
    sample: Sample,
    style: "PromptStyle | str",
    demonstrations: Sequence[tuple[Sample, str]] = (),
) -> str:
    style = PromptStyle.parse(style)
    if style is PromptStyle.FEW_SHOT and not demonstrations:
        raise ValueError("few-shot prompts need at least one demonstration")
    if style is PromptStyle.COT and not template.reasoning_steps:
        raise ValueError("chain-of-thought prompts need reasoning steps")

    sections = [f"{HEADER_INSTRUCTION}\n{template.instruction}"]
    if style is PromptStyle.COT:
        steps = "\n".join(f"{i}. {s}" for i, s in enumerate(template.reasoning_steps, 1))
        sections.append(f"{HEADER_REASON}\n{steps}")

    fmt = [template.format_intro] if template.format_intro else []
    fmt.extend(template.format_examples)
    if style is PromptStyle.FEW_SHOT:
        for i, (demo, gold) in enumerate(demonstrations, 1):
            fmt.append(f"Example {i}\nInput: {serialize_input(demo)}\nOutput: {gold}")
    sections.append(HEADER_FORMAT + "\n" + "\n".join(fmt))
    sections.append(f"{HEADER_TIPS}\n{template.tips}")
    sections.append(f"{HEADER_INPUT}\n{serialize_input(sample)}")
    return "\n\n".join(sections) + "\n"


def prompt_input(prompt: str) -> dict | None:
    """Recover the target sample's input object from a rendered prompt."""
    _, sep, tail = prompt.rpartition(HEADER_INPUT + "\n")
    if not sep:
        return None
    try:
        return json.loads(tail.strip())
    except json.JSONDecodeError:
        return None
