"""Parse relation lists out of free-form LLM output.

Models asked for ``[{"class": "POS", "spans": [0, 1]}]`` routinely wrap the
list in prose, use Python booleans or single quotes. The parser accepts those
variants, records each tolerance it applied, and validates the result against
the sample's span ids.
"""

from __future__ import annotations

import ast
import json
from dataclasses import dataclass, field
from typing import Any, Iterable

from seqfusion.corpus import Relation, RelationLabel, Sample, relation_from_dict
from seqfusion.errors import DataError

WARN_PROSE = "surrounding prose stripped"
WARN_QUOTES = "single quotes normalized"
WARN_BOOLS = "boolean casing normalized"
WARN_LATER_LISTS = "later bracketed lists ignored"
WARN_EXTRA_KEYS = "unknown relation keys ignored"

_RELATION_KEYS = {"class", "spans", "is_context_needed"}


class RelationParseError(DataError):
    """The text holds no usable relation list."""


@dataclass
class RawExtraction:
    source_text: str
    relations: list[Relation]
    warnings: list[str] = field(default_factory=list)


def _bracket_candidates(text: str) -> list[tuple[int, int]]:
    """(start, end) of every top-level balanced ``[...]`` in *text*.

    Quoted strings are skipped so brackets inside span texts do not count.
    """
    out = []
    depth = 0
    start = -1
    quote = None
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if quote is not None:
            if ch == "\\":
                i += 2
                continue
            if ch == quote:
                quote = None
        elif depth > 0 and ch in "\"'":
            quote = ch
        elif ch == "[":
            if depth == 0:
                start = i
            depth += 1
        elif ch == "]" and depth > 0:
            depth -= 1
            if depth == 0:
                out.append((start, i + 1))
        i += 1
    return out


def _pythonize(fragment: str) -> tuple[str, bool, bool]:
    """Rewrite JSON literals to Python ones outside of strings.

    Returns the rewritten text plus whether single-quoted strings and
    Python-cased booleans were seen.
    """
    out = []
    quote = None
    saw_single = False
    saw_pybool = False
    i = 0
    n = len(fragment)
    while i < n:
        ch = fragment[i]
        if quote is not None:
            out.append(ch)
            if ch == "\\" and i + 1 < n:
                out.append(fragment[i + 1])
                i += 2
                continue
            if ch == quote:
                quote = None
            i += 1
            continue
        if ch in "\"'":
            quote = ch
            saw_single = saw_single or ch == "'"
            out.append(ch)
            i += 1
            continue
        if ch.isalpha():
            j = i
            while j < n and (fragment[j].isalnum() or fragment[j] == "_"):
                j += 1
            word = fragment[i:j]
            if word in ("True", "False", "None"):
                saw_pybool = True
            out.append({"true": "True", "false": "False", "null": "None"}.get(word, word))
            i = j
            continue
        out.append(ch)
        i += 1
    return "".join(out), saw_single, saw_pybool


def _load_list(fragment: str) -> tuple[Any, list[str]]:
    try:
        return json.loads(fragment), []
    except (json.JSONDecodeError, RecursionError):
        pass
    rewritten, saw_single, saw_pybool = _pythonize(fragment)
    value = ast.literal_eval(rewritten)
    warnings = []
    if saw_single:
        warnings.append(WARN_QUOTES)
    if saw_pybool:
        warnings.append(WARN_BOOLS)
    return value, warnings


def _is_relation_list(value: Any) -> bool:
    return isinstance(value, list) and all(isinstance(x, dict) for x in value)


def parse_relations(text: str, sample: Sample | None = None) -> RawExtraction:
    """Extract the first relation list from *text*.

    With *sample* given, every span id must resolve against its spans.
    Raises :class:`RelationParseError` for anything unusable.
    """
    if not isinstance(text, str):
        raise RelationParseError(f"expected text, got {type(text).__name__}")
    found = None
    later = False
    for start, end in _bracket_candidates(text):
        try:
            value, warnings = _load_list(text[start:end])
        except (ValueError, SyntaxError, TypeError, MemoryError, RecursionError):
            continue
        if not _is_relation_list(value):
            continue
        if found is None:
            found = (start, end, value, warnings)
        else:
            later = True
            break
    if found is None:
        raise RelationParseError("no bracketed relation list found")
    start, end, value, warnings = found
    warnings = list(warnings)
    if text[:start].strip() or text[end:].strip():
        warnings.append(WARN_PROSE)
    if later:
        warnings.append(WARN_LATER_LISTS)

    span_ids = sample.span_ids if sample is not None else None
    relations = []
    for index, raw in enumerate(value):
        if set(raw) - _RELATION_KEYS and WARN_EXTRA_KEYS not in warnings:
            warnings.append(WARN_EXTRA_KEYS)
        try:
            relations.append(relation_from_dict(raw, span_ids))
        except DataError as exc:
            raise RelationParseError(f"relation {index}: {exc}") from None
    return RawExtraction(text, relations, warnings)


def serialize_relations(relations: Iterable[Relation]) -> str:
    """Canonical double-quoted form, spans ascending."""
    return json.dumps([r.to_dict() for r in relations], ensure_ascii=False)


def relations_from_json(items: Iterable[Any]) -> list[Relation]:
    return [relation_from_dict(x) for x in items]


__all__ = [
    "RawExtraction",
    "RelationLabel",
    "RelationParseError",
    "parse_relations",
    "relations_from_json",
    "serialize_relations",
]
