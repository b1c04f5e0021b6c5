"""Refined QA accuracy for combination answers.

Each gold combination S is paired with a generated combination G; its score
is ``|S & G| / |S|`` (zero when they share at most one entity) times an
effect flag E. A sample scores the mean over its gold combinations and the
corpus accuracy is the mean over samples.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from seqfusion.corpus import RelationLabel, Sample
from seqfusion.errors import DataError

# effect phrases, matched case-insensitively on word boundaries
EFFECT_KEYWORDS: dict[str, RelationLabel] = {
    "positive": RelationLabel.POS,
    "strengthens": RelationLabel.POS,
    "strengthen": RelationLabel.POS,
    "negative": RelationLabel.NEG,
    "weakens": RelationLabel.NEG,
    "weaken": RelationLabel.NEG,
    "not yet clear": RelationLabel.COMB,
    "not clear": RelationLabel.COMB,
    "unclear": RelationLabel.COMB,
    "undetermined": RelationLabel.COMB,
}

_EFFECT_RE = re.compile(
    r"(?<!\w)("
    + "|".join(re.escape(k) for k in sorted(EFFECT_KEYWORDS, key=len, reverse=True))
    + r")(?!\w)",
    re.IGNORECASE,
)
# sentence break: terminal punctuation followed by space or a capital letter
_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])(?:\s+|(?=[A-Z]))|\n+")


def normalize_name(name: str) -> str:
    return " ".join(name.casefold().split())


@dataclass(frozen=True)
class ComboAnswer:
    """A set of entity names plus an effect; ``effect=None`` means unknown."""

    entities: frozenset[str]
    effect: RelationLabel | None

    def __post_init__(self) -> None:
        names = frozenset(normalize_name(e) for e in self.entities)
        if not names or "" in names:
            raise DataError("a combo answer needs at least one nonempty entity name")
        object.__setattr__(self, "entities", names)
        if self.effect is not None:
            object.__setattr__(self, "effect", RelationLabel(self.effect))

    @classmethod
    def of(cls, names: Iterable[str], effect: "RelationLabel | str | None") -> "ComboAnswer":
        return cls(frozenset(names), None if effect is None else RelationLabel(effect))

    def to_dict(self) -> dict:
        return {
            "entities": sorted(self.entities),
            "effect": self.effect.value if self.effect is not None else None,
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "ComboAnswer":
        return cls.of(raw["entities"], raw.get("effect"))


def _mention_pattern(names: Iterable[str]) -> re.Pattern | None:
    uniq = sorted({normalize_name(n) for n in names if n.strip()}, key=len, reverse=True)
    if not uniq:
        return None
    alts = "|".join(r"\s+".join(re.escape(w) for w in n.split()) for n in uniq)
    return re.compile(rf"(?<!\w)(?:{alts})(?!\w)", re.IGNORECASE)


def _first_effect(text: str) -> RelationLabel | None:
    m = _EFFECT_RE.search(text)
    return EFFECT_KEYWORDS[m.group(1).lower()] if m else None


def normalize_answer(text: str, sample: "Sample | Iterable[str]") -> list[ComboAnswer]:
    """Pull combination claims out of a free-text answer.

    Entity names come from *sample*'s span texts (or an explicit name list).
    A clause opens at each sentence that mentions an entity and absorbs the
    following entity-free sentences, so "X and Y are combined. The impact is
    positive." reads as one claim. The effect is the first effect phrase in
    the clause, searched with entity mentions blanked out.
    """
    names = [s.text for s in sample.spans] if isinstance(sample, Sample) else list(sample)
    pattern = _mention_pattern(names)
    if pattern is None or not text:
        return []
    clauses: list[tuple[list[str], list[str]]] = []
    for sentence in _SENTENCE_SPLIT.split(text):
        if not sentence or not sentence.strip():
            continue
        found = [normalize_name(m.group(0)) for m in pattern.finditer(sentence)]
        masked = pattern.sub(" ", sentence)
        if found:
            clauses.append((found, [masked]))
        elif clauses:
            clauses[-1][1].append(masked)
    combos = []
    for found, parts in clauses:
        entities = frozenset(found)
        if len(entities) < 2:
            continue
        effect = None
        for part in parts:
            effect = _first_effect(part)
            if effect is not None:
                break
        combos.append(ComboAnswer(entities, effect))
    return combos


def combo_score(s: ComboAnswer, g: ComboAnswer) -> Fraction:
    shared = len(s.entities & g.entities)
    if shared <= 1:
        return Fraction(0)
    return Fraction(shared, len(s.entities))


def contradicted_sets(generated: Sequence[ComboAnswer]) -> set[frozenset[str]]:
    """Entity sets the answer states with two or more different known effects."""
    seen: dict[frozenset[str], set[RelationLabel]] = {}
    for g in generated:
        if g.effect is not None:
            seen.setdefault(g.entities, set()).add(g.effect)
    return {k for k, v in seen.items() if len(v) > 1}


def effect_flag(s: ComboAnswer, g: ComboAnswer, contradicted: set[frozenset[str]]) -> int:
    if g.entities in contradicted:
        return 0
    return int(g.effect is not None and g.effect == s.effect)


@dataclass
class SampleScore:
    combo_scores: list[float]
    effect_flags: list[int]
    D: float
    pairs: list[int | None] = field(default_factory=list)
    sample_id: str = ""
    exact_D: Fraction = field(default=Fraction(0), compare=False, repr=False)

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "D": self.D,
            "combo_scores": self.combo_scores,
            "effect_flags": self.effect_flags,
            "pairs": self.pairs,
        }


def pair_combos(
    standards: Sequence[ComboAnswer], generated: Sequence[ComboAnswer]
) -> list[int | None]:
    """Generated index paired with each standard (or None).

    Maximizes the summed effect-weighted score, then the summed raw score.
    Only pairs sharing at least two entities are eligible.
    """
    if not standards or not generated:
        return [None] * len(standards)
    contradicted = contradicted_sets(generated)
    denom = math.lcm(*(len(s.entities) for s in standards))
    raw = np.zeros((len(standards), len(generated)), dtype=np.int64)
    flag = np.zeros_like(raw)
    for i, s in enumerate(standards):
        for j, g in enumerate(generated):
            sc = combo_score(s, g)
            raw[i, j] = int(sc * denom)
            flag[i, j] = effect_flag(s, g, contradicted)
    if not raw.any():
        return [None] * len(standards)
    big = denom * len(standards) + 1
    weight = (raw * flag * big + raw).astype(np.float64)
    rows, cols = linear_sum_assignment(weight, maximize=True)
    out: list[int | None] = [None] * len(standards)
    for r, c in zip(rows, cols):
        if raw[r, c] > 0:
            out[int(r)] = int(c)
    return out


def sample_score(
    standards: Sequence[ComboAnswer],
    generated: Sequence[ComboAnswer],
    sample_id: str = "",
) -> SampleScore:
    if not standards:
        raise DataError("sample_score needs at least one standard combination")
    pairs = pair_combos(standards, generated)
    contradicted = contradicted_sets(generated)
    scores: list[Fraction] = []
    flags: list[int] = []
    for s, j in zip(standards, pairs):
        if j is None:
            scores.append(Fraction(0))
            flags.append(0)
        else:
            scores.append(combo_score(s, generated[j]))
            flags.append(effect_flag(s, generated[j], contradicted))
    exact = sum((sc * e for sc, e in zip(scores, flags)), Fraction(0)) / len(standards)
    return SampleScore([float(x) for x in scores], flags, float(exact), pairs, sample_id, exact)


@dataclass
class AccuracyReport:
    T: float
    n: int
    final_accuracy: float
    samples: list[SampleScore] = field(default_factory=list)
    adjudicated: dict[str, str] = field(default_factory=dict)

    @property
    def percent(self) -> float:
        return 100.0 * self.final_accuracy

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "n": self.n,
            "final_accuracy": self.final_accuracy,
            "accuracy_percent": round(self.percent, 1),
            "adjudicated": dict(self.adjudicated),
            "samples": [s.to_dict() for s in self.samples],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        lines = [
            f"samples        {self.n}",
            f"total score T  {self.T:.4f}",
            f"accuracy       {self.percent:.1f}%",
        ]
        if self.adjudicated:
            lines.append(f"adjudicated    {len(self.adjudicated)}")
        lines.append("")
        lines.append(f"{'sample':<20}{'D':>8}")
        for s in self.samples:
            mark = " *" if s.sample_id in self.adjudicated else ""
            lines.append(f"{s.sample_id:<20}{s.D:>8.3f}{mark}")
        return "\n".join(lines) + "\n"


def _exact(score: SampleScore) -> Fraction:
    if float(score.exact_D) == score.D:
        return score.exact_D
    return Fraction(score.D).limit_denominator(10**9)


def corpus_accuracy(scores: Sequence[SampleScore]) -> AccuracyReport:
    if not scores:
        raise DataError("corpus_accuracy needs at least one sample")
    total = sum((_exact(s) for s in scores), Fraction(0))
    T = float(total / len(scores))
    return AccuracyReport(T, len(scores), T, list(scores))


@dataclass(frozen=True)
class Verdict:
    sample_id: str
    D: float
    note: str = ""


def load_adjudication(path: "str | Path") -> list[Verdict]:
    verdicts = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
            verdicts.append(Verdict(str(raw["sample_id"]), float(raw["D"]), raw.get("note", "")))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}:{lineno}: bad adjudication record: {exc}") from None
    return verdicts


def apply_adjudication(
    report: AccuracyReport, overrides: "Iterable[Verdict] | Mapping[str, float]"
) -> AccuracyReport:
    """Replace automated sample scores with human verdicts."""
    if isinstance(overrides, Mapping):
        overrides = [Verdict(k, v) for k, v in overrides.items()]
    by_id = {s.sample_id: s for s in report.samples}
    chosen: dict[str, Verdict] = {}
    for v in overrides:
        if v.sample_id not in by_id:
            raise DataError(f"adjudication references unknown sample {v.sample_id!r}")
        if not 0.0 <= v.D <= 1.0:
            raise DataError(f"adjudicated D for {v.sample_id!r} must lie in [0, 1], got {v.D}")
        chosen[v.sample_id] = v
    if not chosen:
        return report
    samples = []
    for s in report.samples:
        v = chosen.get(s.sample_id)
        if v is None:
            samples.append(s)
            continue
        exact = Fraction(v.D).limit_denominator(10**9)
        samples.append(
            SampleScore(s.combo_scores, s.effect_flags, v.D, s.pairs, s.sample_id, exact)
        )
    new = corpus_accuracy(samples)
    new.adjudicated = dict(report.adjudicated)
    new.adjudicated.update({sid: v.note or "human verdict" for sid, v in chosen.items()})
    return new
