"""Stage functions behind the CLI, plus the offline mock responders.

Each stage reads and writes the files of an output directory::

    predictions.jsonl  facts.jsonl  contexts.jsonl  answers.jsonl
    reports/*.json|*.txt|*.png  run-config.json
"""

from __future__ import annotations

import json
import logging
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

from seqfusion import plotting
from seqfusion.corpus import Corpus, DatasetKind, Relation, atomic_write_text, load_corpus, split_corpus
from seqfusion.editing import (
    DEFAULT_DEMOS,
    AnswerRecord,
    EditContext,
    QUESTIONS,
    build_demonstrations,
    contexts_for_pairs,
    dump_jsonl,
    generate_qa_pairs,
    run_edited_qa,
)
from seqfusion.error_report import COLUMN_TITLES, ErrorTable, ErrorType, classify, distribution
from seqfusion.errors import BackendError, DataError
from seqfusion.llm_client import (
    DEFAULT_CONCURRENCY,
    Backend,
    LiveBackend,
    LlmRequest,
    MockBackend,
    ReplayBackend,
)
from seqfusion.prompting import (
    PromptStyle,
    PromptTemplate,
    build_re_prompt,
    default_template,
    load_template_overrides,
    prompt_input,
)
from seqfusion.qa_eval import (
    AccuracyReport,
    apply_adjudication,
    corpus_accuracy,
    load_adjudication,
    normalize_answer,
    sample_score,
)
from seqfusion.re_eval import F1Table, f1_table
from seqfusion.re_parser import RelationParseError, parse_relations, relations_from_json, serialize_relations
from seqfusion.skt import FactTemplate, NaturalFact, load_fact_template, transform_corpus

log = logging.getLogger(__name__)

PREDICTIONS = "predictions.jsonl"
FACTS = "facts.jsonl"
CONTEXTS = "contexts.jsonl"
ANSWERS = "answers.jsonl"
RUN_CONFIG = "run-config.json"

REFUSAL = "I cannot determine the combinations."


@dataclass
class PipelineConfig:
    dataset: str
    kind: str
    test_dataset: str | None = None
    test_fraction: float = 0.2
    backend: str = "mock:oracle"
    model: str = "gpt-4"
    qa_model: str | None = None
    endpoint: str = "https://api.openai.com/v1"
    api_key_env: str = "OPENAI_API_KEY"
    cache: str | None = None
    style: str = "CoT"
    templates: str | None = None
    seed: int = 0
    demos: int = DEFAULT_DEMOS
    concurrency: int = DEFAULT_CONCURRENCY
    adjudication: str | None = None
    figures: bool = True
    out: str = "out"

    def echo(self) -> dict[str, Any]:
        data = asdict(self)
        # the echo lives inside the output directory; its path is implied
        data.pop("out")
        return data


# -- mock responders ---------------------------------------------------------


def fact_echo(prompt: str) -> str:
    """Answer an edit prompt by restating its final ``New Fact`` block."""
    _, sep, tail = prompt.rpartition("New Fact: ")
    if not sep:
        return REFUSAL
    return tail.split("\nQ:", 1)[0].strip() or REFUSAL


def oracle_responder(corpora: Sequence[Corpus]) -> Callable[[str], str]:
    """Gold relations for extraction prompts, fact echo for edit prompts."""
    gold: dict[str, str] = {}
    for corpus in corpora:
        for s in corpus:
            gold[json.dumps(s.input_dict(), sort_keys=True)] = serialize_relations(s.gold)

    def respond(prompt: str) -> str:
        target = prompt_input(prompt)
        if target is not None:
            return gold.get(json.dumps(target, sort_keys=True), "[]")
        return fact_echo(prompt)

    return respond


def make_backend(config: PipelineConfig, corpora: Sequence[Corpus] = ()) -> Backend:
    """Backend from a spec string.

    ``live``, ``replay`` (cache only), ``mock:oracle``, ``mock:refuse`` or
    ``mock:script=PATH`` (JSON object keyed by prompt hash, or a list of
    responses). With ``config.cache`` set, non-replay backends are wrapped
    in a recording cache.
    """
    spec = config.backend
    inner: Backend | None
    if spec == "replay":
        if not config.cache:
            raise BackendError("the replay backend needs --cache")
        return ReplayBackend(config.cache)
    if spec == "live":
        live = LiveBackend(config.endpoint, config.api_key_env, concurrency=config.concurrency)
        live.api_key()  # fail before any request
        inner = live
    elif spec == "mock:oracle":
        inner = MockBackend(responder=oracle_responder(corpora))
    elif spec == "mock:refuse":
        inner = MockBackend(responder=lambda prompt: REFUSAL)
    elif spec.startswith("mock:script="):
        path = Path(spec.split("=", 1)[1])
        try:
            script = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise BackendError(f"cannot read mock script {path}: {exc}") from None
        inner = MockBackend(keyed=script) if isinstance(script, dict) else MockBackend(ordered=script)
    else:
        raise BackendError(f"unknown backend {spec!r}")
    if config.cache:
        return ReplayBackend(config.cache, fallback=inner)
    return inner


# -- data loading ------------------------------------------------------------


def load_splits(config: PipelineConfig) -> tuple[Corpus, Corpus]:
    corpus = load_corpus(config.dataset, config.kind)
    if config.test_dataset:
        return corpus, load_corpus(config.test_dataset, config.kind)
    try:
        return split_corpus(corpus, config.test_fraction, config.seed)
    except ValueError as exc:
        raise DataError(str(exc)) from None


def prompt_template(config: PipelineConfig) -> PromptTemplate:
    base = default_template(config.kind)
    if config.templates:
        return load_template_overrides(config.templates, base)
    return base


def fact_template(config: PipelineConfig) -> FactTemplate | None:
    if config.templates:
        path = Path(config.templates) / "fact.txt"
        if path.is_file():
            return load_fact_template(path, config.kind)
    return None


def question_text(config: PipelineConfig) -> str:
    if config.templates:
        path = Path(config.templates) / "question.txt"
        if path.is_file():
            return path.read_text(encoding="utf-8").strip()
    return QUESTIONS[DatasetKind.parse(config.kind)]


def read_jsonl(path: "str | Path") -> list[dict]:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    out = []
    for lineno, line in enumerate(lines, 1):
        if line.strip():
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    return out


def write_text(out: Path, name: str, text: str) -> Path:
    path = out / name
    atomic_write_text(path, text)
    return path


# -- stage 1: extraction -----------------------------------------------------


@dataclass
class PredictionRecord:
    sample_id: str
    relations: list[Relation]
    raw: str | None = None
    warnings: list[str] = field(default_factory=list)
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "relations": [r.to_dict() for r in self.relations],
            "raw": self.raw,
            "warnings": self.warnings,
            "error": self.error,
        }


def extract(
    test: Corpus,
    backend: Backend,
    *,
    template: PromptTemplate,
    style: "PromptStyle | str" = PromptStyle.COT,
    train: Corpus | None = None,
    demos: int = DEFAULT_DEMOS,
    seed: int = 0,
    model: str = "gpt-4",
    concurrency: int = DEFAULT_CONCURRENCY,
) -> list[PredictionRecord]:
    style = PromptStyle.parse(style)
    shots: list[tuple] = []
    if style is PromptStyle.FEW_SHOT:
        if train is None or not len(train):
            raise DataError("few-shot extraction needs a nonempty training split")
        pool = list(train.samples)
        random.Random(seed).shuffle(pool)
        shots = [(s, serialize_relations(s.gold)) for s in pool[:demos]]

    def one(sample) -> PredictionRecord:
        prompt = build_re_prompt(template, sample, style, shots)
        try:
            resp = backend.complete(LlmRequest(model, prompt))
        except BackendError as exc:
            log.warning("sample %s: %s", sample.id, exc)
            return PredictionRecord(sample.id, [], None, [], f"backend: {exc}")
        try:
            parsed = parse_relations(resp.text, sample)
        except RelationParseError as exc:
            return PredictionRecord(sample.id, [], resp.text, [], f"parse: {exc}")
        return PredictionRecord(sample.id, parsed.relations, resp.text, parsed.warnings)

    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
        return list(pool.map(one, test.samples))


def load_predictions(path: "str | Path") -> tuple[dict[str, list[Relation]], list[str]]:
    """Relations by sample id, plus warnings for errored records."""
    preds: dict[str, list[Relation]] = {}
    warnings = []
    for rec in read_jsonl(path):
        try:
            sid = str(rec["sample_id"])
            preds[sid] = relations_from_json(rec.get("relations", []))
        except (KeyError, DataError) as exc:
            raise DataError(f"{path}: bad prediction record: {exc}") from None
        if rec.get("error"):
            warnings.append(f"sample {sid}: {rec['error']}")
    return preds, warnings


# -- stage reports -----------------------------------------------------------


def evaluate_re(
    test: Corpus, predictions: Mapping[str, Sequence[Relation]], extra_warnings: Sequence[str] = ()
) -> F1Table:
    table = f1_table(test, predictions)
    table.warnings = list(extra_warnings) + table.warnings
    return table


def write_re_report(out: Path, table: F1Table, figures: bool = True) -> None:
    write_text(out, "reports/re_f1.json", table.to_json())
    write_text(out, "reports/re_f1.txt", table.to_text())
    if figures:
        plotting.plot_f1_table(table.percentages(), out / "reports" / "re_f1.png")


def load_facts(path: "str | Path") -> list[NaturalFact]:
    try:
        return [NaturalFact.from_dict(r) for r in read_jsonl(path)]
    except (KeyError, TypeError) as exc:
        raise DataError(f"{path}: bad fact record: {exc}") from None


def load_answers(path: "str | Path") -> list[AnswerRecord]:
    try:
        return [AnswerRecord.from_dict(r) for r in read_jsonl(path)]
    except (KeyError, TypeError) as exc:
        raise DataError(f"{path}: bad answer record: {exc}") from None


def edit_contexts(
    train: Corpus,
    test: Corpus,
    facts: Sequence[NaturalFact],
    *,
    demos: int = DEFAULT_DEMOS,
    seed: int = 0,
    question: str | None = None,
) -> list[EditContext]:
    pool = build_demonstrations(train, demos, seed, question)
    pairs = generate_qa_pairs(facts, test, question)
    return contexts_for_pairs(pool, pairs)


@dataclass
class QAResult:
    accuracy: AccuracyReport
    errors: dict[ErrorType, float]
    classifications: dict[str, list[str]]


def evaluate_qa(
    test: Corpus,
    answers: Sequence[AnswerRecord],
    adjudication: str | None = None,
) -> QAResult:
    by_id = test.by_id()
    scores = []
    classes: dict[str, list[str]] = {}
    for rec in answers:
        sample = by_id.get(str(rec.sample_id))
        if sample is None:
            raise DataError(f"answer references unknown sample {rec.sample_id!r}")
        if not rec.expected:
            raise DataError(f"answer for sample {rec.sample_id} has no expected combinations")
        generated = normalize_answer(rec.answer or "", sample)
        scores.append(sample_score(rec.expected, generated, sample.id))
        found = classify(sample, rec.expected, generated, rec.answer)
        classes[sample.id] = sorted(t.value for t in found)
    if not scores:
        raise DataError("no answers to score")
    report = corpus_accuracy(scores)
    if adjudication:
        report = apply_adjudication(report, load_adjudication(adjudication))
    dist = distribution(({ErrorType(t) for t in v} for v in classes.values()), len(scores))
    return QAResult(report, dist, classes)


def write_qa_report(
    out: Path, result: QAResult, *, model: str, dataset: str, figures: bool = True
) -> None:
    write_text(out, "reports/qa_accuracy.json", result.accuracy.to_json())
    write_text(out, "reports/qa_accuracy.txt", result.accuracy.to_text())
    table = ErrorTable()
    table.add(model, dataset, "RE+SKT+IKE", result.errors)
    payload = table.to_dict()
    payload["samples"] = result.classifications
    write_text(out, "reports/errors.json", json.dumps(payload, indent=2, sort_keys=True) + "\n")
    write_text(out, "reports/errors.txt", table.to_text())
    if figures:
        plotting.plot_sample_scores(
            [s.D for s in result.accuracy.samples],
            result.accuracy.percent,
            out / "reports" / "qa_scores.png",
        )
        plotting.plot_error_distribution(
            {COLUMN_TITLES[t]: v for t, v in result.errors.items()},
            out / "reports" / "errors.png",
        )


# -- stage drivers used by the CLI ------------------------------------------


def stage_extract(config: PipelineConfig, backend: Backend | None = None) -> Path:
    train, test = load_splits(config)
    backend = backend or make_backend(config, [train, test])
    records = extract(
        test,
        backend,
        template=prompt_template(config),
        style=config.style,
        train=train,
        demos=config.demos,
        seed=config.seed,
        model=config.model,
        concurrency=config.concurrency,
    )
    return write_text(Path(config.out), PREDICTIONS, dump_jsonl(records))


def stage_eval_re(config: PipelineConfig, predictions: "str | Path") -> F1Table:
    _, test = load_splits(config)
    preds, warnings = load_predictions(predictions)
    table = evaluate_re(test, preds, warnings)
    write_re_report(Path(config.out), table, config.figures)
    return table


def stage_transform(config: PipelineConfig, predictions: "str | Path") -> Path:
    _, test = load_splits(config)
    preds, _ = load_predictions(predictions)
    known = test.by_id()
    for sid in preds:
        if sid not in known:
            raise DataError(f"prediction for unknown sample {sid!r}")
    facts = transform_corpus(preds, test, fact_template(config))
    return write_text(Path(config.out), FACTS, dump_jsonl(facts))


def stage_edit_qa(
    config: PipelineConfig, facts_path: "str | Path", backend: Backend | None = None
) -> Path:
    train, test = load_splits(config)
    facts = load_facts(facts_path)
    contexts = edit_contexts(
        train, test, facts, demos=config.demos, seed=config.seed, question=question_text(config)
    )
    out = Path(config.out)
    write_text(out, CONTEXTS, dump_jsonl(contexts))
    backend = backend or make_backend(config, [train, test])
    answers = run_edited_qa(
        backend, contexts, config.qa_model or config.model, concurrency=config.concurrency
    )
    return write_text(out, ANSWERS, dump_jsonl(answers))


def stage_eval_qa(config: PipelineConfig, answers_path: "str | Path") -> QAResult:
    _, test = load_splits(config)
    result = evaluate_qa(test, load_answers(answers_path), config.adjudication)
    write_qa_report(
        Path(config.out),
        result,
        model=config.qa_model or config.model,
        dataset=DatasetKind.parse(config.kind).value,
        figures=config.figures,
    )
    return result


def write_run_config(config: PipelineConfig) -> Path:
    text = json.dumps(config.echo(), indent=2, sort_keys=True) + "\n"
    return write_text(Path(config.out), RUN_CONFIG, text)


def run_pipeline(config: PipelineConfig) -> dict[str, Any]:
    """All stages in order, sharing one backend."""
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    write_run_config(config)
    train, test = load_splits(config)
    backend = make_backend(config, [train, test])
    predictions = stage_extract(config, backend)
    table = stage_eval_re(config, predictions)
    facts = stage_transform(config, predictions)
    answers = stage_edit_qa(config, facts, backend)
    qa = stage_eval_qa(config, answers)
    return {"re": table, "qa": qa}
