import pytest

from seqfusion.corpus import RelationLabel
from seqfusion.editing import (
    QUESTIONS,
    build_demonstrations,
    build_edit_context,
    generate_qa_pairs,
    run_edited_qa,
)
from seqfusion.errors import DataError
from seqfusion.llm_client import MockBackend, ReplayBackend
from seqfusion.pipeline import fact_echo
from seqfusion.qa_eval import ComboAnswer, normalize_answer, sample_score
from seqfusion.skt import NaturalFact, transform_corpus
from tests.test_qa_eval import LLAMA2, QWEN


def gold_facts(corpus):
    return transform_corpus({s.id: s.gold for s in corpus}, corpus)


def test_qa_pairs_257(edce_test):
    pairs = generate_qa_pairs(gold_facts(edce_test), edce_test)
    p257 = next(p for p in pairs if p.sample_id == "257")
    assert p257.question.endswith(QUESTIONS[edce_test.kind])
    assert p257.question.startswith(edce_test.get("257").sentence)
    assert [sorted(e.entities) for e in p257.expected] == [
        sorted([d, "chemotherapy"]) for d in ("trastuzumab", "pertuzumab", "bevacizumab", "lapatinib")
    ]
    assert {e.effect for e in p257.expected} == {RelationLabel.POS}


def test_samples_without_facts_get_no_pair(edce_test):
    pairs = generate_qa_pairs(gold_facts(edce_test), edce_test)
    assert "e5" not in {p.sample_id for p in pairs}
    assert len(pairs) == 4


def test_expected_equals_inversion(edce_test):
    for pair in generate_qa_pairs(gold_facts(edce_test), edce_test):
        sample = edce_test.get(pair.sample_id)
        inverted = [c for f in pair.facts for c in normalize_answer(f.text, sample)]
        assert inverted == list(pair.expected)


def test_dangling_fact(edce_test, dce_record):
    with pytest.raises(DataError, match="unknown sample"):
        generate_qa_pairs(gold_facts(dce_record), edce_test)


def test_demonstrations_seeded(edce_train):
    a = build_demonstrations(edce_train, k=3, seed=1)
    assert len(a) == 3
    assert a == build_demonstrations(edce_train, k=3, seed=1)
    for d in a:
        assert d.answer == " ".join(f.text for f in d.facts)


def test_edit_context_blocks_and_alignment(edce_train, edce_test):
    demos = build_demonstrations(edce_train, k=2, seed=0)
    facts = [f for f in gold_facts(edce_test) if f.sample_id == "e2"]
    ctx, prompt = build_edit_context(demos, facts, "Q?", sample_id="e2")
    assert prompt.count("New Fact:") == 3
    assert prompt.endswith("Q: Q?\nA:")
    assert ctx.l_align == 1
    ctx0, _ = build_edit_context(demos, facts, "Q?", sample_id="257")
    assert ctx0.l_align == 0
    with pytest.raises(ValueError):
        build_edit_context(demos, facts, "  ")


def test_alignment_flips_when_target_facts_added(edce_test):
    facts = gold_facts(edce_test)
    others = [f for f in facts if f.sample_id != "e3"]
    assert build_edit_context([], others, "q", "e3")[0].l_align == 0
    assert build_edit_context([], facts, "q", "e3")[0].l_align == 1


def _contexts(edce_train, edce_test):
    demos = build_demonstrations(edce_train, k=2, seed=0)
    pairs = generate_qa_pairs(gold_facts(edce_test), edce_test)
    return [build_edit_context(demos, p.facts, p.question, p.sample_id, p.expected)[0] for p in pairs]


def test_llama2_fixture_through_mock(edce_train, edce_test):
    ctxs = [c for c in _contexts(edce_train, edce_test) if c.sample_id == "257"]
    answers = run_edited_qa(MockBackend(responder=lambda p: LLAMA2), ctxs)
    sample = edce_test.get("257")
    score = sample_score(answers[0].expected, normalize_answer(answers[0].answer, sample))
    assert score.effect_flags == [1, 1, 1, 1] and score.D == 1.0


def test_qwen_answer_captured_verbatim(edce_train, edce_test):
    ctxs = _contexts(edce_train, edce_test)[:1]
    answers = run_edited_qa(MockBackend(responder=lambda p: QWEN), ctxs)
    assert answers[0].answer == QWEN


def test_empty_contexts():
    assert run_edited_qa(MockBackend(), []) == []


def test_echo_mock_scores_full_marks(edce_train, edce_test):
    ctxs = _contexts(edce_train, edce_test)
    answers = run_edited_qa(MockBackend(responder=fact_echo), ctxs)
    for a in answers:
        sample = edce_test.get(a.sample_id)
        assert sample_score(a.expected, normalize_answer(a.answer, sample)).D == 1.0


def test_backend_errors_recorded_per_sample(edce_train, edce_test):
    ctxs = _contexts(edce_train, edce_test)
    answers = run_edited_qa(MockBackend(ordered=["only one"]), ctxs, concurrency=1)
    assert answers[0].answer == "only one"
    assert all(a.error and a.answer is None for a in answers[1:])


def test_replay_is_byte_identical(tmp_path, edce_train, edce_test):
    ctxs = _contexts(edce_train, edce_test)
    cache = tmp_path / "cache.jsonl"
    first = run_edited_qa(ReplayBackend(cache, MockBackend(responder=fact_echo)), ctxs)
    second = run_edited_qa(ReplayBackend(cache), ctxs)
    assert [a.to_dict() for a in first] == [a.to_dict() for a in second]
