import pytest

from seqfusion.corpus import Relation, RelationLabel
from seqfusion.prompting import (
    HEADER_FORMAT,
    HEADER_INPUT,
    HEADER_INSTRUCTION,
    HEADER_REASON,
    HEADER_TIPS,
    PromptStyle,
    build_re_prompt,
    default_template,
    load_template_overrides,
    prompt_input,
)
from seqfusion.re_parser import serialize_relations


def test_dce_template():
    t = default_template("DCE")
    assert t.instruction.startswith("Task Definition is as follows")
    assert len(t.reasoning_steps) == 2
    assert t.reasoning_steps[0].endswith("you should output an empty list ([]).")
    assert "`is_context_needed`" in t.tips


def test_mee_template():
    t = default_template("MEE")
    assert "may not always correspond exactly" in t.tips
    assert t.format_examples[0] == "[]"
    assert t.format_intro.endswith("format:")
    assert t != default_template("DCE")


def test_cot_prompt_sections(record_sample):
    prompt = build_re_prompt(default_template("DCE"), record_sample, "CoT")
    positions = [prompt.index(h) for h in (HEADER_INSTRUCTION, HEADER_REASON, HEADER_FORMAT, HEADER_TIPS, HEADER_INPUT)]
    assert positions == sorted(positions)
    assert record_sample.sentence in prompt
    assert prompt_input(prompt) == record_sample.input_dict()
    assert '"gold"' not in prompt
    assert build_re_prompt(default_template("DCE"), record_sample, PromptStyle.COT) == prompt


def test_few_shot_drops_reason_and_inlines_demos(edce_train, record_sample):
    demos = [(s, serialize_relations(s.gold)) for s in edce_train.samples[:3]]
    prompt = build_re_prompt(default_template("DCE"), record_sample, "FewShot", demos)
    assert HEADER_REASON not in prompt
    fmt = prompt.index(HEADER_FORMAT)
    tips = prompt.index(HEADER_TIPS)
    for demo, gold in demos:
        assert prompt.count(gold) == 1
        assert fmt < prompt.index(gold) < tips
        assert demo.sentence in prompt


def test_few_shot_needs_demos(record_sample):
    with pytest.raises(ValueError):
        build_re_prompt(default_template("DCE"), record_sample, "FewShot", [])


def test_template_overrides(tmp_path):
    (tmp_path / "tips.txt").write_text("Be careful.\n")
    (tmp_path / "reason.txt").write_text("Step one\ncontinues.\n\nStep two.\n")
    (tmp_path / "format.txt").write_text("Format:\n[]\n")
    t = load_template_overrides(tmp_path, default_template("MEE"))
    assert t.tips == "Be careful."
    assert t.reasoning_steps == ("Step one continues.", "Step two.")
    assert t.format_intro == "Format:" and t.format_examples == ("[]",)
    assert t.instruction == default_template("MEE").instruction
