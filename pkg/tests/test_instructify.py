from collections import Counter

import pytest

from mmcurate.errors import RecordValidationError
from mmcurate.instructify import (
    ARABIC_CHOICE_LABELS,
    TemplateSet,
    flatten_conversation,
    mcq_to_instruction,
    vqa_to_instruction,
)
from mmcurate.records import VqaRecord


def make_vqa(i=0, answers=("قطة", "قطة", "كلب")):
    return VqaRecord(
        id=f"v:train:{i}", split="train", image=f"img/{i}.jpg",
        question_src="what?", answers_src=["cat", "cat", "dog"],
        question_tgt="ما هذا؟", answers_tgt=list(answers),
        status="translated", tgt_lang="ar",
    )


def test_template_set_requires_exactly_one_slot():
    with pytest.raises(ValueError):
        TemplateSet(("no slot here",))
    with pytest.raises(ValueError):
        TemplateSet(("{question} and {question}",))
    TemplateSet(("{question}",))  # fine


def test_template_set_empty_rejected():
    with pytest.raises(ValueError):
        TemplateSet(())


def test_render_survives_literal_braces():
    ts = TemplateSet(('أجب بصيغة {"a": 1} عن: {question}',))
    assert ts.render(0, "لماذا؟") == 'أجب بصيغة {"a": 1} عن: لماذا؟'


def test_choose_is_deterministic_and_spread():
    ts = TemplateSet(tuple(f"t{i} {{question}}" for i in range(5)), rng_seed=7)
    first = [ts.choose(f"rec:{i}") for i in range(200)]
    second = [ts.choose(f"rec:{i}") for i in range(200)]
    assert first == second
    # different seed reshuffles
    reseeded = TemplateSet(ts.templates, rng_seed=8)
    assert first != [reseeded.choose(f"rec:{i}") for i in range(200)]
    # every template gets used somewhere
    assert set(first) == {0, 1, 2, 3, 4}


def test_default_arabic_templates_load():
    ts = TemplateSet.default_arabic(rng_seed=3)
    assert len(ts.templates) >= 3
    assert ts.name == "vqa_ar" and ts.rng_seed == 3
    rendered = ts.render(0, "سؤال")
    assert "سؤال" in rendered


def test_vqa_identity_template_passes_question_through():
    ts = TemplateSet(("{question}",))
    rec = make_vqa(answers=("أبيض",))
    rec.question_tgt = "ما لون القطة؟"
    rec.answers_src = ["white"]
    out = vqa_to_instruction(rec, ts)
    assert out.instruction == "ما لون القطة؟"
    assert out.response == "أبيض"


def test_vqa_to_instruction_uses_first_answer_and_template():
    ts = TemplateSet(("Q: {question}",), rng_seed=3)
    rec = make_vqa()
    out = vqa_to_instruction(rec, ts)
    assert out.task_type == "vqa"
    assert out.instruction == "Q: ما هذا؟"
    assert out.response == "قطة"
    assert out.id == rec.id and out.image == rec.image
    # same set, same record: identical output both times
    assert vqa_to_instruction(rec, ts) == out


def test_vqa_to_instruction_requires_translation():
    rec = VqaRecord(
        id="v", split="train", image="i", question_src="q", answers_src=["a"],
    )
    with pytest.raises(RecordValidationError):
        vqa_to_instruction(rec, TemplateSet(("{question}",)))


def test_vqa_to_instruction_rejects_empty_answers():
    rec = make_vqa()
    rec.answers_tgt = []
    with pytest.raises(RecordValidationError):
        vqa_to_instruction(rec, TemplateSet(("{question}",)))


def test_mcq_labels_and_layout():
    out = mcq_to_instruction(
        record_id="m:0", image="img.jpg", question="ما لون السماء؟",
        choices=["أزرق", "أخضر", "أحمر"], answer_index=0,
    )
    lines = out.instruction.split("\n")
    assert lines[0] == "ما لون السماء؟"
    assert lines[1] == "أ. أزرق"
    assert lines[2] == "ب. أخضر"
    assert lines[3] == "ج. أحمر"
    assert out.response == "أ. أزرق"
    assert out.choices == ["أزرق", "أخضر", "أحمر"]


def test_mcq_response_carries_label_and_text():
    out = mcq_to_instruction("m", "i", "q", ["w", "x", "y", "z"], 1)
    assert out.instruction.split("\n")[1:] == ["أ. w", "ب. x", "ج. y", "د. z"]
    assert out.response.startswith("ب")
    assert out.response == "ب. x"
    two = mcq_to_instruction("m", "i", "q", ["a", "b"], 0)
    assert two.response.startswith("أ")


def test_mcq_choice_count_limits():
    with pytest.raises(RecordValidationError):
        mcq_to_instruction("m", "i", "q", ["only"], 0)
    with pytest.raises(RecordValidationError):
        mcq_to_instruction("m", "i", "q", [f"c{i}" for i in range(9)], 0)
    out = mcq_to_instruction("m", "i", "q", [f"c{i}" for i in range(8)], 7)
    assert out.response.startswith(ARABIC_CHOICE_LABELS[7])


def test_mcq_answer_index_bounds():
    with pytest.raises(RecordValidationError):
        mcq_to_instruction("m", "i", "q", ["a", "b"], 2)


def test_mcq_custom_alphabet_and_directive():
    out = mcq_to_instruction(
        "m", "i", "q", ["x", "y"], 1, alphabet=("A", "B", "C"),
        directive="pick one",
    )
    assert out.instruction.split("\n") == ["q", "A. x", "B. y", "pick one"]
    assert out.response == "B. y"


def test_flatten_conversation_history_grows():
    turns = [
        ("human", "من هذا؟"), ("assistant", "رجل"),
        ("human", "ماذا يفعل؟"), ("assistant", "يقرأ"),
        ("human", "أين؟"), ("assistant", "في مكتبة"),
    ]
    out = flatten_conversation(turns, "conv:0", "img.jpg")
    assert [r.id for r in out] == ["conv:0#t0", "conv:0#t1", "conv:0#t2"]
    assert out[0].history is None
    assert out[1].history == [("من هذا؟", "رجل")]
    assert out[2].history == [("من هذا؟", "رجل"), ("ماذا يفعل؟", "يقرأ")]
    assert all(r.task_type == "conversation" for r in out)
    assert out[2].instruction == "أين؟" and out[2].response == "في مكتبة"
    # history + own pair rebuilds a prefix of the dialog, for every record
    for k, rec in enumerate(out):
        pairs = list(rec.history or []) + [(rec.instruction, rec.response)]
        flat = [t for pair in pairs for t in pair]
        assert flat == [text for _, text in turns[: 2 * (k + 1)]]


def test_flatten_single_turn_dialog():
    out = flatten_conversation([("human", "سؤال"), ("assistant", "جواب")], "c", "i")
    assert len(out) == 1 and out[0].history is None


def test_flatten_conversation_rejects_bad_shapes():
    with pytest.raises(RecordValidationError):
        flatten_conversation([], "c", "i")
    with pytest.raises(RecordValidationError):
        flatten_conversation([("human", "q")], "c", "i")
    with pytest.raises(RecordValidationError):
        flatten_conversation([("assistant", "a"), ("human", "q")], "c", "i")
    with pytest.raises(RecordValidationError):
        flatten_conversation([("human", ""), ("assistant", "a")], "c", "i")


def test_template_file_roundtrip(tmp_path):
    path = tmp_path / "mine.txt"
    path.write_text("A {question}\n\nB {question}\n", encoding="utf-8")
    ts = TemplateSet.from_file(path, rng_seed=4)
    assert ts.templates == ("A {question}", "B {question}")
    assert ts.name == "mine" and ts.rng_seed == 4


def test_template_distribution_is_roughly_uniform():
    ts = TemplateSet(tuple(f"t{i} {{question}}" for i in range(4)), rng_seed=11)
    counts = Counter(ts.choose(f"id:{i}") for i in range(4000))
    for index in range(4):
        assert 800 <= counts[index] <= 1200
