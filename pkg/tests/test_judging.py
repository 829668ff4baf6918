import json

import pytest

from mmcurate.cache import FileCache
from mmcurate.errors import JudgmentParseError
from mmcurate.judging import (
    FORMAT_REMINDER,
    HENNA_CRITERIA,
    JudgeItem,
    PairResult,
    build_henna_prompt,
    format_report_row,
    henna_aggregate,
    henna_report,
    llava_relative_score,
    parse_judgment,
    parse_pair_scores,
    replay_raw,
    run_judging,
)
from mmcurate.providers import ScriptedJudgeProvider

GOOD = '{"Helpfulness": 7, "Relevance": 8, "Accuracy": 6, "Level of Details": 9}'
GOOD_SCORES = {"helpfulness": 7, "relevance": 8, "accuracy": 6, "level_of_details": 9}


def test_prompt_fills_all_slots():
    prompt = build_henna_prompt("سؤال؟", "الجواب الذهبي", "جواب النموذج")
    assert "سؤال؟" in prompt
    assert "الجواب الذهبي" in prompt
    assert "جواب النموذج" in prompt
    assert "{question}" not in prompt
    # the literal JSON example must survive the fill
    assert '"Helpfulness"' in prompt


def test_parse_plain_object():
    assert parse_judgment(GOOD) == GOOD_SCORES


def test_parse_with_surrounding_prose():
    text = f"Sure, here is my assessment.\n{GOOD}\nHope that helps."
    assert parse_judgment(text) == GOOD_SCORES


def test_parse_key_variants():
    variants = [
        '{"helpfulness": 7, "relevance": 8, "accuracy": 6, "level_of_details": 9}',
        '{"HELPFULNESS": 7, "RELEVANCE": 8, "ACCURACY": 6, "LEVEL OF DETAILS": 9}',
        '{"Helpfulness": 7, "Relevance": 8, "Accuracy": 6, "level of details": 9}',
        '{" helpfulness ": 7, "relevance": 8, "accuracy": 6, "Level_Of_Details": 9}',
    ]
    for text in variants:
        assert parse_judgment(text) == GOOD_SCORES


def test_parse_skips_malformed_brace_runs():
    text = "{not json} then real: " + GOOD
    assert parse_judgment(text) == GOOD_SCORES


def test_parse_first_object_wins():
    second = '{"Helpfulness": 1, "Relevance": 1, "Accuracy": 1, "Level of Details": 1}'
    assert parse_judgment(GOOD + "\n" + second) == GOOD_SCORES


def test_parse_rejections():
    cases = [
        "no json at all",
        '{"Helpfulness": 7, "Relevance": 8, "Accuracy": 6}',  # missing
        '{"Helpfulness": 7, "Relevance": 8, "Accuracy": 6, "Level of Details": 9, "Bonus": 5}',
        '{"Helpfulness": 7.5, "Relevance": 8, "Accuracy": 6, "Level of Details": 9}',
        '{"Helpfulness": "7", "Relevance": 8, "Accuracy": 6, "Level of Details": 9}',
        '{"Helpfulness": 0, "Relevance": 8, "Accuracy": 6, "Level of Details": 9}',
        '{"Helpfulness": 11, "Relevance": 8, "Accuracy": 6, "Level of Details": 9}',
        '{"Helpfulness": true, "Relevance": 8, "Accuracy": 6, "Level of Details": 9}',
        '{"Helpfulness": 7, "helpfulness": 8, "Accuracy": 6, "Level of Details": 9}',
    ]
    for text in cases:
        with pytest.raises(JudgmentParseError):
            parse_judgment(text)


def test_parse_pair_scores():
    assert parse_pair_scores("8 10\nreview text") == (8.0, 10.0)
    assert parse_pair_scores("Scores below\n7, 9\nmore") == (7.0, 9.0)
    with pytest.raises(JudgmentParseError):
        parse_pair_scores("just words\n1 2 3")


def test_henna_aggregate_per_criterion():
    two = [
        {"helpfulness": 6, "relevance": 7, "accuracy": 6, "level_of_details": 7},
        {"helpfulness": 7, "relevance": 8, "accuracy": 5, "level_of_details": 10},
    ]
    agg = henna_aggregate(two)
    assert agg == {
        "helpfulness": 65.0,
        "relevance": 75.0,
        "accuracy": 55.0,
        "level_of_details": 85.0,
    }
    perfect = henna_aggregate([{c: 10 for c in HENNA_CRITERIA}])
    assert set(perfect.values()) == {100.0}
    assert henna_aggregate([{"a": 2}, {"a": 4}], criteria=("a",)) == {"a": 30.0}
    with pytest.raises(JudgmentParseError):
        henna_aggregate([])
    with pytest.raises(JudgmentParseError):
        henna_aggregate([{"helpfulness": 5}])  # other criteria have no scores


def test_henna_report_four_criterion_columns():
    one = {"helpfulness": 6, "relevance": 6, "accuracy": 7, "level_of_details": 6}
    two = {"helpfulness": 8, "relevance": 8, "accuracy": 8, "level_of_details": 9}
    report = henna_report({"m1": [one], "m2": [one, two]})
    assert report["criteria"] == list(HENNA_CRITERIA)
    assert [row["model"] for row in report["rows"]] == ["m1", "m2"]
    assert report["rows"][0]["scores"] == {
        "helpfulness": 60.0, "relevance": 60.0, "accuracy": 70.0, "level_of_details": 60.0,
    }
    assert report["rows"][1]["row"] == "70.00 / 70.00 / 75.00 / 75.00"
    assert "0-100" in report["note"]


def test_report_row_matches_published_layout():
    scores = {
        "helpfulness": 62.34, "relevance": 68.97,
        "accuracy": 49.68, "level_of_details": 49.83,
    }
    assert format_report_row(scores) == "62.34 / 68.97 / 49.68 / 49.83"


def test_relative_score_known_value():
    report = llava_relative_score([PairResult("i", "conv", 8.0, 10.0)])
    assert report["categories"][0]["score"] == 80.0
    assert report["overall"]["score"] == 80.0


def test_relative_score_overall_weighs_items_not_categories():
    pairs = (
        [PairResult(f"c{i}", "conv", 9.0, 10.0) for i in range(6)]
        + [PairResult(f"d{i}", "detail", 6.0, 10.0) for i in range(3)]
        + [PairResult(f"x{i}", "complex", 8.0, 10.0) for i in range(3)]
    )
    report = llava_relative_score(pairs)
    by_code = {c["code"]: c for c in report["categories"]}
    assert by_code["conv"]["score"] == 90.0
    assert by_code["detail"]["score"] == 60.0
    assert by_code["complex"]["score"] == 80.0
    # per-item mean: (6*90 + 3*60 + 3*80) / 12, not (90+60+80)/3
    assert report["overall"]["score"] == round((6 * 90 + 3 * 60 + 3 * 80) / 12, 2)
    assert report["overall"]["score"] != round((90 + 60 + 80) / 3, 2)


def test_relative_score_rejects_unknown_category_and_zero_reference():
    with pytest.raises(JudgmentParseError):
        llava_relative_score([PairResult("i", "banter", 8.0, 10.0)])
    with pytest.raises(JudgmentParseError):
        llava_relative_score([PairResult("i", "conv", 8.0, 0.0)])


def items(n):
    return [JudgeItem(id=f"q{i}", question=f"س{i}", gold_answer="ج", model_answer="م") for i in range(n)]


def test_run_judging_happy_path(tmp_path):
    provider = ScriptedJudgeProvider([GOOD, GOOD])
    result = run_judging(items(2), provider, raw_path=tmp_path / "raw.jsonl")
    assert len(result.judgments) == 2
    assert result.unjudged == []
    assert result.aggregate == {
        "helpfulness": 70.0, "relevance": 80.0, "accuracy": 60.0, "level_of_details": 90.0,
    }
    lines = (tmp_path / "raw.jsonl").read_text(encoding="utf-8").strip().split("\n")
    assert len(lines) == 2


def test_run_judging_retries_with_format_reminder():
    provider = ScriptedJudgeProvider(["I think it deserves a seven.", GOOD])
    result = run_judging(items(1), provider)
    assert len(result.judgments) == 1
    assert len(provider.calls) == 2
    assert provider.calls[1].endswith(FORMAT_REMINDER)


def test_run_judging_gives_up_after_second_failure(tmp_path):
    provider = ScriptedJudgeProvider(["nope", "still nope"])
    result = run_judging(items(1), provider, raw_path=tmp_path / "raw.jsonl")
    assert result.judgments == {}
    assert len(result.unjudged) == 1
    assert result.unjudged[0]["raw"] == "still nope"


def test_run_judging_uses_cache(tmp_path):
    cache = FileCache(tmp_path / "cache")
    provider = ScriptedJudgeProvider([GOOD])
    run_judging(items(1), provider, cache=cache)
    # identical item again: the scripted provider is exhausted, so any real
    # call would blow up as a ProviderError -> unjudged
    provider2 = ScriptedJudgeProvider([], provider_id="scripted-judge")
    result = run_judging(items(1), provider2, cache=cache)
    assert len(result.judgments) == 1
    assert provider2.calls == []


def test_replay_rejects_malformed_entries_with_line_number(tmp_path):
    raw_path = tmp_path / "raw.jsonl"
    raw_path.write_text(
        '{"id": "a", "response": "x"}\n{"id": "b"}\n', encoding="utf-8"
    )
    with pytest.raises(JudgmentParseError, match="line 2"):
        replay_raw(raw_path)


def test_replay_matches_live_run(tmp_path):
    raw_path = tmp_path / "raw.jsonl"
    responses = [
        GOOD,
        "rubbish",
        '{"Helpfulness": 3, "Relevance": 4, "Accuracy": 5, "Level of Details": 6}',
        "broken forever",
        "broken forever two",
    ]
    provider = ScriptedJudgeProvider(responses)
    live = run_judging(items(3), provider, raw_path=raw_path)
    assert len(live.judgments) == 2 and len(live.unjudged) == 1
    replayed = replay_raw(raw_path)
    assert replayed.judgments == live.judgments
    assert {u["id"] for u in replayed.unjudged} == {u["id"] for u in live.unjudged}
    assert replayed.aggregate == live.aggregate


def test_missing_template_slot_rejected(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("just a question: {question}", encoding="utf-8")
    with pytest.raises(JudgmentParseError):
        build_henna_prompt("q", "g", "m", template_path=bad)
