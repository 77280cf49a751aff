"""Record parsing, cleaning, vocabulary, labels, and the split."""

import json

import numpy as np
import pytest

from jobmatch.corpus import (TASKS, YearMonth, build_corpus, clean_resume,
                             corpus_from_dict, corpus_to_dict, extract_targets,
                             months_between, parse_resume, quarter_count,
                             serialize_resume, split, target_matrix)
from jobmatch.errors import (ConfigurationError, LabelError, ResumeParseError,
                             ResumeSchemaError)

RECORD = {
    "id": "558d761",
    "major": "通信工程",
    "degree": 1,
    "gender": "男",
    "age": 31,
    "workExperienceList": [
        {"size": 2, "salary": 2, "end_date": "2014-7", "start_date": "2011-3",
         "industry": "计算机/互联网", "position_name": "测试", "department": "测试部"},
        {"size": 3, "salary": 4, "end_date": "今", "start_date": "2014-8",
         "industry": "计算机/互联网", "position_name": "软件测试", "department": "硬件测试"},
    ],
}


def make_record(**changes):
    rec = json.loads(json.dumps(RECORD))
    rec.update(changes)
    return rec


def test_year_month_parse_and_order():
    a = YearMonth.parse("2014-8")
    b = YearMonth.parse("2014-12")
    assert a.year == 2014 and a.month == 8
    assert a < b and str(a) == "2014-8"
    assert months_between(a, b) == 4
    assert quarter_count(a, b) == 1
    assert quarter_count(a, a) == 1  # floors to at least one quarter
    for bad in ("2014", "8-2014", "2014-13", "2014-0", "sometime"):
        with pytest.raises(ValueError):
            YearMonth.parse(bad)


def test_parse_resume_reads_every_field():
    r = parse_resume(json.dumps(RECORD))
    assert r.id == "558d761"
    assert r.major == "通信工程" and r.degree == 1
    assert r.gender == "男" and r.age == 31
    assert len(r.experiences) == 2
    last = r.experiences[-1]
    assert last.position_name == "软件测试"
    assert last.department == "硬件测试"
    assert last.industry == "计算机/互联网"
    assert last.salary == 4 and last.size == 3


def test_open_end_date_resolves_to_reference():
    ref = YearMonth.parse("2016-6")
    r = parse_resume(json.dumps(RECORD), reference_date=ref)
    assert r.experiences[-1].end_date == ref


def test_open_end_date_defaults_to_max_closed_date():
    rec = make_record()
    rec["workExperienceList"][1]["start_date"] = "2013-9"
    r = parse_resume(json.dumps(rec))
    assert r.experiences[-1].end_date == YearMonth.parse("2014-7")


def test_open_end_never_precedes_start():
    rec = make_record(workExperienceList=[
        {"size": 1, "salary": 1, "end_date": "今", "start_date": "2015-1",
         "industry": "a", "position_name": "b", "department": "c"},
    ])
    r = parse_resume(json.dumps(rec), reference_date=YearMonth.parse("2014-1"))
    assert r.experiences[0].end_date == YearMonth.parse("2015-1")


def test_parse_rejects_malformed_json_and_schema():
    with pytest.raises(ResumeParseError):
        parse_resume("{not json")
    with pytest.raises(ResumeSchemaError):
        parse_resume(json.dumps(make_record(workExperienceList=[])))
    with pytest.raises(ResumeSchemaError):
        parse_resume(json.dumps({"id": "x", "age": 30}))
    bad_date = make_record()
    bad_date["workExperienceList"][0]["start_date"] = "sometime"
    with pytest.raises(ResumeSchemaError):
        parse_resume(json.dumps(bad_date))


def test_serialize_round_trip():
    r = parse_resume(json.dumps(RECORD))
    again = parse_resume(serialize_resume(r))
    assert again == r


@pytest.mark.parametrize("changes,reason", [
    ({"age": -3}, "age"),
    ({"age": 0}, "age"),
    ({"degree": 7}, "degree"),
])
def test_cleaning_rejects_bad_personal_fields(changes, reason):
    r = parse_resume(json.dumps(make_record(**changes)))
    assert clean_resume(r) == reason


def test_cleaning_rejects_bad_experience_fields():
    rec = make_record()
    rec["workExperienceList"][0]["salary"] = 9
    assert clean_resume(parse_resume(json.dumps(rec))) == "salary"
    rec = make_record()
    rec["workExperienceList"][0]["size"] = -2
    assert clean_resume(parse_resume(json.dumps(rec))) == "size"
    rec = make_record()
    rec["workExperienceList"][0]["start_date"] = "2019-5"
    rec["workExperienceList"][0]["end_date"] = "2012-1"
    assert clean_resume(parse_resume(json.dumps(rec))) == "dates"


def test_cleaning_sorts_experiences_chronologically():
    rec = make_record()
    rec["workExperienceList"] = rec["workExperienceList"][::-1]
    r = parse_resume(json.dumps(rec))
    assert clean_resume(r) is None
    starts = [e.start_date.month_index() for e in r.experiences]
    assert starts == sorted(starts)
    assert r.last_experience.position_name == "软件测试"
    assert [e.position_name for e in r.history] == ["测试"]


def _toy_resumes(counts, salt=""):
    """counts: {position: how many resumes ending there}."""
    out = []
    i = 0
    for pos, n in counts.items():
        for _ in range(n):
            rec = make_record(id=f"r{salt}{i}")
            rec["workExperienceList"][-1]["position_name"] = pos
            out.append(parse_resume(json.dumps(rec)))
            i += 1
    return out


def test_build_corpus_ranks_vocabulary_by_count_then_token():
    resumes = _toy_resumes({"c": 3, "a": 2, "b": 2, "d": 1})
    corpus = build_corpus(resumes, top_k=3)
    assert corpus.position_vocab == ["c", "a", "b"]
    assert corpus.drop_stats.get("position_vocab") == 1
    assert len(corpus) == 7


def test_build_corpus_filtering_monotone_in_top_k():
    resumes = _toy_resumes({"c": 3, "a": 2, "b": 2, "d": 1})
    kept = [len(build_corpus(_toy_resumes({"c": 3, "a": 2, "b": 2, "d": 1}), top_k=k))
            for k in (2, 3, 4)]
    assert kept == sorted(kept)


def test_build_corpus_requires_enough_distinct_positions():
    with pytest.raises(ConfigurationError):
        build_corpus(_toy_resumes({"a": 5}), top_k=2)


def test_class_maps_and_targets():
    resumes = _toy_resumes({"b": 3, "a": 2})
    corpus = build_corpus(resumes, top_k=2)
    assert corpus.n_classes("degree") == 3
    assert corpus.n_classes("salary") == 7
    assert corpus.position_vocab == ["b", "a"]
    t = extract_targets(corpus.resumes[0], corpus)
    assert t.degree == 1 and t.salary == 4
    assert t.position == corpus.class_maps["position"].id_of("b")
    Y = target_matrix(corpus)
    assert Y.shape == (5, len(TASKS)) and Y.dtype == np.int64


def test_extract_targets_rejects_unknown_position():
    resumes = _toy_resumes({"b": 3, "a": 2})
    corpus = build_corpus(resumes, top_k=2)
    stray = _toy_resumes({"zz": 1}, salt="x")[0]
    clean_resume(stray)
    with pytest.raises(LabelError):
        extract_targets(stray, corpus)


def test_split_is_stratified_and_deterministic():
    resumes = _toy_resumes({"a": 30, "b": 20})
    corpus = build_corpus(resumes, top_k=2)
    train, test = split(corpus, 0.2, seed=7)
    assert len(train) == 40 and len(test) == 10
    for pos, want in (("a", 6), ("b", 4)):
        assert sum(1 for r in test.resumes
                   if r.last_experience.position_name == pos) == want
    corpus2 = build_corpus(_toy_resumes({"a": 30, "b": 20}), top_k=2)
    train2, test2 = split(corpus2, 0.2, seed=7)
    assert test.ids() == test2.ids()
    corpus3 = build_corpus(_toy_resumes({"a": 30, "b": 20}), top_k=2)
    _, test3 = split(corpus3, 0.2, seed=8)
    assert test.ids() != test3.ids()


def test_split_keeps_singleton_classes_in_train():
    resumes = _toy_resumes({"a": 9, "b": 1})
    corpus = build_corpus(resumes, top_k=2)
    with pytest.warns(UserWarning):
        train, test = split(corpus, 0.5, seed=1)
    assert all(r.last_experience.position_name == "a" for r in test.resumes)


def test_corpus_dict_round_trip():
    resumes = _toy_resumes({"a": 6, "b": 4})
    corpus = build_corpus(resumes, top_k=2)
    split(corpus, 0.25, seed=3)
    again = corpus_from_dict(corpus_to_dict(corpus))
    assert corpus_to_dict(again) == corpus_to_dict(corpus)
    assert again.subset("test").ids() == corpus.subset("test").ids()
