"""Resume parsing, cleaning, label extraction and deterministic splits.

Input records are newline-delimited JSON objects with fields
``id, major, degree, gender, age, workExperienceList`` where each work
experience carries ``size, salary, end_date, start_date, industry,
position_name, department, type``.
"""

from __future__ import annotations

import json
import re
import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigurationError,
    LabelError,
    ResumeParseError,
    ResumeSchemaError,
)

# Sentinel for absent phrase-valued fields (department, type, major, gender).
EMPTY_PHRASE = "__empty__"

# End-date markers meaning "still employed here".
OPEN_END_MARKERS = {"今", "至今", "present", "now", ""}

TASKS = ("degree", "salary", "size", "position")

DEGREE_CLASSES = 3   # degree band in [0, 2]
SALARY_CLASSES = 7   # salary band in [0, 6]

_DATE_RE = re.compile(r"^\s*(\d{4})\s*[-/.年]\s*(\d{1,2})\s*月?\s*$")


@dataclass(frozen=True, order=True)
class YearMonth:
    year: int
    month: int

    @classmethod
    def parse(cls, text: str) -> "YearMonth":
        m = _DATE_RE.match(str(text))
        if m is None:
            raise ValueError(f"not a year-month value: {text!r}")
        year, month = int(m.group(1)), int(m.group(2))
        if not 1 <= month <= 12:
            raise ValueError(f"month out of range: {text!r}")
        return cls(year, month)

    def month_index(self) -> int:
        return self.year * 12 + (self.month - 1)

    def __str__(self) -> str:
        return f"{self.year}-{self.month}"


def months_between(start: YearMonth, end: YearMonth) -> int:
    return end.month_index() - start.month_index()


def quarter_count(start: YearMonth, end: YearMonth) -> int:
    """Whole quarters between two dates, floored at 1 for any real tenure."""
    return max(1, months_between(start, end) // 3)


@dataclass
class WorkExperience:
    position_name: str
    department: str
    industry: str
    salary: int
    size: int
    experience_type: str
    start_date: YearMonth
    end_date: YearMonth
    quarter_count: int

    def to_dict(self) -> dict:
        return {
            "position_name": self.position_name,
            "department": self.department,
            "industry": self.industry,
            "salary": self.salary,
            "size": self.size,
            "type": self.experience_type,
            "start_date": str(self.start_date),
            "end_date": str(self.end_date),
        }


@dataclass
class Resume:
    id: str
    major: str
    degree: int
    gender: str
    age: int
    experiences: list  # ordered, last entry = current job

    @property
    def last_experience(self) -> WorkExperience:
        return self.experiences[-1]

    @property
    def history(self) -> list:
        """Experiences with the current (last) one masked out."""
        return self.experiences[:-1]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "major": self.major,
            "degree": self.degree,
            "gender": self.gender,
            "age": self.age,
            "workExperienceList": [e.to_dict() for e in self.experiences],
        }


@dataclass
class TargetLabels:
    degree: int
    salary: int
    size: int
    position: int

    def for_task(self, task: str) -> int:
        return getattr(self, task)


def _phrase(value) -> str:
    if value is None:
        return EMPTY_PHRASE
    text = str(value).strip()
    return text if text else EMPTY_PHRASE


def _int_or(value, default: int) -> int:
    try:
        return int(value)
    except (TypeError, ValueError):
        return default


def parse_resume(json_text: str, reference_date: YearMonth | None = None) -> Resume:
    """Parse one serialized resume record.

    Open-ended end dates resolve against ``reference_date``; when none is
    given, the latest closed end date within the resume is used (falling
    back to the open experience's own start).
    """
    try:
        raw = json.loads(json_text)
    except json.JSONDecodeError as exc:
        byte_offset = len(json_text[: exc.pos].encode("utf-8"))
        raise ResumeParseError(exc.msg, byte_offset) from exc
    if not isinstance(raw, dict):
        raise ResumeParseError("top-level value is not an object", 0)

    if "id" not in raw or raw["id"] in (None, ""):
        raise ResumeSchemaError("id")
    raw_exps = raw.get("workExperienceList")
    if not isinstance(raw_exps, list) or not raw_exps:
        raise ResumeSchemaError("workExperienceList")

    parsed = []
    for i, entry in enumerate(raw_exps):
        if not isinstance(entry, dict):
            raise ResumeSchemaError("workExperienceList", f"experience {i} is not an object")
        try:
            start = YearMonth.parse(entry.get("start_date"))
        except ValueError as exc:
            raise ResumeSchemaError("start_date", f"experience {i}: {exc}") from exc
        raw_end = entry.get("end_date")
        end = None
        if raw_end is not None and str(raw_end).strip() not in OPEN_END_MARKERS:
            try:
                end = YearMonth.parse(raw_end)
            except ValueError as exc:
                raise ResumeSchemaError("end_date", f"experience {i}: {exc}") from exc
        parsed.append((entry, start, end))

    closed_ends = [end for _, _, end in parsed if end is not None]
    fallback = max(closed_ends) if closed_ends else max(start for _, start, _ in parsed)
    reference = reference_date if reference_date is not None else fallback

    experiences = []
    for entry, start, end in parsed:
        if end is None:
            end = max(start, reference)  # open-ended: still employed at reference time
        experiences.append(
            WorkExperience(
                position_name=_phrase(entry.get("position_name")),
                department=_phrase(entry.get("department")),
                industry=_phrase(entry.get("industry")),
                salary=_int_or(entry.get("salary"), -1),
                size=_int_or(entry.get("size"), -1),
                experience_type=_phrase(entry.get("type")),
                start_date=start,
                end_date=end,
                quarter_count=quarter_count(start, end),
            )
        )

    return Resume(
        id=str(raw["id"]),
        major=_phrase(raw.get("major")),
        degree=_int_or(raw.get("degree"), -1),
        gender=_phrase(raw.get("gender")),
        age=_int_or(raw.get("age"), 0),
        experiences=experiences,
    )


def serialize_resume(resume: Resume) -> str:
    return json.dumps(resume.to_dict(), ensure_ascii=False, sort_keys=True)


def clean_resume(resume: Resume) -> str | None:
    """Return a drop reason, or None if the resume is usable.

    Also normalizes experience order to chronological (stable by start date)
    so the last entry is the current job.
    """
    if resume.age <= 0:
        return "age"
    if not 0 <= resume.degree <= 2:
        return "degree"
    for exp in resume.experiences:
        if not 0 <= exp.salary <= 6:
            return "salary"
        if exp.size < 0:
            return "size"
        if exp.start_date > exp.end_date:
            return "dates"
    resume.experiences.sort(key=lambda e: e.start_date.month_index())
    return None


@dataclass
class ClassMap:
    """Frozen label dictionary for one prediction task."""

    labels: list  # display token per class id

    def __post_init__(self):
        self.index = {token: i for i, token in enumerate(self.labels)}

    def __len__(self) -> int:
        return len(self.labels)

    def id_of(self, token: str) -> int:
        return self.index[token]


@dataclass
class Corpus:
    resumes: list
    position_vocab: list
    class_maps: dict
    reference_date: YearMonth | None = None
    split_seed: int | None = None
    test_fraction: float | None = None
    split_assignment: dict = field(default_factory=dict)  # resume id -> "train"|"test"
    drop_stats: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.resumes)

    def n_classes(self, task: str) -> int:
        return len(self.class_maps[task])

    def subset(self, tag: str) -> "Corpus":
        kept = [r for r in self.resumes if self.split_assignment.get(r.id) == tag]
        return Corpus(
            resumes=kept,
            position_vocab=self.position_vocab,
            class_maps=self.class_maps,
            reference_date=self.reference_date,
            split_seed=self.split_seed,
            test_fraction=self.test_fraction,
            split_assignment=self.split_assignment,
            drop_stats=self.drop_stats,
        )

    def ids(self) -> list:
        return [r.id for r in self.resumes]


def build_corpus(resumes: list, top_k: int = 32,
                 reference_date: YearMonth | None = None) -> Corpus:
    """Clean resumes, freeze the top-k position vocabulary and class maps.

    Position frequency ties at the vocabulary boundary break
    lexicographically so builds are deterministic.
    """
    if top_k < 1:
        raise ConfigurationError(f"top_k must be >= 1, got {top_k}")

    kept, drops = [], Counter()
    for resume in resumes:
        reason = clean_resume(resume)
        if reason is None:
            kept.append(resume)
        else:
            drops[reason] += 1

    freq = Counter(r.last_experience.position_name for r in kept)
    if len(freq) < top_k:
        raise ConfigurationError(
            f"need {top_k} distinct last positions, found {len(freq)}"
        )
    ranked = sorted(freq.items(), key=lambda kv: (-kv[1], kv[0]))
    vocab = [token for token, _ in ranked[:top_k]]
    vocab_set = set(vocab)

    retained = [r for r in kept if r.last_experience.position_name in vocab_set]
    drops["position_vocab"] = len(kept) - len(retained)

    sizes = sorted({e.size for r in retained for e in r.experiences})
    class_maps = {
        "degree": ClassMap([str(v) for v in range(DEGREE_CLASSES)]),
        "salary": ClassMap([str(v) for v in range(SALARY_CLASSES)]),
        "size": ClassMap([str(v) for v in sizes]),
        "position": ClassMap(list(vocab)),
    }
    return Corpus(
        resumes=retained,
        position_vocab=vocab,
        class_maps=class_maps,
        reference_date=reference_date,
        drop_stats=dict(drops),
    )


def extract_targets(resume: Resume, corpus: Corpus) -> TargetLabels:
    """Targets come from the resume plus its last (current) experience."""
    last = resume.last_experience
    maps = corpus.class_maps
    if last.position_name not in maps["position"].index:
        raise LabelError(
            f"resume {resume.id}: last position {last.position_name!r} not in vocabulary"
        )
    return TargetLabels(
        degree=maps["degree"].id_of(str(resume.degree)),
        salary=maps["salary"].id_of(str(last.salary)),
        size=maps["size"].id_of(str(last.size)),
        position=maps["position"].id_of(last.position_name),
    )


def target_matrix(corpus: Corpus) -> np.ndarray:
    """Per-resume class ids, one column per task in TASKS order."""
    rows = []
    for resume in corpus.resumes:
        t = extract_targets(resume, corpus)
        rows.append([t.degree, t.salary, t.size, t.position])
    return np.asarray(rows, dtype=np.int64)


def split(corpus: Corpus, test_fraction: float, seed: int):
    """Deterministic stratified train/test split by position label.

    Returns (train, test) corpus views sharing vocabularies and class maps.
    A position class with fewer than 2 members goes entirely to train.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ConfigurationError(f"test_fraction must be in (0, 1), got {test_fraction}")

    by_class = {}
    for pos, resume in enumerate(corpus.resumes):
        label = resume.last_experience.position_name
        by_class.setdefault(corpus.class_maps["position"].id_of(label), []).append(pos)

    rng = np.random.RandomState(seed)
    assignment = {}
    for class_id in sorted(by_class):
        members = by_class[class_id]
        if len(members) < 2:
            warnings.warn(
                f"position class {class_id} has {len(members)} member(s); kept in train",
                stacklevel=2,
            )
            for pos in members:
                assignment[corpus.resumes[pos].id] = "train"
            continue
        order = rng.permutation(len(members))
        n_test = int(len(members) * test_fraction + 0.5)
        n_test = min(n_test, len(members) - 1)
        test_set = {members[i] for i in order[:n_test]}
        for pos in members:
            assignment[corpus.resumes[pos].id] = "test" if pos in test_set else "train"

    corpus.split_seed = seed
    corpus.test_fraction = test_fraction
    corpus.split_assignment = assignment
    return corpus.subset("train"), corpus.subset("test")


def corpus_to_dict(corpus: Corpus) -> dict:
    return {
        "reference_date": None if corpus.reference_date is None else str(corpus.reference_date),
        "position_vocab": list(corpus.position_vocab),
        "class_maps": {task: list(cm.labels) for task, cm in corpus.class_maps.items()},
        "split": {
            "seed": corpus.split_seed,
            "test_fraction": corpus.test_fraction,
            "assignment": dict(sorted(corpus.split_assignment.items())),
        },
        "drop_stats": dict(sorted(corpus.drop_stats.items())),
        "resumes": [r.to_dict() for r in corpus.resumes],
    }


def corpus_from_dict(data: dict) -> Corpus:
    resumes = []
    for entry in data["resumes"]:
        exps = [
            WorkExperience(
                position_name=e["position_name"],
                department=e["department"],
                industry=e["industry"],
                salary=e["salary"],
                size=e["size"],
                experience_type=e["type"],
                start_date=YearMonth.parse(e["start_date"]),
                end_date=YearMonth.parse(e["end_date"]),
                quarter_count=quarter_count(
                    YearMonth.parse(e["start_date"]), YearMonth.parse(e["end_date"])
                ),
            )
            for e in entry["workExperienceList"]
        ]
        resumes.append(
            Resume(
                id=entry["id"],
                major=entry["major"],
                degree=entry["degree"],
                gender=entry["gender"],
                age=entry["age"],
                experiences=exps,
            )
        )
    ref = data.get("reference_date")
    corpus = Corpus(
        resumes=resumes,
        position_vocab=list(data["position_vocab"]),
        class_maps={task: ClassMap(list(labels)) for task, labels in data["class_maps"].items()},
        reference_date=None if ref is None else YearMonth.parse(ref),
        drop_stats=dict(data.get("drop_stats", {})),
    )
    split_info = data.get("split") or {}
    corpus.split_seed = split_info.get("seed")
    corpus.test_fraction = split_info.get("test_fraction")
    corpus.split_assignment = dict(split_info.get("assignment", {}))
    return corpus
