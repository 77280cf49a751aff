"""Planted-signal synthetic resume corpus.

Careers follow one of 32 track archetypes (8 industry sectors x 4 role
ladders). A track fixes the junior-position ladder, department, sector,
salary progression, company-size band, major pool and degree mix, and with
probability ``signal`` the current position is the track's target position.
Learned models can therefore recover the target from the masked history,
while the most-frequent-label rule cannot get past the head of the track
distribution. A small slice of records is deliberately corrupted so the
ingest path has real parse/clean work to do.

All output is deterministic given (n, seed, signal, corrupt_rate).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

INDUSTRIES = ("software", "finance", "retail", "health",
              "media", "logistics", "education", "energy")
ROLES = ("engineer", "analyst", "manager", "specialist")

_ROLE_MAJORS = {
    "engineer": ("computer_science", "electrical_engineering", "software_engineering"),
    "analyst": ("statistics", "economics", "applied_math"),
    "manager": ("business_admin", "management", "marketing"),
    "specialist": ("communications", "psychology", "design"),
}
_ROLE_DEGREE_WEIGHTS = {
    "engineer": (0.15, 0.55, 0.30),
    "analyst": (0.20, 0.60, 0.20),
    "manager": (0.10, 0.45, 0.45),
    "specialist": (0.45, 0.40, 0.15),
}
_ROLE_SALARY_BASE = {"engineer": 3, "analyst": 2, "manager": 4, "specialist": 1}
_INDUSTRY_SALARY_BUMP = {"software": 1, "finance": 1, "retail": -1, "education": -1}
_INDUSTRY_SIZE_MODE = {
    "software": 5, "finance": 6, "retail": 3, "health": 4,
    "media": 2, "logistics": 3, "education": 1, "energy": 4,
}

# Rare last positions that fall below the top-32 vocabulary cut, so the
# corpus builder has something real to drop.
NOISE_POSITIONS = ("freelance_misc", "career_break", "family_business", "odd_jobs")
NOISE_POSITION_RATE = 0.01

_REFERENCE_INDEX = 2016 * 12 + 5  # 2016-06, the generator's "today"

GENDERS = ("male", "female")
ALL_MAJORS = tuple(m for role in ROLES for m in _ROLE_MAJORS[role])


@dataclass(frozen=True)
class Track:
    index: int
    industry: str
    role: str

    @property
    def position(self) -> str:
        return f"{self.industry}_{self.role}"

    @property
    def juniors(self) -> tuple:
        return (f"{self.industry}_{self.role}_intern",
                f"{self.industry}_{self.role}_junior")

    @property
    def department(self) -> str:
        return f"{self.industry}_{self.role}_dept"

    @property
    def sector(self) -> str:
        return f"{self.industry}_sector"

    @property
    def majors(self) -> tuple:
        return _ROLE_MAJORS[self.role]

    @property
    def degree_weights(self) -> tuple:
        return _ROLE_DEGREE_WEIGHTS[self.role]

    @property
    def salary_base(self) -> int:
        base = _ROLE_SALARY_BASE[self.role] + _INDUSTRY_SALARY_BUMP.get(self.industry, 0)
        return int(np.clip(base, 0, 5))

    @property
    def size_mode(self) -> int:
        return _INDUSTRY_SIZE_MODE[self.industry]


TRACKS = tuple(
    Track(index=i * len(ROLES) + j, industry=ind, role=role)
    for i, ind in enumerate(INDUSTRIES)
    for j, role in enumerate(ROLES)
)

# Head-heavy track mix: track i drawn proportionally to 1/(i+5).
_TRACK_WEIGHTS = 1.0 / (np.arange(len(TRACKS)) + 5.0)
_TRACK_WEIGHTS = _TRACK_WEIGHTS / _TRACK_WEIGHTS.sum()


def _ym(month_index: int) -> str:
    return f"{month_index // 12}-{month_index % 12 + 1}"


def _draw_size(rng, mode: int) -> int:
    r = rng.random_sample()
    if r < 0.70:
        return mode
    if r < 0.85:
        return int(np.clip(mode - 1, 1, 6))
    return int(np.clip(mode + 1, 1, 6))


def _draw_type(rng):
    r = rng.random_sample()
    if r < 0.78:
        return "fulltime"
    if r < 0.88:
        return "contract"
    if r < 0.95:
        return "parttime"
    return None


def _other_track(rng, track: Track) -> Track:
    pick = int(rng.randint(0, len(TRACKS) - 1))
    if pick >= track.index:
        pick += 1
    return TRACKS[pick]


def synth_resume(rng: np.random.RandomState, resume_id: str,
                 signal: float) -> dict:
    """One resume record (plain dict, ready to serialize)."""
    track = TRACKS[int(rng.choice(len(TRACKS), p=_TRACK_WEIGHTS))]
    n_prior = int(rng.choice(5, p=[0.10, 0.30, 0.30, 0.20, 0.10]))
    n_total = n_prior + 1

    durations = [int(rng.randint(4, 37)) for _ in range(n_total)]
    gaps = [int(rng.randint(0, 4)) for _ in range(n_total - 1)]
    start_index = _REFERENCE_INDEX - (sum(durations) + sum(gaps))

    experiences = []
    salary = int(np.clip(track.salary_base - 1 + rng.randint(0, 2), 0, 6))
    cursor = start_index
    for j in range(n_total):
        is_last = j == n_total - 1
        end_index = cursor + durations[j]

        if is_last:
            u = rng.random_sample()
            if u < NOISE_POSITION_RATE:
                position = NOISE_POSITIONS[int(rng.randint(0, len(NOISE_POSITIONS)))]
            elif rng.random_sample() < signal:
                position = track.position
            else:
                position = _other_track(rng, track).position
            salary = int(np.clip(salary + (rng.random_sample() < 0.5), 0, 6))
        else:
            if rng.random_sample() < 0.15:
                position = _other_track(rng, track).juniors[int(rng.randint(0, 2))]
            elif j < n_prior - 1:
                position = track.juniors[int(rng.randint(0, 2))]
            else:
                position = track.juniors[1] if rng.random_sample() < 0.6 else track.position
            if j > 0:
                salary = int(np.clip(salary + (rng.random_sample() < 0.65), 0, 6))

        sector = track.sector
        if rng.random_sample() >= 0.85:
            sector = _other_track(rng, track).sector
        department = track.department
        if rng.random_sample() >= 0.80:
            department = f"{track.industry}_shared_ops"

        exp = {
            "size": _draw_size(rng, track.size_mode),
            "salary": salary,
            "end_date": _ym(end_index),
            "start_date": _ym(cursor),
            "industry": sector,
            "position_name": position,
            "department": department,
        }
        kind = _draw_type(rng)
        if kind is not None:
            exp["type"] = kind
        if is_last and rng.random_sample() < 0.4:
            exp["end_date"] = "今"  # still employed
        elif not is_last and rng.random_sample() < 0.03:
            del exp["end_date"]  # open-ended inner entry, resolver handles it
        experiences.append(exp)
        cursor = end_index + (gaps[j] if j < len(gaps) else 0)

    career_months = _REFERENCE_INDEX - start_index
    major = track.majors[int(rng.randint(0, len(track.majors)))]
    if rng.random_sample() >= 0.82:
        major = ALL_MAJORS[int(rng.randint(0, len(ALL_MAJORS)))]

    record = {
        "id": resume_id,
        "major": major,
        "degree": int(rng.choice(3, p=track.degree_weights)),
        "gender": GENDERS[int(rng.random_sample() < 0.45)],
        "age": 22 + career_months // 12 + int(rng.randint(0, 4)),
        "workExperienceList": experiences,
    }
    if rng.random_sample() < 0.02:
        record["major"] = None
    return record


_CORRUPTION_KINDS = 8


def _corrupt(record: dict, line: str, kind: int):
    """Break one record so ingest has to parse-fail or clean-drop it."""
    if kind == 0:
        return line[: max(1, int(len(line) * 0.6))]  # unterminated JSON
    if kind == 1:
        record = dict(record, workExperienceList=[])
    elif kind == 2:
        record = dict(record, age=-3)
    elif kind == 3:
        record = dict(record)
        record["workExperienceList"] = [dict(record["workExperienceList"][0], salary=9)] + record["workExperienceList"][1:]
    elif kind == 4:
        record = dict(record, degree=7)
    elif kind == 5:
        first = dict(record["workExperienceList"][0])
        first["start_date"], first["end_date"] = "2019-5", "2012-1"
        record = dict(record)
        record["workExperienceList"] = [first] + record["workExperienceList"][1:]
    elif kind == 6:
        record = dict(record)
        record["workExperienceList"] = [dict(record["workExperienceList"][0], size=-2)] + record["workExperienceList"][1:]
    elif kind == 7:
        record = dict(record)
        record["workExperienceList"] = [dict(record["workExperienceList"][0], start_date="sometime")] + record["workExperienceList"][1:]
    return json.dumps(record, ensure_ascii=False)


def generate_records(n: int, seed: int = 1, signal: float = 0.85,
                     corrupt_rate: float = 0.015):
    """The corpus as JSONL lines plus generation stats."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0.0 <= signal <= 1.0:
        raise ValueError(f"signal must be in [0, 1], got {signal}")
    rng = np.random.RandomState(seed)
    lines = []
    corrupted = 0
    for i in range(n):
        resume_id = hashlib.md5(f"synth:{seed}:{i}".encode()).hexdigest()
        record = synth_resume(rng, resume_id, signal)
        line = json.dumps(record, ensure_ascii=False)
        if rng.random_sample() < corrupt_rate:
            line = _corrupt(record, line, corrupted % _CORRUPTION_KINDS)
            corrupted += 1
        lines.append(line)
    stats = {"records": n, "corrupted": corrupted, "seed": seed,
             "signal": signal, "corrupt_rate": corrupt_rate}
    return lines, stats


def write_corpus_file(path: str, n: int, seed: int = 1, signal: float = 0.85,
                      corrupt_rate: float = 0.015) -> dict:
    lines, stats = generate_records(n, seed, signal, corrupt_rate)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")
    return stats
