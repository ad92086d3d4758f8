"""Gender bias evaluation framework: criteria catalog, Likert scale, rating sheets."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Mapping


class Category(str, enum.Enum):
    CHARACTERS = "Characters"
    CONTENT = "Content"
    INSTRUCTIONS = "Instructions"
    PROGRAMMING_CONCEPTS = "ProgrammingConcepts"


class Source(str, enum.Enum):
    BHARGAVA = "Bhargava"
    HEEMSKERK = "Heemskerk"
    NEW = "New"


class Verdict(str, enum.Enum):
    BOY = "boy"
    GIRL = "girl"
    INCLUSIVE = "inclusive"

    @property
    def token(self) -> str:
        """Response-grammar marker, e.g. ``@girl@``."""
        return f"@{self.value}@"


class Provenance(str, enum.Enum):
    HUMAN = "human"
    MODEL = "model"


@dataclass(frozen=True)
class Criterion:
    id: str
    category: Category
    statement: str
    source: Source


_C, _T, _I, _P = (
    Category.CHARACTERS,
    Category.CONTENT,
    Category.INSTRUCTIONS,
    Category.PROGRAMMING_CONCEPTS,
)
_B, _H, _N = Source.BHARGAVA, Source.HEEMSKERK, Source.NEW

# fmt: off
_CATALOG: tuple[Criterion, ...] = (
    Criterion("CH01", _C, "Female and male characters are equally represented.", _B),
    Criterion("CH02", _C, "Active and passive behaviors are equally distributed between female and male characters.", _B),
    Criterion("CH03", _C, "Female characters are presented in problem solving & leadership roles.", _B),
    Criterion("CH04", _C, "The characters are not stereotyped by occupational roles.", _B),
    Criterion("CH05", _C, "The types of emotional statements attributed to females and males are not stereotypic.", _B),
    Criterion("CO01", _T, "The project is free of sexist language.", _B),
    Criterion("CO02", _T, "The extent and frequency of aggressive and/or destructive behaviors is limited or non-existent.", _B),
    Criterion("CO03", _T, "Content and overall style of the project appeal to girls & boys.", _B),
    Criterion("CO04", _T, "The preferences of different groups are taken into account in the visual interface (e.g. bright vs dark colours).", _H),
    Criterion("CO05", _T, "Non-human objects are not assumed to be male.", _B),
    Criterion("CO06", _T, "The number of elements of competitiveness vs. cooperation is balanced.", _B),
    Criterion("CO07", _T, "Themes and scenarios reflect diverse interests beyond stereotypical gender preferences.", _N),
    Criterion("IN01", _I, "The project addresses different kinds of skills (e.g. writing, drawing).", _H),
    Criterion("IN02", _I, "The project is made in such a flexible manner that students can alter parts to their preference (e.g. own sprites).", _H),
    Criterion("PR01", _P, "Basic programming concepts (i.e., loops, conditionals) are used.", _N),
    Criterion("PR02", _P, "The project complexity is appropriate for beginners.", _N),
    Criterion("PR03", _P, "The project presents programming as having diverse applications beyond games and competition.", _N),
    Criterion("PR04", _P, "Creative and artistic programming features are balanced with logical or computational elements.", _N),
)
# fmt: on

CRITERION_IDS: tuple[str, ...] = tuple(c.id for c in _CATALOG)
_BY_ID = {c.id: c for c in _CATALOG}

VERDICT_QUESTION = "Is the program targeted towards boys, girls, or is it gender-inclusive?"

NOT_APPLICABLE = 0
LIKERT_VALUES = frozenset(range(6))


def catalog() -> tuple[Criterion, ...]:
    """The 18 scored criteria in table order (CH, CO, IN, PR)."""
    return _CATALOG


def criterion(criterion_id: str) -> Criterion:
    try:
        return _BY_ID[criterion_id]
    except KeyError:
        raise UnknownCriterion(criterion_id) from None


def framework_prompt_block() -> str:
    """Two-column ``Identifier  Description`` table, one row per criterion."""
    width = len("Identifier")
    lines = [f"{'Identifier':<{width}}  Description"]
    lines += [f"{c.id:<{width}}  {c.statement}" for c in _CATALOG]
    return "\n".join(lines)


def catalog_json() -> str:
    rows = [
        {"id": c.id, "category": c.category.value, "statement": c.statement, "source": c.source.value}
        for c in _CATALOG
    ]
    return json.dumps({"criteria": rows, "verdict": {"id": "VE01", "question": VERDICT_QUESTION}}, indent=2)


class SheetError(ValueError):
    pass


class MissingCriterion(SheetError):
    def __init__(self, criterion_id: str):
        super().__init__(f"missing score for criterion {criterion_id}")
        self.criterion_id = criterion_id


class InvalidScore(SheetError):
    def __init__(self, criterion_id: str, value: object):
        super().__init__(f"invalid Likert score {value!r} for {criterion_id}")
        self.criterion_id = criterion_id
        self.value = value


class UnknownCriterion(SheetError):
    def __init__(self, criterion_id: str):
        super().__init__(f"unknown criterion {criterion_id!r}")
        self.criterion_id = criterion_id


@dataclass(frozen=True)
class RatingSheet:
    """One rater's judgement of one project.

    ``scores`` is ``None`` for verdict-only sheets (the plain prompt variant
    asks for a verdict but no per-criterion scores).
    """

    rater_id: str
    project_id: str
    verdict: Verdict
    scores: Mapping[str, int] | None = None
    provenance: Provenance = Provenance.HUMAN
    extra: Mapping[str, object] = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        out = {
            "rater_id": self.rater_id,
            "project_id": self.project_id,
            "provenance": self.provenance.value,
            "verdict": self.verdict.value,
            "scores": None if self.scores is None else {k: self.scores[k] for k in CRITERION_IDS if k in self.scores},
        }
        if self.extra:
            out["extra"] = dict(self.extra)
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "RatingSheet":
        scores = data.get("scores")
        return cls(
            rater_id=str(data["rater_id"]),
            project_id=str(data["project_id"]),
            verdict=Verdict(str(data["verdict"]).lower()),
            scores=None if scores is None else {str(k): v for k, v in scores.items()},
            provenance=Provenance(str(data.get("provenance", "human")).lower()),
            extra=dict(data.get("extra") or {}),
        )


def validate_sheet(sheet: RatingSheet) -> RatingSheet:
    """Return ``sheet`` if it carries exactly the 18 criteria with valid scores."""
    if not isinstance(sheet.verdict, Verdict):
        raise SheetError(f"invalid verdict {sheet.verdict!r}")
    if sheet.scores is None:
        return sheet
    for key in sheet.scores:
        if key not in _BY_ID:
            raise UnknownCriterion(key)
    for cid in CRITERION_IDS:
        if cid not in sheet.scores:
            raise MissingCriterion(cid)
        value = sheet.scores[cid]
        if isinstance(value, bool) or not isinstance(value, int) or value not in LIKERT_VALUES:
            raise InvalidScore(cid, value)
    return sheet
