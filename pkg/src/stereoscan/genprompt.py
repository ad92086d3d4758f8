"""Tutorial-generation prompts and blinded rating questionnaires."""

from __future__ import annotations

import enum
import json
import random
from dataclasses import dataclass

from .framework import VERDICT_QUESTION, catalog, framework_prompt_block
from .providers import DEFAULT_MODEL, Provider, RaterRequest, Variant

TOPICS = (
    "animation",
    "games",
    "interactive art",
    "music",
    "stories",
    "math and science",
    "extensions",
    "community and kindness",
)

_INTRO = (
    "I am teaching programming to children. We use the Scratch programming language.\n"
    "I need help to create a Scratch project the children can implement to learn basic programming concepts.\n"
)
_INCLUSIVE = (
    "The project should be gender-inclusive.\n"
    "As a guideline, researchers have identified the following criteria to check whether a project "
    "is gender-inclusive:\n"
)
_CONCEPTS = (
    "If it makes sense, the project should contain basic programming concepts like conditions and other "
    "control structures.\n"
    "Keep in mind that the children are beginners. Do not include too many programming concepts at once.\n"
)
_TOPIC = "The general topic for the project should be: '{topic}'\n"
_OUTRO = (
    "Describe a Scratch project that fulfils the requirements above.\n"
    "Focus on the project design, features, and programming concepts in your description.\n"
    "I also want to demonstrate the children an example of this project at the beginning of the class "
    "to get them motivated.\n"
    "Describe which sprite and background images I should choose for this example demonstration.\n"
    "You should not output any code. The project and example image descriptions are enough.\n"
)


@dataclass(frozen=True)
class GenerationSpec:
    topic: str
    inclusive: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.topic not in TOPICS:
            raise ValueError(f"unknown topic {self.topic!r}; expected one of {', '.join(TOPICS)}")

    @property
    def id(self) -> str:
        return f"{self.topic.replace(' ', '-')}{'-i' if self.inclusive else ''}"


def build_generation_prompt(spec: GenerationSpec) -> str:
    parts = [_INTRO]
    if spec.inclusive:
        parts.append(_INCLUSIVE + framework_prompt_block() + "\n")
    parts += [_CONCEPTS, _TOPIC.format(topic=spec.topic), _OUTRO]
    return "\n".join(parts)


def default_specs(seed: int = 0) -> list[GenerationSpec]:
    """Every topic once plain and once inclusive."""
    return [GenerationSpec(t, inclusive, seed) for t in TOPICS for inclusive in (False, True)]


@dataclass(frozen=True)
class Description:
    id: str
    topic: str
    inclusive: bool
    text: str

    def to_dict(self) -> dict:
        return {"id": self.id, "topic": self.topic, "inclusive": self.inclusive, "text": self.text}

    @classmethod
    def from_dict(cls, data: dict) -> "Description":
        return cls(str(data["id"]), str(data["topic"]), bool(data["inclusive"]), str(data["text"]))


def generate_batch(
    provider: Provider, specs: list[GenerationSpec], model_name: str = DEFAULT_MODEL
) -> list[tuple[GenerationSpec, str]]:
    """One description per GenerationSpec, a single sample per prompt."""
    out = []
    for spec in specs:
        request = RaterRequest(
            prompt_text=build_generation_prompt(spec),
            variant=Variant.WITH_FRAMEWORK if spec.inclusive else Variant.PLAIN,
            model_name=model_name,
            seed=spec.seed,
            purpose="generate",
        )
        out.append((spec, provider.complete(request)))
    return out


class Usability(str, enum.Enum):
    AS_IS = "as-is"
    SOME_MOD = "some modifications"
    LOTS_MOD = "lots of modifications"
    NOT = "not at all"


USABILITY_QUESTION = "Would you use this project in your classroom?"
LIKERT_LABELS = {
    0: "not applicable",
    1: "strongly agree",
    2: "agree",
    3: "neither agree nor disagree",
    4: "disagree",
    5: "strongly disagree",
}


def _item(position: int, text: str) -> dict:
    return {
        "item": f"Project {position}",
        "description": text,
        "criteria": [{"id": c.id, "statement": c.statement} for c in catalog()],
        "scale": {str(k): v for k, v in LIKERT_LABELS.items()},
        "verdict_question": {"question": VERDICT_QUESTION, "options": ["boys", "girls", "gender-inclusive"]},
        "usability_question": {"question": USABILITY_QUESTION, "options": [u.value for u in Usability]},
    }


def export_questionnaires(
    descriptions: list[Description], n_orders: int = 3, seed: int = 0
) -> tuple[list[dict], dict]:
    """Build ``n_orders`` differently ordered questionnaires plus a separate answer key.

    Questionnaire bodies carry only the description text; which prompt variant
    produced an item is recorded in the key alone.
    """
    if not descriptions:
        raise ValueError("no descriptions to export")
    rng = random.Random(seed)
    orders: list[list[int]] = []
    indices = list(range(len(descriptions)))
    distinct_possible = _factorial_at_least(len(indices), n_orders)
    for _ in range(n_orders):
        for _attempt in range(100):
            perm = indices[:]
            rng.shuffle(perm)
            if not distinct_possible or perm not in orders:
                break
        orders.append(perm)

    documents, key = [], {"questionnaires": []}
    for q, perm in enumerate(orders, start=1):
        items = [_item(pos, descriptions[i].text) for pos, i in enumerate(perm, start=1)]
        documents.append({"questionnaire": q, "items": items})
        key["questionnaires"].append(
            {
                "questionnaire": q,
                "items": [
                    {"item": f"Project {pos}", "id": descriptions[i].id, "inclusive": descriptions[i].inclusive}
                    for pos, i in enumerate(perm, start=1)
                ],
            }
        )
    return documents, key


def _factorial_at_least(n: int, k: int) -> bool:
    total = 1
    for i in range(2, n + 1):
        total *= i
        if total >= k:
            return True
    return total >= k


def questionnaire_markdown(document: dict) -> str:
    lines = [f"# Questionnaire {document['questionnaire']}", ""]
    for item in document["items"]:
        lines += [f"## {item['item']}", "", item["description"], ""]
        scale = ", ".join(f"{k}={v}" for k, v in item["scale"].items())
        lines += [f"Rate each statement ({scale}):", ""]
        lines += [f"- {c['id']}: {c['statement']} ( )" for c in item["criteria"]]
        lines += ["", f"**{item['verdict_question']['question']}** " + " / ".join(item["verdict_question"]["options"])]
        lines += ["", f"**{item['usability_question']['question']}** " + " / ".join(item["usability_question"]["options"]), ""]
    return "\n".join(lines)


def dumps(obj: object) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"
