"""Multimodal rating prompts, response parsing and repeated model ratings."""

from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

from .blocks_text import emit_project
from .framework import CRITERION_IDS, Provenance, RatingSheet, Verdict, framework_prompt_block
from .providers import DEFAULT_MODEL, Provider, ProviderError, RaterRequest, Variant
from .scratch_ir import Project
from .stage_render import Rasterizer, costume_pngs, render_stage

logger = logging.getLogger(__name__)

DEFAULT_REPEATS = 5

PROMPT_INTRO = (
    "I am teaching programming to children. We use the Scratch programming language.\n"
    "I have found a Scratch project I would like to use as a starter project. "
    "The children then extend it in class with their own ideas.\n"
)
PROMPT_CODE = "Here is the Scratch program in the ScratchBlocks format as you know it from the Scratch community forums:"
PROMPT_DESCRIPTION = "It was described by the creator as: "
PROMPT_IMAGES = (
    "I also give you the images of the sprites of the project and a screenshot of the whole stage "
    "as it appears at the start of the program."
)
PROMPT_CHECKS = "Researchers have identified the following checks to identify if a program is gender-inclusive:"
PROMPT_NON_HUMAN = (
    "Keep in mind that not only humans but also non-humans, animals, or objects can be characters "
    "and have gender-specific features."
)
PROMPT_QUESTION = "Is the program targeted towards boys, girls, or is it gender-inclusive?"
PROMPT_LIKERT = (
    "Use the checks from the table above to form your answer.\n"
    "Answer each check on a five-point Likert scale ranging from 1=strongly agree to 5=strongly disagree, "
    "3 representing neither agree nor disagree, or alternatively 0=not applicable.\n"
    "Output your answers as a list of the following format:\n"
    "<Identifier>: <score>.\n"
    "Use the <Identifier> from the first column of the table above and <score> as number "
    "between 0 and 5 on the Likert scale.\n"
    'Finally, give your conclusion as "@boy@", "@girl@", or "@inclusive@".'
)
PROMPT_EXPLAIN = 'Explain your answer.\nGive your final answer as "@boy@", "@girl@", or "@inclusive@".'


def prompt_text(code: str, description: str, variant: Variant) -> str:
    parts = [
        PROMPT_INTRO,
        PROMPT_CODE,
        code.rstrip("\n"),
        PROMPT_DESCRIPTION + description,
        PROMPT_IMAGES,
        "",
    ]
    if variant is Variant.WITH_FRAMEWORK:
        parts += [
            PROMPT_CHECKS,
            framework_prompt_block(),
            "",
            PROMPT_NON_HUMAN,
            "Answer the following question:",
            PROMPT_QUESTION,
            "",
            PROMPT_LIKERT,
        ]
    else:
        parts += [PROMPT_QUESTION, PROMPT_NON_HUMAN, PROMPT_EXPLAIN]
    return "\n".join(parts) + "\n"


def build_prompt(
    project: Project,
    description: str,
    variant: Variant,
    rasterizer: Rasterizer | None = None,
    model_name: str = DEFAULT_MODEL,
    temperature: float | None = None,
) -> RaterRequest:
    """Assemble the rating request: scratchblocks text plus costume and stage images."""
    variant = Variant(variant)
    images = [
        (f"sprite {sprite.name} costume {sprite.costume.name}", png)
        for sprite, png in costume_pngs(project, rasterizer)
    ]
    images.append(("stage", render_stage(project, rasterizer).png_bytes()))
    return RaterRequest(
        prompt_text=prompt_text(emit_project(project), description, variant),
        variant=variant,
        images=tuple(images),
        model_name=model_name,
        temperature=temperature,
    )


# ---------------------------------------------------------------------------
# response parsing
# ---------------------------------------------------------------------------


class ResponseParseError(ValueError):
    pass


class NoVerdict(ResponseParseError):
    def __init__(self):
        super().__init__("response contains no @boy@/@girl@/@inclusive@ verdict")


class MissingScores(ResponseParseError):
    def __init__(self, missing: list[str]):
        super().__init__(f"response lacks scores for {', '.join(missing)}")
        self.missing = missing


class DuplicateScore(ResponseParseError):
    def __init__(self, criterion_id: str):
        super().__init__(f"conflicting scores for {criterion_id}")
        self.criterion_id = criterion_id


# Optional list bullets / bold markers are tolerated around an otherwise strict line.
_SCORE_LINE = re.compile(
    r"^\s*(?:[-*•]\s+|\d{1,2}[.)]\s+)?(?:\*\*)?((?:CH|CO|IN|PR)\d{2})(?:\*\*)?\s*:\s*(?:\*\*)?([0-5])(?:\*\*)?\s*$",
    re.IGNORECASE,
)
_VERDICT = re.compile(r"@(boy|girl|inclusive)@", re.IGNORECASE)


@dataclass(frozen=True)
class RaterResponse:
    raw_text: str
    verdict: Verdict
    scores: dict[str, int] | None = None
    repetition_index: int = 0


def parse_response(raw: str, variant: Variant, repetition_index: int = 0) -> RaterResponse:
    """Extract criterion scores and the final verdict from a model answer.

    Only :class:`ResponseParseError` subclasses are raised.
    """
    variant = Variant(variant)
    if not isinstance(raw, str):
        raise ResponseParseError(f"expected text, got {type(raw).__name__}")
    verdicts = _VERDICT.findall(raw)
    if not verdicts:
        raise NoVerdict()
    verdict = Verdict(verdicts[-1].lower())
    if variant is Variant.PLAIN:
        return RaterResponse(raw, verdict, None, repetition_index)

    scores: dict[str, int] = {}
    for line in raw.splitlines():
        m = _SCORE_LINE.match(line)
        if not m:
            continue
        cid, value = m.group(1).upper(), int(m.group(2))
        if cid not in CRITERION_IDS:
            continue
        if cid in scores and scores[cid] != value:
            raise DuplicateScore(cid)
        scores[cid] = value
    missing = [c for c in CRITERION_IDS if c not in scores]
    if missing:
        raise MissingScores(missing)
    return RaterResponse(raw, verdict, {c: scores[c] for c in CRITERION_IDS}, repetition_index)


def render_response(sheet: RatingSheet) -> str:
    """Write a sheet in the response grammar (inverse of :func:`parse_response`)."""
    lines = [f"{cid}: {sheet.scores[cid]}" for cid in CRITERION_IDS] if sheet.scores else []
    lines.append(sheet.verdict.token)
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# repetitions
# ---------------------------------------------------------------------------


class ParseFailedAfterRetry(ResponseParseError):
    def __init__(self, repetition: int, cause: ResponseParseError):
        super().__init__(f"repetition {repetition}: {cause}")
        self.repetition = repetition
        self.cause = cause


@dataclass
class RatingRun:
    """Outcome of rating one project ``repeats`` times with one prompt variant."""

    project_id: str
    variant: Variant
    sheets: list[RatingSheet] = field(default_factory=list)
    errors: list[ParseFailedAfterRetry] = field(default_factory=list)
    retries: int = 0
    requests: int = 0
    responses: list[RaterResponse] = field(default_factory=list)


def planned_requests(n_projects: int, variants: int = 2, repeats: int = DEFAULT_REPEATS) -> int:
    return n_projects * variants * repeats


def rate_project(
    project: Project,
    description: str,
    variant: Variant,
    provider: Provider,
    repeats: int = DEFAULT_REPEATS,
    project_id: str | None = None,
    concurrency: int = 4,
    rasterizer: Rasterizer | None = None,
    model_name: str = DEFAULT_MODEL,
    temperature: float | None = None,
) -> RatingRun:
    """Ask the provider ``repeats`` times and treat each answer as a separate rater."""
    variant = Variant(variant)
    project_id = project_id or project.source_path or "project"
    request = build_prompt(project, description, variant, rasterizer, model_name, temperature)
    run = RatingRun(project_id, variant)

    def one(index: int) -> tuple[int, RaterResponse | ParseFailedAfterRetry, int]:
        attempts = 0
        last: ResponseParseError | None = None
        numbered = replace(request, repetition=index)
        for _ in range(2):
            attempts += 1
            text = provider.complete(numbered)
            try:
                return index, parse_response(text, variant, index), attempts
            except ResponseParseError as exc:
                last = exc
                logger.info("%s repetition %d: unparseable response (%s)", project_id, index, exc)
        return index, ParseFailedAfterRetry(index, last), attempts  # type: ignore[arg-type]

    workers = max(1, min(concurrency, repeats))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(one, range(repeats)))

    for index, outcome, attempts in sorted(results, key=lambda r: r[0]):
        run.requests += attempts
        run.retries += attempts - 1
        if isinstance(outcome, ParseFailedAfterRetry):
            run.errors.append(outcome)
            continue
        run.responses.append(outcome)
        run.sheets.append(
            RatingSheet(
                rater_id=f"model#{index}",
                project_id=project_id,
                verdict=outcome.verdict,
                scores=outcome.scores,
                provenance=Provenance.MODEL,
                extra={"variant": variant.value, "repetition": index},
            )
        )
    return run


__all__ = [
    "DuplicateScore",
    "MissingScores",
    "NoVerdict",
    "ParseFailedAfterRetry",
    "ProviderError",
    "RaterResponse",
    "RatingRun",
    "ResponseParseError",
    "build_prompt",
    "parse_response",
    "planned_requests",
    "prompt_text",
    "rate_project",
    "render_response",
]
