"""Deterministic stereotype-smell detectors.

Each detector maps observable project features onto one framework criterion.
Only CH01, CO02, CO04, CO06, PR01 and PR04 are covered; every other criterion
needs semantic judgement and is left to human or model raters.
"""

from __future__ import annotations

import enum
import hashlib
import json
import re
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from . import opcodes
from .framework import CRITERION_IDS
from .scratch_ir import Block, BlockRef, Literal, Project, Target, iter_scripts, walk_script
from .stage_render import Rasterizer, costume_image

HEURISTIC_CRITERIA = ("CH01", "CO02", "CO04", "CO06", "PR01", "PR04")
RATER_ONLY_CRITERIA = tuple(c for c in CRITERION_IDS if c not in HEURISTIC_CRITERIA)

SPEECH_OPCODES = {
    "looks_say": "MESSAGE",
    "looks_sayforsecs": "MESSAGE",
    "looks_think": "MESSAGE",
    "looks_thinkforsecs": "MESSAGE",
    "sensing_askandwait": "QUESTION",
    "text2speech_speakAndWait": "WORDS",
}


class Severity(enum.IntEnum):
    LOW = 1
    MEDIUM = 2
    HIGH = 3

    @property
    def label(self) -> str:
        return self.name.capitalize()


@dataclass(frozen=True)
class Evidence:
    target_name: str
    ref: str | None
    excerpt: str


@dataclass(frozen=True)
class StereotypeSmell:
    criterion_id: str
    severity: Severity
    evidence: tuple[Evidence, ...]
    detector: str

    def __post_init__(self):
        if self.criterion_id not in CRITERION_IDS:
            raise ValueError(f"unknown criterion {self.criterion_id}")
        if not self.evidence:
            raise ValueError("a smell needs at least one piece of evidence")

    def to_dict(self) -> dict:
        return {
            "criterion_id": self.criterion_id,
            "severity": self.severity.label,
            "detector": self.detector,
            "evidence": [asdict(e) for e in self.evidence],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "StereotypeSmell":
        return cls(
            criterion_id=data["criterion_id"],
            severity=Severity[str(data["severity"]).upper()],
            detector=data["detector"],
            evidence=tuple(Evidence(**e) for e in data["evidence"]),
        )


def toml_loads(text: str) -> dict:
    try:
        import tomllib
    except ModuleNotFoundError:  # Python 3.10
        import tomli as tomllib
    return tomllib.loads(text)


# ---------------------------------------------------------------------------
# configuration and lexicons
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CO04Config:
    pink_hue_min: float = 300.0
    pink_hue_max: float = 345.0
    pink_saturation: float = 0.3
    pink_fraction: float = 0.35
    dark_value: float = 0.25
    dark_fraction: float = 0.5
    alpha_threshold: int = 128


@dataclass(frozen=True)
class CO02Config:
    low_max: int = 2
    medium_max: int = 5


@dataclass(frozen=True)
class CO06Config:
    high_min_markers: int = 2


@dataclass(frozen=True)
class DetectorConfig:
    co02: CO02Config = field(default_factory=CO02Config)
    co04: CO04Config = field(default_factory=CO04Config)
    co06: CO06Config = field(default_factory=CO06Config)
    lexicon_dir: str | None = None

    @classmethod
    def from_mapping(cls, data: Mapping) -> "DetectorConfig":
        sections = {"co02": CO02Config, "co04": CO04Config, "co06": CO06Config}
        kwargs: dict = {}
        for key, value in data.items():
            if key in sections:
                allowed = {f.name for f in fields(sections[key])}
                unknown = set(value) - allowed
                if unknown:
                    raise ValueError(f"unknown keys in [{key}]: {sorted(unknown)}")
                kwargs[key] = sections[key](**value)
            elif key == "lexicon_dir":
                kwargs[key] = str(value)
            else:
                raise ValueError(f"unknown detector config section {key!r}")
        return cls(**kwargs)

    @classmethod
    def from_toml(cls, text: str) -> "DetectorConfig":
        return cls.from_mapping(toml_loads(text))

    @classmethod
    def load(cls, path: str | Path) -> "DetectorConfig":
        return cls.from_toml(Path(path).read_text(encoding="utf-8"))

    def digest(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()


def _read_terms(text: str) -> list[str]:
    out = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip().lower()
        if line:
            out.append(line)
    return out


def _lexicon_text(name: str, directory: str | None) -> str:
    if directory is not None:
        path = Path(directory) / name
        if path.exists():
            return path.read_text(encoding="utf-8")
    return resources.files("stereoscan.data").joinpath(name).read_text(encoding="utf-8")


@dataclass(frozen=True)
class NameLexicon:
    female: frozenset[str]
    male: frozenset[str]

    @classmethod
    def load(cls, directory: str | None = None) -> "NameLexicon":
        def terms(*names: str) -> frozenset[str]:
            return frozenset(t for n in names for t in _read_terms(_lexicon_text(n, directory)))

        return cls(
            female=terms("female_names.txt", "female_nouns.txt"),
            male=terms("male_names.txt", "male_nouns.txt"),
        )


@dataclass(frozen=True)
class TextLexicons:
    violence: frozenset[str]
    competition_variables: frozenset[str]
    competition_phrases: tuple[str, ...]

    @classmethod
    def load(cls, directory: str | None = None) -> "TextLexicons":
        comp = _read_terms(_lexicon_text("competition.txt", directory))
        return cls(
            violence=frozenset(_read_terms(_lexicon_text("violence.txt", directory))),
            competition_variables=frozenset(t[4:].strip() for t in comp if t.startswith("var:")),
            competition_phrases=tuple(t[7:].strip() for t in comp if t.startswith("phrase:")),
        )


_WORD = re.compile(r"[A-Z]+(?![a-z])|[A-Z]?[a-z]+")


def tokenize(text: str) -> list[str]:
    """Lower-case word tokens, splitting camelCase and punctuation."""
    return [t.lower() for t in _WORD.findall(text)]


def _stems(token: str) -> set[str]:
    out = {token}
    for suffix in ("s", "es", "ed", "ing", "er", "ers"):
        if token.endswith(suffix) and len(token) - len(suffix) >= 3:
            stem = token[: -len(suffix)]
            out.add(stem)
            if len(stem) > 3 and stem[-1] == stem[-2]:
                out.add(stem[:-1])  # shooting -> shoot, but hitting -> hit
            out.add(stem + "e")
    return out


def _in_lexicon(token: str, lexicon: frozenset[str]) -> bool:
    return not _stems(token).isdisjoint(lexicon)


# ---------------------------------------------------------------------------
# programming concepts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConceptProfile:
    loops: int = 0
    conditionals: int = 0
    variables: int = 0
    lists: int = 0
    custom_blocks: int = 0
    broadcasts: int = 0
    events: int = 0
    sequence_only_scripts: int = 0
    total_blocks: int = 0
    scripts: int = 0
    creative_blocks: int = 0
    logic_blocks: int = 0


_CREATIVE_PREFIXES = ("looks_", "sound_", "pen_", "music_", "text2speech_")


def _is_logic(block: Block) -> bool:
    if block.opcode.startswith("operator_"):
        return True
    return block.opcode.startswith("control_") and block.opcode not in opcodes.WAIT_OPCODES and block.shape != opcodes.HAT


def concept_profile(project: Project) -> ConceptProfile:
    counts = dict.fromkeys((f.name for f in fields(ConceptProfile)), 0)
    for target in project.targets:
        counts["variables"] += len(target.variables)
        counts["lists"] += len(target.lists)
        for root in iter_scripts(target):
            counts["scripts"] += 1
            sequence_only = True
            for b in walk_script(target, root):
                if b.shadow:
                    continue
                counts["total_blocks"] += 1
                op = b.opcode
                counts["loops"] += op in opcodes.LOOP_OPCODES
                counts["conditionals"] += op in opcodes.CONDITIONAL_OPCODES
                counts["custom_blocks"] += op == "procedures_definition"
                counts["broadcasts"] += op in ("event_broadcast", "event_broadcastandwait")
                counts["events"] += b.shape == opcodes.HAT and op != "procedures_definition"
                counts["creative_blocks"] += op.startswith(_CREATIVE_PREFIXES)
                if _is_logic(b):
                    counts["logic_blocks"] += 1
                    if op.startswith("control_"):
                        sequence_only = False
            counts["sequence_only_scripts"] += sequence_only
    return ConceptProfile(**counts)


def _profile_evidence(profile: ConceptProfile) -> Evidence:
    return Evidence(
        "(project)",
        None,
        f"loops={profile.loops} conditionals={profile.conditionals} "
        f"sequence_only_scripts={profile.sequence_only_scripts}/{profile.scripts} total_blocks={profile.total_blocks}",
    )


def detect_concept_smells(profile: ConceptProfile) -> list[StereotypeSmell]:
    smells = []
    control = profile.loops + profile.conditionals
    if profile.total_blocks > 0 and control == 0:
        smells.append(StereotypeSmell("PR01", Severity.HIGH, (_profile_evidence(profile),), "concepts.no_control"))
    elif control == 1:
        smells.append(StereotypeSmell("PR01", Severity.MEDIUM, (_profile_evidence(profile),), "concepts.single_control"))
    if profile.creative_blocks > 0 and profile.logic_blocks == 0:
        ev = Evidence(
            "(project)", None, f"creative_blocks={profile.creative_blocks} control_and_operator_blocks=0"
        )
        smells.append(StereotypeSmell("PR04", Severity.MEDIUM, (ev,), "concepts.creative_only"))
    return smells


# ---------------------------------------------------------------------------
# characters
# ---------------------------------------------------------------------------


def _coding(tokens: Iterable[str], lexicon: NameLexicon) -> tuple[set[str], set[str]]:
    female, male = set(), set()
    for t in tokens:
        if t in lexicon.female or (len(t) > 3 and _in_lexicon(t, lexicon.female)):
            female.add(t)
        if t in lexicon.male or (len(t) > 3 and _in_lexicon(t, lexicon.male)):
            male.add(t)
    return female, male


def detect_character_smells(project: Project, lexicon: NameLexicon | None = None) -> list[StereotypeSmell]:
    lexicon = lexicon or NameLexicon.load()
    coded: list[tuple[str, Evidence]] = []
    for sprite in project.sprites:
        tokens = tokenize(sprite.name)
        ref = None
        f, m = _coding(tokens, lexicon)
        if not f and not m:
            # fall back to costume names, e.g. an unnamed "Sprite1" wearing "ballerina-a"
            for costume in sprite.costumes:
                f, m = _coding(tokenize(costume.name), lexicon)
                if f or m:
                    ref = costume.name
                    break
        if f and m:
            coded.append(("mixed", Evidence(sprite.name, ref, sprite.name)))
        elif f or m:
            coded.append(("female" if f else "male", Evidence(sprite.name, ref, ", ".join(sorted(f or m)))))
    codings = {c for c, _ in coded}
    if len(codings) == 1 and "mixed" not in codings:
        (which,) = codings
        return [
            StereotypeSmell("CH01", Severity.HIGH, tuple(ev for _, ev in coded), f"characters.all_{which}")
        ]
    return []


# ---------------------------------------------------------------------------
# colours
# ---------------------------------------------------------------------------


def hsv_arrays(rgba: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Hue in degrees, saturation and value in [0, 1] for an ``(..., 3)`` or ``(..., 4)`` uint8 array."""
    rgb = rgba[..., :3].astype(np.float64) / 255.0
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = rgb.max(axis=-1)
    c = v - rgb.min(axis=-1)
    s = np.divide(c, v, out=np.zeros_like(v), where=v > 0)
    safe = np.where(c > 0, c, 1.0)
    h = np.select(
        [c == 0, v == r, v == g],
        [0.0, ((g - b) / safe) % 6.0, (b - r) / safe + 2.0],
        (r - g) / safe + 4.0,
    )
    return h * 60.0, s, v


def detect_color_smells(
    project: Project, config: CO04Config | None = None, rasterizer: Rasterizer | None = None
) -> list[StereotypeSmell]:
    config = config or CO04Config()
    per_costume = []
    for target in project.targets:
        costume = target.costume
        img, placeholder = costume_image(project, costume, rasterizer)
        if placeholder:
            continue
        arr = np.asarray(img.convert("RGBA"))
        opaque = arr[..., 3] >= config.alpha_threshold
        n = int(opaque.sum())
        if n == 0:
            continue
        # classify each distinct colour once, weighted by how many pixels use it
        rgb = arr[opaque][:, :3].astype(np.uint32)
        packed, counts = np.unique((rgb[:, 0] << 16) | (rgb[:, 1] << 8) | rgb[:, 2], return_counts=True)
        colors = np.stack([(packed >> 16) & 255, (packed >> 8) & 255, packed & 255], axis=-1).astype(np.uint8)
        h, s, v = hsv_arrays(colors)
        is_pink = (h >= config.pink_hue_min) & (h <= config.pink_hue_max) & (s > config.pink_saturation)
        pink = int(counts[is_pink].sum())
        dark = int(counts[v < config.dark_value].sum())
        per_costume.append((target.name, costume.name, n, pink, dark))
    total = sum(p[2] for p in per_costume)
    if total == 0:
        return []
    smells = []
    for kind, idx, limit in (("pink", 3, config.pink_fraction), ("dark", 4, config.dark_fraction)):
        fraction = sum(p[idx] for p in per_costume) / total
        if fraction > limit:
            ranked = sorted(per_costume, key=lambda p: (-p[idx] / p[2], p[0], p[1]))
            evidence = [
                Evidence(p[0], p[1], f"{kind} fraction {p[idx] / p[2]:.2f} of {p[2]} px")
                for p in ranked
                if p[idx] > 0
            ][:3]
            summary = Evidence("(project)", None, f"{kind} fraction {fraction:.3f} > {limit}")
            smells.append(StereotypeSmell("CO04", Severity.MEDIUM, (summary, *evidence), f"colors.{kind}"))
    return smells


# ---------------------------------------------------------------------------
# text
# ---------------------------------------------------------------------------


def _literal_of(target: Target, block: Block, name: str) -> str | None:
    inp = block.inputs.get(name)
    if inp is None:
        return None
    value = inp.value if inp.value is not None else inp.shadow
    if isinstance(value, Literal):
        return value.value
    if isinstance(value, BlockRef):
        inner = target.blocks[value.id]
        if inner.opcode == "text" and "TEXT" in inner.fields:
            return str(inner.fields["TEXT"].value)
    return None


def _text_sources(project: Project, description: str) -> list[tuple[Evidence, str]]:
    """(location, text) pairs scanned by the text detectors."""
    out = []
    if description:
        out.append((Evidence("(description)", None, description), description))
    for target in project.targets:
        if not target.is_stage:
            out.append((Evidence(target.name, None, target.name), target.name))
        for table in (target.variables, target.lists):
            for vid, name in sorted(table.items()):
                out.append((Evidence(target.name, None, f"variable {name}"), name))
        for bid in sorted(target.blocks):
            block = target.blocks[bid]
            slot = SPEECH_OPCODES.get(block.opcode)
            if slot:
                text = _literal_of(target, block, slot)
                if text:
                    out.append((Evidence(target.name, bid, text), text))
    return out


def _co02_severity(hits: int, config: CO02Config) -> Severity:
    if hits <= config.low_max:
        return Severity.LOW
    if hits <= config.medium_max:
        return Severity.MEDIUM
    return Severity.HIGH


def _touch_deletes_clone(target: Target, block: Block) -> bool:
    waits_for_touch = block.opcode in ("control_wait_until", "control_repeat_until")
    if block.opcode not in opcodes.CONDITIONAL_OPCODES and not waits_for_touch:
        return False
    cond = block.inputs.get("CONDITION")
    if cond is None or not isinstance(cond.value, BlockRef):
        return False
    ops = {b.opcode for b in walk_script(target, target.blocks[cond.value.id])}
    if "sensing_touchingobject" not in ops:
        return False
    if waits_for_touch:
        chain = [block.next]
    else:
        chain = [i.value.id for n, i in block.inputs.items() if n.startswith("SUBSTACK") and isinstance(i.value, BlockRef)]
    seen = set()
    while chain:
        bid = chain.pop()
        if bid is None or bid in seen:
            continue
        seen.add(bid)
        b = target.blocks[bid]
        if b.opcode == "control_delete_this_clone":
            return True
        chain.append(b.next)
    return False


def detect_text_smells(
    project: Project,
    lexicons: TextLexicons | None = None,
    description: str = "",
    config: DetectorConfig | None = None,
) -> list[StereotypeSmell]:
    lexicons = lexicons or TextLexicons.load()
    config = config or DetectorConfig()
    sources = _text_sources(project, description)
    smells = []

    violent = []
    for where, text in sources:
        for token in tokenize(text):
            if _in_lexicon(token, lexicons.violence):
                violent.append(replace(where, excerpt=f"{token}: {where.excerpt}"))
    if violent:
        smells.append(
            StereotypeSmell("CO02", _co02_severity(len(violent), config.co02), tuple(violent), "text.violence")
        )

    markers: dict[str, list[Evidence]] = {}
    for target in project.targets:
        for table in (target.variables, target.lists):
            for vid, name in sorted(table.items()):
                squashed = re.sub(r"[^a-z]", "", name.lower())
                if squashed in lexicons.competition_variables or set(tokenize(name)) & lexicons.competition_variables:
                    markers.setdefault("variable", []).append(Evidence(target.name, None, f"variable {name}"))
        for bid in sorted(target.blocks):
            if _touch_deletes_clone(target, target.blocks[bid]):
                markers.setdefault("touch_delete", []).append(
                    Evidence(target.name, bid, "clone deleted when touching another sprite")
                )
    for where, text in sources:
        lowered = " ".join(tokenize(text))
        for phrase in lexicons.competition_phrases:
            if re.search(rf"\b{re.escape(phrase)}\b", lowered):
                markers.setdefault("phrase", []).append(replace(where, excerpt=f"{phrase}: {where.excerpt}"))
    if markers:
        severity = Severity.HIGH if len(markers) >= config.co06.high_min_markers else Severity.MEDIUM
        evidence = tuple(ev for kind in sorted(markers) for ev in markers[kind])
        smells.append(StereotypeSmell("CO06", severity, evidence, "text.competition"))
    return smells


def run_heuristics(
    project: Project,
    config: DetectorConfig | None = None,
    description: str = "",
    rasterizer: Rasterizer | None = None,
) -> list[StereotypeSmell]:
    """All detectors, sorted by criterion then descending severity."""
    config = config or DetectorConfig()
    smells = [
        *detect_concept_smells(concept_profile(project)),
        *detect_character_smells(project, NameLexicon.load(config.lexicon_dir)),
        *detect_color_smells(project, config.co04, rasterizer),
        *detect_text_smells(project, TextLexicons.load(config.lexicon_dir), description, config),
    ]
    return sorted(smells, key=lambda s: (s.criterion_id, -s.severity, s.detector))
