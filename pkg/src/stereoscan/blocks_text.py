"""Render block graphs as scratchblocks text (the Scratch forum/wiki syntax)."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from . import opcodes
from .scratch_ir import Block, BlockRef, Input, Literal, Project, Target, VarRef, iter_scripts

INDENT = "    "

_TOKEN = re.compile(r"\{(=?)([A-Za-z0-9_]+)(?::([a-z]+))?\}")
_PROC_SLOT = re.compile(r"%[sbn]")

# dropdown values stored as internal identifiers
_MENU_LABELS = {
    "_random_": "random position",
    "_mouse_": "mouse-pointer",
    "_edge_": "edge",
    "_myself_": "myself",
    "_stage_": "Stage",
}
# fields whose stored value is an upper-case constant shown in lower case
_LOWER_FIELDS = frozenset({"EFFECT", "CURRENTMENU", "WHENGREATERTHANMENU"})
_FIELD_LABELS = {
    ("EFFECT", "PAN"): "pan left/right",
    ("CURRENTMENU", "DAYOFWEEK"): "day of week",
}
_LOWER_MENU_OPCODES = frozenset({"text2speech_menu_voices"})

_DRUMS = (
    "Snare Drum", "Bass Drum", "Side Stick", "Crash Cymbal", "Open Hi-Hat", "Closed Hi-Hat", "Tambourine",
    "Hand Clap", "Claves", "Wood Block", "Cowbell", "Triangle", "Bongo", "Conga", "Cabasa", "Guiro",
    "Vibraslap", "Cuica",
)
_INSTRUMENTS = (
    "Piano", "Electric Piano", "Organ", "Guitar", "Electric Guitar", "Bass", "Pizzicato", "Cello", "Trombone",
    "Clarinet", "Saxophone", "Flute", "Wooden Flute", "Bassoon", "Choir", "Vibraphone", "Music Box",
    "Steel Drum", "Marimba", "Synth Lead", "Synth Pad",
)
_LANGUAGES = {
    "ar": "Arabic", "zh-cn": "Chinese (Mandarin)", "da": "Danish", "nl": "Dutch", "en": "English",
    "fr": "French", "de": "German", "hi": "Hindi", "is": "Icelandic", "it": "Italian", "ja": "Japanese",
    "ko": "Korean", "nb": "Norwegian", "pl": "Polish", "pt-br": "Portuguese (Brazilian)", "pt": "Portuguese",
    "ro": "Romanian", "ru": "Russian", "es": "Spanish", "es-419": "Spanish (Latin American)", "sv": "Swedish",
    "tr": "Turkish", "cy": "Welsh",
}
# numbered extension menus are shown as "(n) Name" in the editor
_MENU_TABLES = {
    "music_menu_DRUM": {str(i): f"({i}) {n}" for i, n in enumerate(_DRUMS, start=1)},
    "music_menu_INSTRUMENT": {str(i): f"({i}) {n}" for i, n in enumerate(_INSTRUMENTS, start=1)},
    "text2speech_menu_languages": _LANGUAGES,
}


@dataclass(frozen=True)
class ScriptText:
    target_name: str
    lines: tuple[str, ...]
    script_index: int

    @property
    def text(self) -> str:
        return "\n".join(self.lines)


def _escape(text: str, closer: str) -> str:
    text = text.replace("\\", "\\\\")
    for ch in ("[", "]") if closer == "]" else ("(", ")"):
        text = text.replace(ch, "\\" + ch)
    return text.replace("\n", " ")


def _round(text: str) -> str:
    return f"({_escape(text, ')')})"


def _square(text: str) -> str:
    return f"[{_escape(text, ']')}]"


class _Emitter:
    def __init__(self, target: Target):
        self.target = target
        self.blocks = target.blocks

    # ---- scripts -------------------------------------------------------

    def script(self, root: Block) -> list[str]:
        lines: list[str] = []
        self.chain(root.id, 0, lines)
        return lines

    def chain(self, block_id: str | None, depth: int, lines: list[str]) -> None:
        seen: set[str] = set()
        while block_id is not None and block_id not in seen:
            seen.add(block_id)
            block = self.blocks[block_id]
            self.statement(block, depth, lines)
            block_id = block.next

    def statement(self, block: Block, depth: int, lines: list[str]) -> None:
        pad = INDENT * depth
        if block.shape in (opcodes.REPORTER, opcodes.BOOLEAN):
            lines.append(pad + self.reporter(block))
            return
        if block.opcode == "procedures_definition":
            lines.append(pad + "define " + self.prototype(block))
            return
        if block.opcode == "procedures_call":
            lines.append(pad + self.call(block))
            return
        if not block.known:
            self.unknown_statement(block, depth, lines)
            return
        template = opcodes.SIGNATURES[block.opcode][1]
        if isinstance(template, str):
            lines.append(pad + self.fill(block, template))
            return
        for part in template:
            if part in ("{SUBSTACK}", "{SUBSTACK2}"):
                inp = block.inputs.get(part[1:-1])
                if inp is not None and isinstance(inp.value, BlockRef):
                    self.chain(inp.value.id, depth + 1, lines)
            else:
                lines.append(pad + self.fill(block, part))

    def unknown_statement(self, block: Block, depth: int, lines: list[str]) -> None:
        pad = INDENT * depth
        args = " ".join(self.slot(block, name, "") for name in sorted(block.inputs) if not name.startswith("SUBSTACK"))
        head = f"{block.opcode} {args}".rstrip()
        subs = sorted(n for n in block.inputs if n.startswith("SUBSTACK"))
        lines.append(f"{pad}{head} :: grey // unknown: {block.opcode}")
        if subs:
            for name in subs:
                ref = block.inputs[name].value
                if isinstance(ref, BlockRef):
                    self.chain(ref.id, depth + 1, lines)
            lines.append(pad + "end")

    # ---- expressions ---------------------------------------------------

    def reporter(self, block: Block) -> str:
        if block.opcode in opcodes.LITERAL_SHADOWS:
            fname, kind = opcodes.LITERAL_SHADOWS[block.opcode]
            value = str(self.field_value(block, fname))
            return _round(value) if kind == "number" else _square(value)
        if block.shadow and block.opcode not in opcodes.SIGNATURES:
            return _round(self.menu_label(block) + " v")
        if not block.known:
            return f"({block.opcode} :: grey)"
        template = opcodes.SIGNATURES[block.opcode][1]
        body = self.fill(block, template)  # type: ignore[arg-type]
        if block.shape == opcodes.BOOLEAN:
            return f"<{body}>"
        return f"({body})"

    def field_value(self, block: Block, name: str) -> object:
        f = block.fields.get(name)
        return "" if f is None or f.value is None else f.value

    def field_label(self, name: str, value: object) -> str:
        text = str(value)
        if (name, text) in _FIELD_LABELS:
            return _FIELD_LABELS[(name, text)]
        if name in _LOWER_FIELDS:
            return text.lower()
        return _MENU_LABELS.get(text, text)

    def menu_label(self, block: Block) -> str:
        if not block.fields:
            return ""
        name = sorted(block.fields)[0]
        text = str(self.field_value(block, name))
        if block.opcode in _LOWER_MENU_OPCODES:
            text = text.lower()
        table = _MENU_TABLES.get(block.opcode)
        if table is not None:
            return table.get(text, text)
        return _MENU_LABELS.get(text, text)

    def fill(self, block: Block, template: str) -> str:
        def repl(m: re.Match) -> str:
            is_field, name, hint = m.group(1), m.group(2), m.group(3) or ""
            if is_field:
                value = self.field_label(name, self.field_value(block, name))
                if hint == "plain":
                    return _escape(value, ")")
                return _square(value + " v")
            return self.slot(block, name, hint)

        return _TOKEN.sub(repl, template)

    def slot(self, block: Block, name: str, hint: str) -> str:
        inp = block.inputs.get(name)
        return self.input_text(inp, hint)

    def input_text(self, inp: Input | None, hint: str) -> str:
        value = None if inp is None else inp.value
        if value is None and inp is not None:
            value = inp.shadow
        if value is None:
            return {"b": "<>", "s": "[]", "smenu": "[ v]", "menu": "( v)"}.get(hint, "()")
        if isinstance(value, Literal):
            if value.kind == "number":
                return _round(value.value)
            if value.kind == "color":
                return f"[{value.value}]"
            return _square(value.value)
        if isinstance(value, VarRef):
            if value.kind == "variable":
                return _round(value.name)
            if value.kind == "list":
                return f"({_escape(value.name, ')')} :: list)"
            return _round(value.name + " v")
        inner = self.blocks[value.id]
        if inner.shadow and inner.opcode not in opcodes.SIGNATURES and inner.opcode not in opcodes.LITERAL_SHADOWS:
            label = self.menu_label(inner) + " v"
            return _square(label) if hint == "smenu" else _round(label)
        return self.reporter(inner)

    # ---- custom blocks -------------------------------------------------

    def prototype(self, definition: Block) -> str:
        inp = definition.inputs.get("custom_block")
        proto = None
        if inp is not None:
            ref = inp.value if isinstance(inp.value, BlockRef) else inp.shadow
            if isinstance(ref, BlockRef):
                proto = self.blocks.get(ref.id)
        if proto is None or not proto.mutation:
            return ""
        proccode = str(proto.mutation.get("proccode", ""))
        names = _json_list(proto.mutation.get("argumentnames"))
        it = iter(names)

        def repl(m: re.Match) -> str:
            arg = next(it, "")
            return f"<{_escape(arg, ')')}>" if m.group(0) == "%b" else _round(arg)

        return _PROC_SLOT.sub(repl, proccode)

    def call(self, block: Block) -> str:
        mutation = block.mutation or {}
        proccode = str(mutation.get("proccode", block.opcode))
        ids = iter(_json_list(mutation.get("argumentids")))

        def repl(m: re.Match) -> str:
            arg_id = next(ids, None)
            inp = block.inputs.get(arg_id) if arg_id is not None else None
            return self.input_text(inp, "b" if m.group(0) == "%b" else "s")

        return _PROC_SLOT.sub(repl, proccode)


def _json_list(raw: object) -> list[str]:
    if isinstance(raw, list):
        return [str(x) for x in raw]
    if isinstance(raw, str):
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            return []
        return [str(x) for x in value] if isinstance(value, list) else []
    return []


def emit_target(target: Target) -> list[ScriptText]:
    """One :class:`ScriptText` per script, in :func:`iter_scripts` order."""
    emitter = _Emitter(target)
    return [
        ScriptText(target.name, tuple(emitter.script(root)), i) for i, root in enumerate(iter_scripts(target))
    ]


def emit_project(project: Project) -> str:
    """Whole-program text: stage section first, then sprites in project order."""
    sections = []
    for target in project.targets:
        header = "== stage ==" if target.is_stage else f"== sprite: {target.name} =="
        scripts = [s.text for s in emit_target(target)]
        sections.append("\n".join([header, *(["\n\n".join(scripts)] if scripts else [])]) + "\n")
    return "\n".join(sections)
