"""Decode Scratch 3 ``.sb3`` archives into an immutable project model."""

from __future__ import annotations

import hashlib
import io
import json
import warnings
import zipfile
from dataclasses import dataclass, field
from os import PathLike
from typing import Any, Iterable, Mapping, Union

from . import opcodes

BITMAP_FORMATS = frozenset({"png", "jpg", "bmp", "gif"})
COSTUME_FORMATS = BITMAP_FORMATS | {"svg"}
ROTATION_STYLES = ("all around", "left-right", "don't rotate")

# primitive type codes of project.json inputs
NUMBER_TYPES = frozenset({4, 5, 6, 7, 8})
COLOR_TYPE = 9
TEXT_TYPE = 10
BROADCAST_TYPE = 11
VARIABLE_TYPE = 12
LIST_TYPE = 13


class Sb3Error(Exception):
    """Base class for archive decoding failures."""


class NotZip(Sb3Error):
    pass


class MissingProjectJson(Sb3Error):
    pass


class MalformedJson(Sb3Error):
    def __init__(self, path: str, detail: str = ""):
        super().__init__(f"malformed project.json at {path}" + (f": {detail}" if detail else ""))
        self.path = path


class DanglingBlockRef(Sb3Error):
    def __init__(self, target: str, block_id: str):
        super().__init__(f"block reference {block_id!r} does not resolve in target {target!r}")
        self.target = target
        self.block_id = block_id


class MissingAsset(Sb3Error):
    def __init__(self, asset_id: str):
        super().__init__(f"asset {asset_id!r} missing from archive")
        self.asset_id = asset_id


class UnsupportedFormat(Sb3Error):
    def __init__(self, meta: Any):
        super().__init__(f"unsupported project format (no 'targets' array; meta={meta!r})")
        self.meta = meta


class InvalidProject(Sb3Error):
    """A structural invariant of the project model does not hold."""


class AssetIntegrityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Literal:
    type_code: int
    value: str

    @property
    def kind(self) -> str:
        if self.type_code in NUMBER_TYPES:
            return "number"
        if self.type_code == COLOR_TYPE:
            return "color"
        return "text"


@dataclass(frozen=True)
class BlockRef:
    id: str


@dataclass(frozen=True)
class VarRef:
    kind: str  # "variable" | "list" | "broadcast"
    name: str
    id: str | None


InputValue = Union[Literal, BlockRef, VarRef]


@dataclass(frozen=True)
class Input:
    """An input slot. ``value`` is what shows in the slot, ``shadow`` what sits under it."""

    shadow_type: int
    value: InputValue | None
    shadow: InputValue | None = None


@dataclass(frozen=True)
class Field:
    value: Any
    id: str | None = None


@dataclass(frozen=True)
class Block:
    id: str
    opcode: str
    next: str | None = None
    parent: str | None = None
    inputs: Mapping[str, Input] = field(default_factory=dict)
    fields: Mapping[str, Field] = field(default_factory=dict)
    top_level: bool = False
    shadow: bool = False
    shape: str = opcodes.STACK
    known: bool = True
    mutation: Mapping[str, Any] | None = None
    x: float | None = None
    y: float | None = None

    def block_refs(self) -> Iterable[str]:
        for inp in self.inputs.values():
            for v in (inp.value, inp.shadow):
                if isinstance(v, BlockRef):
                    yield v.id


@dataclass(frozen=True)
class Costume:
    name: str
    asset_id: str
    file_ext: str
    md5ext: str
    rotation_center: tuple[float, float] = (0.0, 0.0)
    bitmap_resolution: int = 1

    @property
    def member_name(self) -> str:
        return self.md5ext


@dataclass(frozen=True)
class Target:
    name: str
    is_stage: bool
    blocks: Mapping[str, Block] = field(default_factory=dict)
    costumes: tuple[Costume, ...] = ()
    current_costume: int = 0
    x: float = 0.0
    y: float = 0.0
    size: float = 100.0
    direction: float = 90.0
    visible: bool = True
    rotation_style: str = "all around"
    layer_order: int = 0
    variables: Mapping[str, str] = field(default_factory=dict)
    lists: Mapping[str, str] = field(default_factory=dict)
    broadcasts: Mapping[str, str] = field(default_factory=dict)
    sound_count: int = 0
    comment_count: int = 0

    @property
    def costume(self) -> Costume:
        return self.costumes[self.current_costume]

    @property
    def unknown_opcodes(self) -> list[str]:
        return sorted({b.opcode for b in self.blocks.values() if not b.known})


@dataclass(frozen=True)
class Project:
    stage: Target
    sprites: tuple[Target, ...]
    meta: str = "3.0.0"
    source_path: str = ""
    monitor_count: int = 0
    assets: Mapping[str, bytes] = field(default_factory=dict, repr=False)

    @property
    def targets(self) -> tuple[Target, ...]:
        return (self.stage, *self.sprites)

    def sprite(self, name: str) -> Target:
        for s in self.sprites:
            if s.name == name:
                return s
        raise KeyError(name)


def load_path(path: str | PathLike) -> Project:
    with open(path, "rb") as fh:
        return load_project(fh.read(), source_path=str(path))


def load_project(archive_bytes: bytes, source_path: str = "") -> Project:
    """Decode and validate an ``.sb3`` archive."""
    try:
        zf = zipfile.ZipFile(io.BytesIO(archive_bytes))
    except (zipfile.BadZipFile, ValueError) as exc:
        raise NotZip(str(exc)) from None
    with zf:
        names = set(zf.namelist())
        pj_name = "project.json" if "project.json" in names else None
        if pj_name is None:
            # some exporters nest everything under one folder
            nested = [n for n in names if n.endswith("/project.json")]
            if len(nested) != 1:
                raise MissingProjectJson("archive has no project.json")
            pj_name = nested[0]
        prefix = pj_name[: -len("project.json")]
        try:
            data = json.loads(zf.read(pj_name).decode("utf-8-sig"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise MalformedJson("$", str(exc)) from None
        if not isinstance(data, dict) or not isinstance(data.get("targets"), list):
            raise UnsupportedFormat(data.get("meta") if isinstance(data, dict) else None)

        targets = [_parse_target(t, f"targets[{i}]") for i, t in enumerate(data["targets"])]
        stages = [t for t in targets if t.is_stage]
        if len(stages) != 1:
            raise InvalidProject(f"expected exactly one stage, found {len(stages)}")
        sprites = tuple(t for t in targets if not t.is_stage)
        seen: set[str] = set()
        for s in sprites:
            if s.name in seen:
                raise InvalidProject(f"duplicate sprite name {s.name!r}")
            seen.add(s.name)
        for t in targets:
            _validate_graph(t)

        assets: dict[str, bytes] = {}
        for t, raw in zip(targets, data["targets"]):
            for c in t.costumes:
                assets[c.member_name] = _read_member(zf, names, prefix + c.member_name, c.asset_id)
            for j, snd in enumerate(raw.get("sounds") or []):
                if not isinstance(snd, dict):
                    raise MalformedJson(f"targets.{t.name}.sounds[{j}]")
                member = snd.get("md5ext") or f"{snd.get('assetId')}.{snd.get('dataFormat')}"
                _read_member(zf, names, prefix + member, str(snd.get("assetId", member)), keep=False)

    meta = data.get("meta") if isinstance(data.get("meta"), dict) else {}
    monitors = data.get("monitors") if isinstance(data.get("monitors"), list) else []
    return Project(
        stage=stages[0],
        sprites=sprites,
        meta=str(meta.get("semver", "3.0.0")),
        source_path=source_path,
        monitor_count=len(monitors),
        assets=assets,
    )


def _read_member(zf: zipfile.ZipFile, names: set[str], member: str, asset_id: str, keep: bool = True) -> bytes:
    if member not in names:
        raise MissingAsset(asset_id)
    return zf.read(member) if keep else b""


def _require(obj: Mapping, key: str, kind: type | tuple, path: str, default: Any = ...) -> Any:
    if key not in obj or obj[key] is None:
        if default is ...:
            raise MalformedJson(f"{path}.{key}", "missing")
        return default
    value = obj[key]
    if isinstance(value, bool) and kind in (int, float, (int, float)):
        raise MalformedJson(f"{path}.{key}", "expected number")
    if not isinstance(value, kind):
        raise MalformedJson(f"{path}.{key}", f"expected {kind}")
    return value


def _normalize_direction(d: float) -> float:
    d = ((d + 180.0) % 360.0) - 180.0
    return 180.0 if d == -180.0 else d


def _parse_target(raw: Any, path: str) -> Target:
    if not isinstance(raw, dict):
        raise MalformedJson(path, "target is not an object")
    is_stage = bool(_require(raw, "isStage", bool, path, False))
    name = str(_require(raw, "name", str, path, "Stage" if is_stage else ""))
    blocks_raw = _require(raw, "blocks", dict, path, {})
    blocks = {bid: _parse_block(bid, b, f"{path}.blocks.{bid}") for bid, b in blocks_raw.items()}

    costumes = tuple(
        _parse_costume(c, f"{path}.costumes[{i}]") for i, c in enumerate(_require(raw, "costumes", list, path, []))
    )
    current = int(_require(raw, "currentCostume", (int, float), path, 0))
    if not costumes or not 0 <= current < len(costumes):
        raise InvalidProject(f"{name}: current costume {current} out of range ({len(costumes)} costumes)")

    num = (int, float)
    size = float(_require(raw, "size", num, path, 100))
    if size <= 0:
        raise InvalidProject(f"{name}: size must be positive, got {size}")
    style = str(_require(raw, "rotationStyle", str, path, "all around"))
    if style not in ROTATION_STYLES:
        raise MalformedJson(f"{path}.rotationStyle", f"unknown rotation style {style!r}")

    def _named_table(key: str) -> dict[str, str]:
        table = _require(raw, key, dict, path, {})
        out = {}
        for k, v in table.items():
            out[str(k)] = str(v[0]) if isinstance(v, list) and v else str(v)
        return out

    comments = raw.get("comments") if isinstance(raw.get("comments"), dict) else {}
    sounds = raw.get("sounds") if isinstance(raw.get("sounds"), list) else []
    return Target(
        name=name,
        is_stage=is_stage,
        blocks=blocks,
        costumes=costumes,
        current_costume=current,
        x=0.0 if is_stage else float(_require(raw, "x", num, path, 0)),
        y=0.0 if is_stage else float(_require(raw, "y", num, path, 0)),
        size=size,
        direction=_normalize_direction(float(_require(raw, "direction", num, path, 90))),
        visible=bool(_require(raw, "visible", bool, path, True)),
        rotation_style=style,
        layer_order=int(_require(raw, "layerOrder", num, path, 0)),
        variables=_named_table("variables"),
        lists=_named_table("lists"),
        broadcasts=_named_table("broadcasts"),
        sound_count=len(sounds),
        comment_count=len(comments),
    )


def _parse_costume(raw: Any, path: str) -> Costume:
    if not isinstance(raw, dict):
        raise MalformedJson(path, "costume is not an object")
    asset_id = str(_require(raw, "assetId", str, path))
    fmt = str(_require(raw, "dataFormat", str, path)).lower()
    if fmt == "jpeg":
        fmt = "jpg"
    if fmt not in COSTUME_FORMATS:
        raise MalformedJson(f"{path}.dataFormat", f"unsupported costume format {fmt!r}")
    md5ext = str(raw.get("md5ext") or f"{asset_id}.{raw['dataFormat']}")
    res = int(_require(raw, "bitmapResolution", (int, float), path, 1))
    if fmt == "svg":
        res = 1
    elif res not in (1, 2):
        raise MalformedJson(f"{path}.bitmapResolution", f"expected 1 or 2, got {res}")
    return Costume(
        name=str(_require(raw, "name", str, path, asset_id)),
        asset_id=asset_id,
        file_ext=fmt,
        md5ext=md5ext,
        rotation_center=(
            float(_require(raw, "rotationCenterX", (int, float), path, 0)),
            float(_require(raw, "rotationCenterY", (int, float), path, 0)),
        ),
        bitmap_resolution=res,
    )


def _parse_primitive(raw: Any, path: str) -> InputValue | None:
    if raw is None:
        return None
    if isinstance(raw, str):
        return BlockRef(raw)
    if not isinstance(raw, list) or not raw or not isinstance(raw[0], int):
        raise MalformedJson(path, "bad input value")
    code = raw[0]
    if code in NUMBER_TYPES or code in (COLOR_TYPE, TEXT_TYPE):
        value = raw[1] if len(raw) > 1 else ""
        return Literal(code, "" if value is None else _literal_text(value))
    if code in (BROADCAST_TYPE, VARIABLE_TYPE, LIST_TYPE):
        if len(raw) < 2:
            raise MalformedJson(path, "bad reference primitive")
        kind = {BROADCAST_TYPE: "broadcast", VARIABLE_TYPE: "variable", LIST_TYPE: "list"}[code]
        return VarRef(kind, str(raw[1]), str(raw[2]) if len(raw) > 2 and raw[2] is not None else None)
    raise MalformedJson(path, f"unknown primitive type {code}")


def _literal_text(value: Any) -> str:
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return str(value)


def _parse_block(bid: str, raw: Any, path: str) -> Block:
    if isinstance(raw, list):
        # top-level variable/list reporter stored as a bare primitive
        prim = _parse_primitive(raw, path)
        if not isinstance(prim, VarRef) or prim.kind == "broadcast":
            raise MalformedJson(path, "unexpected top-level primitive")
        opcode, fname = ("data_variable", "VARIABLE") if prim.kind == "variable" else ("data_listcontents", "LIST")
        return Block(
            id=bid,
            opcode=opcode,
            fields={fname: Field(prim.name, prim.id)},
            top_level=True,
            shape=opcodes.REPORTER,
            x=float(raw[3]) if len(raw) > 3 else None,
            y=float(raw[4]) if len(raw) > 4 else None,
        )
    if not isinstance(raw, dict):
        raise MalformedJson(path, "block is not an object")
    opcode = _require(raw, "opcode", str, path)
    inputs = {}
    for name, inp in (_require(raw, "inputs", dict, path, {})).items():
        ipath = f"{path}.inputs.{name}"
        if not isinstance(inp, list) or not inp or not isinstance(inp[0], int):
            raise MalformedJson(ipath, "bad input")
        value = _parse_primitive(inp[1] if len(inp) > 1 else None, ipath)
        shadow = _parse_primitive(inp[2], ipath) if len(inp) > 2 else (value if inp[0] == 1 else None)
        inputs[name] = Input(inp[0], value, shadow)
    fields = {}
    for name, fv in (_require(raw, "fields", dict, path, {})).items():
        if isinstance(fv, list):
            fields[name] = Field(fv[0] if fv else None, fv[1] if len(fv) > 1 else None)
        else:
            fields[name] = Field(fv)
    shadow = bool(raw.get("shadow", False))
    shape, known = opcodes.shape_of(opcode, shadow)
    mutation = raw.get("mutation") if isinstance(raw.get("mutation"), dict) else None
    nxt, parent = raw.get("next"), raw.get("parent")
    for key, val in (("next", nxt), ("parent", parent)):
        if val is not None and not isinstance(val, str):
            raise MalformedJson(f"{path}.{key}", "expected block id")
    return Block(
        id=bid,
        opcode=opcode,
        next=nxt,
        parent=parent,
        inputs=inputs,
        fields=fields,
        top_level=bool(raw.get("topLevel", False)),
        shadow=shadow,
        shape=shape,
        known=known,
        mutation=mutation,
        x=raw.get("x") if isinstance(raw.get("x"), (int, float)) else None,
        y=raw.get("y") if isinstance(raw.get("y"), (int, float)) else None,
    )


def _validate_graph(target: Target) -> None:
    blocks = target.blocks
    for b in blocks.values():
        refs = [r for r in (b.next, b.parent) if r is not None]
        refs += list(b.block_refs())
        for r in refs:
            if r not in blocks:
                raise DanglingBlockRef(target.name, r)
        if b.shape == opcodes.HAT and b.parent is not None:
            raise InvalidProject(f"{target.name}: hat block {b.id} has a parent")
        if b.next is not None:
            nxt = blocks[b.next]
            if nxt.shape in (opcodes.REPORTER, opcodes.BOOLEAN) or b.shape in (opcodes.REPORTER, opcodes.BOOLEAN):
                raise InvalidProject(f"{target.name}: reporter in stack chain at {b.id} -> {b.next}")
        for name, inp in b.inputs.items():
            if name.startswith("SUBSTACK") and isinstance(inp.value, BlockRef):
                sub = blocks[inp.value.id]
                if sub.shape not in (opcodes.STACK, opcodes.C_BLOCK, opcodes.CAP):
                    raise InvalidProject(f"{target.name}: substack of {b.id} holds a {sub.shape} block")


def asset_bytes(project: Project, costume: Costume) -> bytes:
    """Exact archive bytes of a costume; warns when the content hash does not match."""
    try:
        data = project.assets[costume.member_name]
    except KeyError:
        raise MissingAsset(costume.asset_id) from None
    if not asset_intact(project, costume):
        warnings.warn(
            f"asset {costume.member_name} does not hash to {costume.asset_id}",
            AssetIntegrityWarning,
            stacklevel=2,
        )
    return data


def asset_intact(project: Project, costume: Costume) -> bool:
    data = project.assets.get(costume.member_name)
    if data is None:
        raise MissingAsset(costume.asset_id)
    return hashlib.md5(data).hexdigest() == costume.asset_id


def iter_scripts(target: Target) -> list[Block]:
    """Top-level script roots: hats first, then orphan stacks, each by block id."""
    roots = [b for b in target.blocks.values() if b.top_level and not b.shadow]
    hats = sorted((b for b in roots if b.shape == opcodes.HAT), key=lambda b: b.id)
    rest = sorted((b for b in roots if b.shape != opcodes.HAT), key=lambda b: b.id)
    return hats + rest


def walk_script(target: Target, root: Block) -> list[Block]:
    """Every block reachable from ``root`` (chain, inputs and substacks), depth first."""
    out: list[Block] = []
    stack = [root.id]
    seen: set[str] = set()
    while stack:
        bid = stack.pop()
        if bid in seen:
            continue
        seen.add(bid)
        b = target.blocks[bid]
        out.append(b)
        if b.next:
            stack.append(b.next)
        stack.extend(reversed(list(b.block_refs())))
    return out


def _dump_primitive(v: InputValue | None) -> Any:
    if v is None:
        return None
    if isinstance(v, BlockRef):
        return v.id
    if isinstance(v, Literal):
        return [v.type_code, v.value]
    code = {"broadcast": BROADCAST_TYPE, "variable": VARIABLE_TYPE, "list": LIST_TYPE}[v.kind]
    return [code, v.name, v.id]


def dump_blocks(target: Target) -> dict[str, Any]:
    """Re-serialize a target's block graph in ``project.json`` form."""
    out: dict[str, Any] = {}
    for bid, b in target.blocks.items():
        inputs = {}
        for name, inp in b.inputs.items():
            entry = [inp.shadow_type, _dump_primitive(inp.value)]
            if inp.shadow_type != 1:
                entry.append(_dump_primitive(inp.shadow))
            inputs[name] = entry
        out[bid] = {
            "opcode": b.opcode,
            "next": b.next,
            "parent": b.parent,
            "inputs": inputs,
            "fields": {k: [f.value, f.id] for k, f in b.fields.items()},
            "shadow": b.shadow,
            "topLevel": b.top_level,
        }
        if b.mutation is not None:
            out[bid]["mutation"] = dict(b.mutation)
    return out
