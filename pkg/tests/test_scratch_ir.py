import hashlib
import io
import json
import zipfile
from pathlib import Path

import pytest
from hypothesis import HealthCheck, given, settings

import fixtures
from sb3kit import B, ProjectBuilder, archive_with, costume, svg_costume
from strategies import projects
from stereoscan import opcodes
from stereoscan.scratch_ir import (
    AssetIntegrityWarning,
    DanglingBlockRef,
    InvalidProject,
    MalformedJson,
    MissingAsset,
    MissingProjectJson,
    NotZip,
    UnsupportedFormat,
    VarRef,
    asset_bytes,
    asset_intact,
    dump_blocks,
    iter_scripts,
    load_path,
    load_project,
    walk_script,
)

MANIFEST = json.loads((Path(__file__).parent / "snapshots" / "clone_wars_manifest.json").read_text())


def raw_json(data: bytes) -> dict:
    with zipfile.ZipFile(io.BytesIO(data)) as zf:
        return json.loads(zf.read("project.json"))


def test_stage_only_project():
    p = load_project(ProjectBuilder().build())
    assert p.stage.is_stage and p.sprites == ()
    assert p.stage.blocks == {}
    assert p.meta == "3.0.0"
    assert iter_scripts(p.stage) == []


def test_load_path_records_source(tmp_path):
    f = tmp_path / "x.sb3"
    f.write_bytes(ProjectBuilder().build())
    assert load_path(f).source_path == str(f)


def test_missing_costume_file():
    pb = ProjectBuilder()
    pb.sprite("Cat")
    data = pb.build()
    member = raw_json(data)["targets"][1]["costumes"][0]["md5ext"]
    pb.drop_members.add(member)
    with pytest.raises(MissingAsset) as e:
        load_project(pb.build())
    assert member.startswith(e.value.asset_id)


def test_not_zip():
    with pytest.raises(NotZip):
        load_project(b"definitely not a zip")


def test_missing_project_json():
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        zf.writestr("readme.txt", "hi")
    with pytest.raises(MissingProjectJson):
        load_project(buf.getvalue())


def test_nested_project_json_is_found():
    data = ProjectBuilder().build()
    src = zipfile.ZipFile(io.BytesIO(data))
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        for name in src.namelist():
            zf.writestr("Project/" + name, src.read(name))
    assert load_project(buf.getvalue()).stage.is_stage


def test_malformed_json():
    with pytest.raises(MalformedJson):
        load_project(archive_with(b"{not json"))


def test_pre_three_format_rejected():
    with pytest.raises(UnsupportedFormat):
        load_project(archive_with({"objName": "Stage", "children": []}))


def test_malformed_json_reports_path():
    pj = raw_json(ProjectBuilder().build())
    pj["targets"][0]["blocks"] = {"a": {"opcode": 5}}
    with pytest.raises(MalformedJson) as e:
        load_project(archive_with(pj))
    assert "blocks.a" in e.value.path


def _with_blocks(blocks: dict) -> bytes:
    pb = ProjectBuilder()
    pb.sprite("Cat")
    members: dict = {}
    pj = pb.project_json(members)
    pj["targets"][1]["blocks"] = blocks
    return archive_with(pj, members)


def _blk(opcode, **kw):
    base = {"opcode": opcode, "next": None, "parent": None, "inputs": {}, "fields": {}, "shadow": False, "topLevel": False}
    base.update(kw)
    return base


def test_dangling_next():
    with pytest.raises(DanglingBlockRef) as e:
        load_project(_with_blocks({"a": _blk("event_whenflagclicked", next="zz", topLevel=True)}))
    assert (e.value.target, e.value.block_id) == ("Cat", "zz")


def test_dangling_input():
    blocks = {"a": _blk("motion_movesteps", topLevel=True, inputs={"STEPS": [3, "nope", [4, "10"]]})}
    with pytest.raises(DanglingBlockRef):
        load_project(_with_blocks(blocks))


def test_hat_with_parent_rejected():
    blocks = {
        "a": _blk("motion_movesteps", next="b", topLevel=True),
        "b": _blk("event_whenflagclicked", parent="a"),
    }
    with pytest.raises(InvalidProject):
        load_project(_with_blocks(blocks))


def test_reporter_in_next_chain_rejected():
    blocks = {
        "a": _blk("event_whenflagclicked", next="b", topLevel=True),
        "b": _blk("operator_add", parent="a"),
    }
    with pytest.raises(InvalidProject):
        load_project(_with_blocks(blocks))


def test_substack_must_hold_stack_blocks():
    blocks = {
        "a": _blk("control_forever", topLevel=True, inputs={"SUBSTACK": [2, "b"]}),
        "b": _blk("operator_add", parent="a"),
    }
    with pytest.raises(InvalidProject):
        load_project(_with_blocks(blocks))


def test_two_stages_rejected():
    pj = raw_json(ProjectBuilder().build())
    members = {}
    pb = ProjectBuilder()
    pj = pb.project_json(members)
    pj["targets"].append(dict(pj["targets"][0]))
    with pytest.raises(InvalidProject):
        load_project(archive_with(pj, members))


def test_duplicate_sprite_names_rejected():
    pb = ProjectBuilder()
    pb.sprite("Cat")
    pb.sprite("Cat")
    with pytest.raises(InvalidProject):
        load_project(pb.build())


def test_unknown_opcode_kept_and_flagged():
    p = load_project(fixtures.TEMPLATES[0](0))
    assert p.sprites[0].unknown_opcodes == []
    data = _with_blocks({"a": _blk("fancyext_doMagic", topLevel=True)})
    t = load_project(data).sprites[0]
    assert t.blocks["a"].shape == opcodes.STACK and not t.blocks["a"].known
    assert t.unknown_opcodes == ["fancyext_doMagic"]


def test_target_attributes_and_normalisation():
    pb = ProjectBuilder()
    pb.sprite("A", x=10, y=-20, size=50, direction=-180, visible=False, rotation_style="left-right", layer=3)
    pb.sprite("B", direction=270)
    p = load_project(pb.build())
    a, b = p.sprites
    assert (a.x, a.y, a.size, a.visible, a.rotation_style, a.layer_order) == (10, -20, 50, False, "left-right", 3)
    assert a.direction == 180
    assert b.direction == -90
    assert p.stage.x == 0 and p.stage.y == 0


def test_invalid_size_and_costume_index():
    pb = ProjectBuilder()
    pb.sprite("A", size=0)
    with pytest.raises(InvalidProject):
        load_project(pb.build())
    pb = ProjectBuilder()
    pb.sprite("A", current=3)
    with pytest.raises(InvalidProject):
        load_project(pb.build())


def test_costume_formats():
    pb = ProjectBuilder()
    pb.sprite("A", costumes=[svg_costume("vec"), costume("hi-res", (80, 80), resolution=2)], current=1)
    p = load_project(pb.build())
    vec, hires = p.sprites[0].costumes
    assert vec.file_ext == "svg" and vec.bitmap_resolution == 1
    assert hires.bitmap_resolution == 2 and p.sprites[0].costume is hires


def test_bitmap_resolution_must_be_one_or_two():
    pb = ProjectBuilder()
    pb.sprite("A", costumes=[costume("c", resolution=3)])
    with pytest.raises(MalformedJson):
        load_project(pb.build())


def test_sounds_must_exist_but_are_only_counted():
    pb = ProjectBuilder()
    pb.sprite("A", sounds=2)
    p = load_project(pb.build())
    assert p.sprites[0].sound_count == 2
    pj = raw_json(pb.build())
    pb.drop_members.add(pj["targets"][1]["sounds"][0]["md5ext"])
    with pytest.raises(MissingAsset):
        load_project(pb.build())


def test_asset_bytes_hash_and_png_magic():
    p = load_project(fixtures.dress_up_project())
    for t in p.targets:
        data = asset_bytes(p, t.costume)
        assert hashlib.md5(data).hexdigest() == t.costume.asset_id
    assert asset_bytes(p, p.stage.costume)[:4] == bytes([0x89, 0x50, 0x4E, 0x47])


def test_tampered_asset_warns_but_returns_bytes():
    pb = ProjectBuilder()
    pb.sprite("A")
    member = raw_json(pb.build())["targets"][1]["costumes"][0]["md5ext"]
    pb.extra_members[member] = b"\x89PNG tampered"
    p = load_project(pb.build())
    assert not asset_intact(p, p.sprites[0].costume)
    with pytest.warns(AssetIntegrityWarning):
        assert asset_bytes(p, p.sprites[0].costume) == b"\x89PNG tampered"


def test_iter_scripts_hat_before_orphan():
    pb = ProjectBuilder()
    blocks = pb.sprite("A")
    blocks.script(B("motion_movesteps", STEPS=1))  # id a0_001 (orphan)
    blocks.script(B("event_whenflagclicked"), B("motion_turnright", DEGREES=15))
    t = load_project(pb.build()).sprites[0]
    roots = iter_scripts(t)
    assert [r.opcode for r in roots] == ["event_whenflagclicked", "motion_movesteps"]


def test_iter_scripts_golden_order():
    p = load_project(fixtures.clone_wars_like())
    got = {t.name: [b.opcode for b in iter_scripts(t)] for t in p.targets}
    assert got == {
        "Stage": ["event_whenflagclicked"],
        "Ship": ["event_whenflagclicked"],
        "Bullet": ["control_start_as_clone", "event_whenflagclicked"],
        "Enemy": ["event_whenflagclicked", "control_start_as_clone"],
    }


def test_clone_wars_counts_match_manifest():
    p = load_project(fixtures.clone_wars_like())
    assert [s.name for s in p.sprites] == MANIFEST["sprites"]
    for t in p.targets:
        assert sum(not b.shadow for b in t.blocks.values()) == MANIFEST["blocks"][t.name]
        assert len(iter_scripts(t)) == MANIFEST["scripts"][t.name]


def test_loose_variable_reporter():
    pb = ProjectBuilder()
    blocks = pb.sprite("A")
    bid = blocks.loose_variable("score", 5, 6)
    t = load_project(pb.build()).sprites[0]
    b = t.blocks[bid]
    assert b.opcode == "data_variable" and b.top_level and b.fields["VARIABLE"].value == "score"
    assert iter_scripts(t) == [b]


def test_variable_input_reference():
    p = load_project(fixtures.paint_box_project())
    pencil = p.sprite("Pencil")
    refs = [i.value for b in pencil.blocks.values() for i in b.inputs.values() if isinstance(i.value, VarRef)]
    assert refs and refs[0].name == "brush size" and refs[0].kind == "variable"


def test_walk_script_reaches_everything_in_script():
    p = load_project(fixtures.clone_wars_like())
    ship = p.sprite("Ship")
    (root,) = iter_scripts(ship)
    assert {b.id for b in walk_script(ship, root)} == set(ship.blocks)


def _edges(blocks: dict) -> set:
    out = set()
    for bid, b in blocks.items():
        if isinstance(b, list):
            continue
        out.add((bid, "opcode", b["opcode"]))
        for key in ("next", "parent"):
            if b.get(key):
                out.add((bid, key, b[key]))
        for name, inp in b["inputs"].items():
            for v in inp[1:]:
                if isinstance(v, str):
                    out.add((bid, name, v))
    return out


@settings(max_examples=60, suppress_health_check=[HealthCheck.too_slow], deadline=None)
@given(projects())
def test_round_trip_and_closure(data):
    raw = raw_json(data)
    p1, p2 = load_project(data), load_project(data)
    assert p1 == p2
    for t, rt in zip(p1.targets, raw["targets"]):
        assert _edges(dump_blocks(t)) == _edges(rt["blocks"])
        defined = set(t.blocks)
        referenced = {r for b in t.blocks.values() for r in (b.next, b.parent, *b.block_refs()) if r}
        assert referenced <= defined
