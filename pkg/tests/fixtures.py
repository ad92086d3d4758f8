"""Canonical synthetic projects and rating sheets shared across tests."""

from __future__ import annotations

import colorsys
import json
import random
from pathlib import Path

from sb3kit import B, Menu, ProjectBuilder, Var, costume

from stereoscan.framework import CRITERION_IDS, Provenance, RatingSheet, Verdict


def hsv_rgb(h_deg: float, s: float, v: float) -> tuple[int, int, int]:
    r, g, b = colorsys.hsv_to_rgb(h_deg / 360.0, s, v)
    return round(r * 255), round(g * 255), round(b * 255)


PINK = hsv_rgb(330, 0.8, 0.9)
BLUE = hsv_rgb(210, 0.6, 0.8)
GREEN = hsv_rgb(120, 0.5, 0.7)
WHITE = (255, 255, 255)


def dress_up_project(name: str = "Tera") -> bytes:
    """Sequences only, a female-coded protagonist, pink everywhere."""
    pb = ProjectBuilder(backdrop=costume("pink room", (480, 360), PINK))
    tera = pb.sprite(name, costumes=[costume("tera-dress", (60, 120), PINK)], x=-100, y=0)
    tera.script(
        B("event_whenflagclicked"),
        B("motion_gotoxy", X=-100, Y=0),
        B("looks_switchcostumeto", COSTUME=Menu("looks_costume", COSTUME="tera-dress")),
        B("looks_sayforsecs", MESSAGE="Pick an outfit for me!", SECS=2),
    )
    dress = pb.sprite("Dress", costumes=[costume("dress-pink", (50, 80), PINK)], x=60, y=40)
    dress.script(
        B("event_whenthisspriteclicked"),
        B("looks_nextcostume"),
        B("looks_changeeffectby", CHANGE=25, fields={"EFFECT": "COLOR"}),
    )
    shoes = pb.sprite("Shoes", costumes=[costume("shoes", (40, 20), PINK)], x=60, y=-80)
    shoes.script(B("event_whenthisspriteclicked"), B("looks_nextcostume"), B("control_wait", DURATION=1))
    return pb.build()


def paint_box_project() -> bytes:
    """Loop-rich drawing tool with neutral names and colours."""
    pb = ProjectBuilder(backdrop=costume("canvas", (480, 360), WHITE))
    pencil = pb.sprite("Pencil", costumes=[costume("pencil", (20, 60), BLUE)])
    pencil.script(
        B("event_whenflagclicked"),
        B("pen_clear"),
        B("pen_setPenSizeTo", SIZE=Var("brush size")),
        B(
            "control_forever",
            SUBSTACK=[
                B("motion_goto", TO=Menu("motion_goto_menu", TO="_mouse_")),
                B(
                    "control_if_else",
                    CONDITION=B("sensing_mousedown"),
                    SUBSTACK=[B("pen_penDown")],
                    SUBSTACK2=[B("pen_penUp")],
                ),
            ],
        ),
    )
    palette = pb.sprite("Palette", costumes=[costume("palette", (80, 40), GREEN)], x=180, y=-140)
    palette.script(
        B("event_whenthisspriteclicked"),
        B(
            "control_repeat",
            TIMES=10,
            SUBSTACK=[
                B("pen_changePenColorParamBy", VALUE=10, COLOR_PARAM=Menu("pen_menu_colorParam", colorParam="color")),
                B("control_wait", DURATION=0.1),
            ],
        ),
        B("data_setvariableto", VALUE=5, fields={"VARIABLE": Var("brush size")}),
    )
    return pb.build()


def maze_game_project(tag: str) -> bytes:
    pb = ProjectBuilder(backdrop=costume("maze", (480, 360), BLUE))
    runner = pb.sprite(f"Runner{tag}", costumes=[costume("runner", (20, 20), GREEN)])
    runner.script(
        B("event_whenflagclicked"),
        B("data_setvariableto", VALUE=0, fields={"VARIABLE": Var("score")}),
        B(
            "control_forever",
            SUBSTACK=[
                B(
                    "control_if",
                    CONDITION=B("sensing_keypressed", KEY_OPTION=Menu("sensing_keyoptions", KEY_OPTION="right arrow")),
                    SUBSTACK=[B("motion_changexby", DX=4)],
                ),
                B(
                    "control_if",
                    CONDITION=B("sensing_touchingcolor", COLOR=B("colour_picker", shadow=True, fields={"COLOUR": "#000000"})),
                    SUBSTACK=[B("looks_say", MESSAGE="Game over!"), B("control_stop", fields={"STOP_OPTION": "all"})],
                ),
            ],
        ),
    )
    return pb.build()


def animation_project(tag: str) -> bytes:
    pb = ProjectBuilder(backdrop=costume("sky", (480, 360), WHITE))
    bird = pb.sprite(f"Bird{tag}", costumes=[costume("bird", (30, 30), BLUE)])
    bird.script(
        B("event_whenflagclicked"),
        B("control_repeat", TIMES=20, SUBSTACK=[B("motion_movesteps", STEPS=5), B("looks_nextcostume")]),
        B("control_if", CONDITION=B("sensing_touchingobject", TOUCHINGOBJECTMENU=Menu("sensing_touchingobjectmenu", TOUCHINGOBJECTMENU="_edge_")),
          SUBSTACK=[B("motion_ifonedgebounce")]),
    )
    return pb.build()


def story_project(tag: str) -> bytes:
    pb = ProjectBuilder(backdrop=costume("park", (480, 360), GREEN))
    a = pb.sprite(f"Robot{tag}", costumes=[costume("robot", (30, 50), BLUE)], x=-80)
    a.script(B("event_whenflagclicked"), B("looks_sayforsecs", MESSAGE="Hello there", SECS=2), B("event_broadcast", BROADCAST_INPUT=B("event_broadcast_menu", shadow=True, fields={"BROADCAST_OPTION": "reply"})))
    b = pb.sprite(f"Tree{tag}", costumes=[costume("tree", (40, 80), GREEN)], x=80)
    b.script(B("event_whenbroadcastreceived", fields={"BROADCAST_OPTION": "reply"}), B("looks_sayforsecs", MESSAGE="Hi!", SECS=2))
    return pb.build()


TEMPLATES = (
    lambda i: dress_up_project(f"Tera{i}"),
    lambda i: paint_box_project(),
    maze_game_project,
    animation_project,
    story_project,
)

N_CORPUS = 73
N_FLAGGED = 14
N_HUMAN_RATERS = 3


def corpus_ids() -> list[str]:
    return [f"p{i:02d}" for i in range(1, N_CORPUS + 1)]


def flagged_ids() -> set[str]:
    rng = random.Random(1973)
    return set(rng.sample(corpus_ids(), N_FLAGGED))


def human_sheets(seed: int = 7) -> list[RatingSheet]:
    """Three human raters per project; exactly the projects in :func:`flagged_ids` get one gendered verdict."""
    rng = random.Random(seed)
    flagged = flagged_ids()
    sheets = []
    for pid in corpus_ids():
        odd_one = rng.randrange(N_HUMAN_RATERS) if pid in flagged else -1
        for r in range(N_HUMAN_RATERS):
            verdict = rng.choice([Verdict.GIRL, Verdict.BOY]) if r == odd_one else Verdict.INCLUSIVE
            scores = {cid: rng.choice([0, 1, 1, 2, 2, 3, 4]) for cid in CRITERION_IDS}
            sheets.append(RatingSheet(f"human{r}", pid, verdict, scores, Provenance.HUMAN))
    return sheets


def write_corpus(root: Path) -> None:
    projects = root / "projects"
    projects.mkdir()
    for i, pid in enumerate(corpus_ids()):
        (projects / f"{pid}.sb3").write_bytes(TEMPLATES[i % len(TEMPLATES)](i))
    (root / "ratings.json").write_text(json.dumps([s.to_dict() for s in human_sheets()]))
    (root / "descriptions.json").write_text(
        json.dumps({pid: f"Starter project number {k}." for k, pid in enumerate(corpus_ids())})
    )


def sheet(project_id: str, scores: dict | int | None, verdict: Verdict = Verdict.INCLUSIVE, rater: str = "r0") -> RatingSheet:
    if isinstance(scores, int):
        scores = {cid: scores for cid in CRITERION_IDS}
    return RatingSheet(rater, project_id, verdict, scores, Provenance.HUMAN)



def clone_wars_like() -> bytes:
    """A shooter built around clones; block counts are recorded in snapshots/clone_wars_manifest.json."""
    pb = ProjectBuilder(backdrop=costume("space", (480, 360), (10, 10, 40)))
    pb.stage_blocks.script(
        B("event_whenflagclicked"),
        B("looks_switchbackdropto", BACKDROP=Menu("looks_backdrops", BACKDROP="space")),
    )
    ship = pb.sprite("Ship", costumes=[costume("ship", (40, 30), BLUE)], y=-150)
    ship.script(
        B("event_whenflagclicked"),
        B("motion_gotoxy", X=0, Y=-150),
        B(
            "control_forever",
            SUBSTACK=[
                B(
                    "control_if",
                    CONDITION=B("sensing_keypressed", KEY_OPTION=Menu("sensing_keyoptions", KEY_OPTION="space")),
                    SUBSTACK=[B("control_create_clone_of", CLONE_OPTION=Menu("control_create_clone_of_menu", CLONE_OPTION="Bullet"))],
                ),
                B(
                    "control_if",
                    CONDITION=B("sensing_keypressed", KEY_OPTION=Menu("sensing_keyoptions", KEY_OPTION="left arrow")),
                    SUBSTACK=[B("motion_changexby", DX=-5)],
                ),
            ],
        ),
    )
    bullet = pb.sprite("Bullet", costumes=[costume("bullet", (4, 10), GREEN)], visible=False)
    bullet.script(
        B("control_start_as_clone"),
        B("looks_show"),
        B(
            "control_repeat_until",
            CONDITION=B("sensing_touchingobject", TOUCHINGOBJECTMENU=Menu("sensing_touchingobjectmenu", TOUCHINGOBJECTMENU="_edge_")),
            SUBSTACK=[B("motion_changeyby", DY=10)],
        ),
        B("control_delete_this_clone"),
    )
    bullet.script(B("event_whenflagclicked"), B("looks_hide"), x=0, y=300)
    enemy = pb.sprite("Enemy", costumes=[costume("enemy", (30, 30), (200, 60, 60))], visible=False)
    enemy.script(
        B("event_whenflagclicked"),
        B(
            "control_forever",
            SUBSTACK=[
                B("control_create_clone_of", CLONE_OPTION=Menu("control_create_clone_of_menu", CLONE_OPTION="_myself_")),
                B("control_wait", DURATION=B("operator_random", FROM=1, TO=3)),
            ],
        ),
    )
    enemy.script(
        B("control_start_as_clone"),
        B("motion_gotoxy", X=B("operator_random", FROM=-200, TO=200), Y=180),
        B(
            "control_repeat_until",
            CONDITION=B("sensing_touchingobject", TOUCHINGOBJECTMENU=Menu("sensing_touchingobjectmenu", TOUCHINGOBJECTMENU="Bullet")),
            SUBSTACK=[B("motion_changeyby", DY=-3)],
        ),
        B("control_delete_this_clone"),
        x=0,
        y=300,
    )
    return pb.build()


def _quartered(size: tuple[int, int], colors) -> bytes:
    """Four-colour costume so that mirroring and rotation are visible in pixels."""
    from PIL import Image

    from sb3kit import image_png

    w, h = size
    img = Image.new("RGBA", size)
    for i, c in enumerate(colors):
        box = ((i % 2) * (w // 2), (i // 2) * (h // 2), (i % 2 + 1) * (w // 2) if i % 2 == 0 else w, h // 2 if i < 2 else h)
        img.paste(Image.new("RGBA", (box[2] - box[0], box[3] - box[1]), (*c, 255)), box[:2])
    return image_png(img)


def stage_scene_project() -> bytes:
    """Sprites that exercise offset centres, scaling, hi-res bitmaps, mirroring, rotation, overlap and clipping."""
    from sb3kit import CostumeSpec

    quad = ((220, 40, 40), (40, 160, 60), (40, 60, 200), (240, 200, 30))
    pb = ProjectBuilder(backdrop=CostumeSpec("sky", _quartered((480, 360), (WHITE, (200, 220, 255), (230, 255, 230), (255, 240, 200)))))
    pb.sprite("Plain", costumes=[CostumeSpec("q", _quartered((60, 40), quad))], x=-150, y=100)
    pb.sprite("OffCentre", costumes=[CostumeSpec("q", _quartered((50, 50), quad), center=(10, 40))], x=-40, y=110, size=150)
    pb.sprite("HiRes", costumes=[CostumeSpec("q", _quartered((120, 80), quad), resolution=2)], x=120, y=100)
    pb.sprite("Mirror", costumes=[CostumeSpec("q", _quartered((60, 40), quad))], x=-150, y=-60, direction=-90, rotation_style="left-right")
    pb.sprite("Turned", costumes=[CostumeSpec("q", _quartered((60, 40), quad))], x=0, y=-60, direction=135)
    pb.sprite("Upright", costumes=[CostumeSpec("q", _quartered((60, 40), quad))], x=150, y=-60, direction=45, rotation_style="don't rotate")
    pb.sprite("Under", costumes=[costume("under", (80, 80), PINK)], x=0, y=40, layer=7)
    pb.sprite("Over", costumes=[costume("over", (40, 40), BLUE)], x=20, y=20, layer=8)
    pb.sprite("Hidden", costumes=[costume("hidden", (100, 100), (0, 0, 0))], visible=False, layer=9)
    pb.sprite("Edge", costumes=[costume("edge", (60, 60), GREEN)], x=235, y=-175, size=50)
    return pb.build()
