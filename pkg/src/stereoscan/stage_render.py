"""Start-state stage screenshot and per-sprite costume export."""

from __future__ import annotations

import io
import math
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from PIL import Image, ImageDraw, ImageOps

from .scratch_ir import Costume, Project, Target, asset_bytes

STAGE_WIDTH = 480
STAGE_HEIGHT = 360

# Takes raw SVG bytes, returns an RGBA image or None when it cannot rasterize.
Rasterizer = Callable[[bytes], Optional[Image.Image]]

PLACEHOLDER_FILL = (160, 160, 160, 255)


class UnrasterizableCostume(Exception):
    def __init__(self, asset_id: str):
        super().__init__(f"cannot rasterize SVG costume {asset_id}")
        self.asset_id = asset_id


@dataclass
class StageImage:
    pixels: Image.Image
    placeholders: tuple[str, ...] = ()

    @property
    def width(self) -> int:
        return self.pixels.width

    @property
    def height(self) -> int:
        return self.pixels.height

    def png_bytes(self) -> bytes:
        return to_png(self.pixels)


def to_png(image: Image.Image) -> bytes:
    buf = io.BytesIO()
    image.save(buf, format="PNG")
    return buf.getvalue()


_LENGTH = re.compile(r"^\s*([0-9.eE+-]+)\s*(px)?\s*$")


def svg_intrinsic_size(data: bytes) -> tuple[int, int]:
    """Width/height declared on the root ``<svg>`` element (viewBox fallback)."""
    try:
        root = ET.fromstring(data)
    except ET.ParseError:
        return (1, 1)

    def length(attr: str) -> float | None:
        raw = root.get(attr)
        m = _LENGTH.match(raw) if raw else None
        return float(m.group(1)) if m else None

    w, h = length("width"), length("height")
    if w is None or h is None:
        box = (root.get("viewBox") or "").replace(",", " ").split()
        if len(box) == 4:
            try:
                w, h = w or float(box[2]), h or float(box[3])
            except ValueError:
                pass
    return (max(1, math.ceil(w or 1)), max(1, math.ceil(h or 1)))


def _placeholder(size: tuple[int, int], label: str) -> Image.Image:
    img = Image.new("RGBA", size, PLACEHOLDER_FILL)
    if size[0] >= 8 and size[1] >= 8:
        ImageDraw.Draw(img).text((2, 2), label, fill=(40, 40, 40, 255))
    return img


def costume_image(
    project: Project,
    costume: Costume,
    rasterizer: Rasterizer | None = None,
    allow_placeholder: bool = True,
) -> tuple[Image.Image, bool]:
    """Decode a costume to RGBA at its stored resolution.

    Returns ``(image, is_placeholder)``.
    """
    data = asset_bytes(project, costume)
    if costume.file_ext != "svg":
        with Image.open(io.BytesIO(data)) as im:
            return im.convert("RGBA"), False
    if rasterizer is not None:
        img = rasterizer(data)
        if img is not None:
            return img.convert("RGBA"), False
    if not allow_placeholder:
        raise UnrasterizableCostume(costume.asset_id)
    return _placeholder(svg_intrinsic_size(data), costume.name), True


def _paste(canvas: Image.Image, img: Image.Image, left: int, top: int) -> None:
    # alpha_composite cannot take negative offsets; clip the source instead
    x0, y0 = max(left, 0), max(top, 0)
    x1, y1 = min(left + img.width, canvas.width), min(top + img.height, canvas.height)
    if x0 >= x1 or y0 >= y1:
        return
    src = img.crop((x0 - left, y0 - top, x1 - left, y1 - top))
    canvas.alpha_composite(src, dest=(x0, y0))


def _round_half_up(v: float) -> int:
    return math.floor(v + 0.5)


def place_sprite(img: Image.Image, costume: Costume, sprite: Target) -> tuple[Image.Image, int, int]:
    """Scale/rotate a costume image and compute its top-left stage pixel."""
    scale = sprite.size / 100.0 / costume.bitmap_resolution
    w = max(1, _round_half_up(img.width * scale)) if img.width else 0
    h = max(1, _round_half_up(img.height * scale)) if img.height else 0
    if (w, h) != img.size and w and h:
        img = img.resize((w, h), Image.NEAREST)
    px, py = costume.rotation_center[0] * scale, costume.rotation_center[1] * scale

    if sprite.rotation_style == "left-right" and sprite.direction < 0:
        img = ImageOps.mirror(img)
        px = img.width - px
    elif sprite.rotation_style == "all around" and sprite.direction != 90:
        half_w = max(px, img.width - px)
        half_h = max(py, img.height - py)
        padded = Image.new("RGBA", (max(1, math.ceil(2 * half_w)), max(1, math.ceil(2 * half_h))), (0, 0, 0, 0))
        padded.paste(img, (_round_half_up(padded.width / 2 - px), _round_half_up(padded.height / 2 - py)))
        img = padded.rotate(-(sprite.direction - 90), resample=Image.NEAREST, expand=True)
        px, py = img.width / 2, img.height / 2

    left = _round_half_up(STAGE_WIDTH / 2 + sprite.x - px)
    top = _round_half_up(STAGE_HEIGHT / 2 - sprite.y - py)
    return img, left, top


def render_stage(
    project: Project, rasterizer: Rasterizer | None = None, allow_placeholder: bool = True
) -> StageImage:
    """Composite backdrop and visible sprites as the project looks before any script runs."""
    canvas = Image.new("RGBA", (STAGE_WIDTH, STAGE_HEIGHT), (255, 255, 255, 255))
    placeholders: list[str] = []

    backdrop, ph = costume_image(project, project.stage.costume, rasterizer, allow_placeholder)
    if ph:
        placeholders.append(project.stage.costume.asset_id)
    if backdrop.size != (STAGE_WIDTH, STAGE_HEIGHT):
        backdrop = backdrop.resize((STAGE_WIDTH, STAGE_HEIGHT), Image.NEAREST)
    canvas.alpha_composite(backdrop)

    for sprite in sorted(project.sprites, key=lambda s: s.layer_order):
        if not sprite.visible:
            continue
        img, ph = costume_image(project, sprite.costume, rasterizer, allow_placeholder)
        if ph:
            placeholders.append(sprite.costume.asset_id)
        img, left, top = place_sprite(img, sprite.costume, sprite)
        _paste(canvas, img, left, top)
    return StageImage(canvas, tuple(placeholders))


_UNSAFE = re.compile(r"[^A-Za-z0-9._-]")


def sanitize_filename(name: str) -> str:
    return _UNSAFE.sub("_", name) or "_"


def export_costumes(
    project: Project, out_dir: str | Path, rasterizer: Rasterizer | None = None, allow_placeholder: bool = True
) -> list[tuple[str, Path]]:
    """Write each sprite's current costume as ``<sprite>__<costume>.png``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for sprite, png in costume_pngs(project, rasterizer, allow_placeholder):
        path = out / f"{sanitize_filename(sprite.name)}__{sanitize_filename(sprite.costume.name)}.png"
        path.write_bytes(png)
        written.append((sprite.name, path))
    return written


def costume_pngs(
    project: Project, rasterizer: Rasterizer | None = None, allow_placeholder: bool = True
) -> list[tuple[Target, bytes]]:
    out = []
    for sprite in project.sprites:
        img, _ = costume_image(project, sprite.costume, rasterizer, allow_placeholder)
        out.append((sprite, to_png(img)))
    return out


def image_similarity(a: Image.Image, b: Image.Image, tolerance: int = 16) -> float:
    """Fraction of pixels whose every channel differs by at most ``tolerance``."""
    if a.size != b.size:
        raise ValueError(f"size mismatch: {a.size} vs {b.size}")
    x = np.asarray(a.convert("RGBA"), dtype=np.int16)
    y = np.asarray(b.convert("RGBA"), dtype=np.int16)
    close = np.all(np.abs(x - y) <= tolerance, axis=-1)
    return float(close.mean())


def cairosvg_rasterizer(data: bytes) -> Image.Image | None:
    """SVG rasterizer backed by the optional ``cairosvg`` package."""
    try:
        import cairosvg
    except ImportError:
        return None
    try:
        png = cairosvg.svg2png(bytestring=data)
    except Exception:
        return None
    with Image.open(io.BytesIO(png)) as im:
        return im.convert("RGBA")
