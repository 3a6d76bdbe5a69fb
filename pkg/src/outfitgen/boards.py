"""PNG outfit boards: item images in slot order with the query as caption."""

from __future__ import annotations

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from .catalog import FashionItem

_CELL = 160
_MARGIN = 12
_CAPTION_H = 26
_LABEL_H = 30


def render_board(items: list[FashionItem], query_text: str | None,
                 target) -> None:
    """Render one outfit as a horizontal image grid, saved as PNG.

    ``target`` is a filesystem path or a writable binary file object.
    """
    n = len(items)
    width = n * _CELL + (n + 1) * _MARGIN
    caption_h = _CAPTION_H if query_text else 0
    height = caption_h + _CELL + _LABEL_H + 3 * _MARGIN
    board = Image.new("RGB", (width, height), (248, 248, 248))
    draw = ImageDraw.Draw(board)
    font = ImageFont.load_default()

    if query_text:
        draw.text((_MARGIN, _MARGIN), f"query: {query_text}", fill=(20, 20, 20), font=font)

    top = caption_h + _MARGIN
    for i, item in enumerate(items):
        x = _MARGIN + i * (_CELL + _MARGIN)
        raster = np.clip(np.round(item.image * 255.0), 0, 255).astype(np.uint8)
        tile = Image.fromarray(raster, mode="RGB").resize((_CELL, _CELL), Image.NEAREST)
        board.paste(tile, (x, top))
        label = f"{item.semantic_type}\n{item.title[:24]}"
        draw.multiline_text((x, top + _CELL + 4), label, fill=(60, 60, 60), font=font)

    board.save(target, format="PNG")
