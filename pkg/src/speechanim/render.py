"""Rasterize landmark topology and latent keypoints to image frames.

Frames are drawn into a fixed world viewport ([-3, 3] in x and y, y up) so
identical sequences always produce byte-identical PNG files.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from . import geometry as geo

VIEWPORT = 3.0
FACE_COLOR = (220, 220, 220)
EYE_COLOR = (120, 190, 255)
KP_COLOR = (255, 170, 60)

_POLYLINES = (
    (geo.JAW, False),
    (geo.RIGHT_BROW, False),
    (geo.LEFT_BROW, False),
    (geo.NOSE_BRIDGE, False),
    (geo.NOSE_BASE, False),
    (geo.RIGHT_EYE, True),
    (geo.LEFT_EYE, True),
    (geo.OUTER_LIP, True),
    (geo.INNER_LIP, True),
)


def _to_px(xy: np.ndarray, size: int) -> np.ndarray:
    px = np.empty_like(xy)
    px[..., 0] = (xy[..., 0] / (2 * VIEWPORT) + 0.5) * size
    px[..., 1] = (0.5 - xy[..., 1] / (2 * VIEWPORT)) * size
    return px


def render_frame(face=None, eyes=None, latents=None, size: int = 512) -> Image.Image:
    """Draw one frame; any of face (68,3|2), eyes (52,2), latents (20,3) may be None."""
    if size < 64:
        raise ValueError(f"render size must be at least 64, got {size}")
    img = Image.new("RGB", (size, size), (16, 16, 16))
    draw = ImageDraw.Draw(img)
    if face is not None:
        face = np.asarray(face, dtype=np.float64)
        px = _to_px(face[:, :2], size)
        for sl, closed in _POLYLINES:
            pts = [tuple(p) for p in px[sl]]
            if closed:
                pts.append(pts[0])
            draw.line(pts, fill=FACE_COLOR, width=max(1, size // 256))
    if eyes is not None:
        eyes = np.asarray(eyes, dtype=np.float64)
        for x, y in _to_px(eyes, size):
            r = max(1, size // 512)
            draw.ellipse((x - r, y - r, x + r, y + r), fill=EYE_COLOR)
    if latents is not None:
        latents = np.asarray(latents, dtype=np.float64)
        for x, y in _to_px(latents[:, :2], size):
            r = max(2, size // 170)
            draw.line((x - r, y, x + r, y), fill=KP_COLOR, width=1)
            draw.line((x, y - r, x, y + r), fill=KP_COLOR, width=1)
    return img


def render(faces=None, eyes=None, latents=None, size: int = 512,
           out_dir=None) -> list:
    """Render a sequence; returns PIL images, or written paths when out_dir set.

    At least one of faces (T,68,3), eyes (T,52,2), latents (T,20,3) must be a
    nonempty sequence.
    """
    if size < 64:
        raise ValueError(f"render size must be at least 64, got {size}")
    lengths = {np.asarray(s).shape[0] for s in (faces, eyes, latents) if s is not None}
    if not lengths:
        raise ValueError("nothing to render")
    if len(lengths) != 1:
        raise ValueError(f"sequence lengths differ: {sorted(lengths)}")
    t = lengths.pop()
    if t == 0:
        raise ValueError("cannot render an empty sequence")

    outputs = []
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
    for i in range(t):
        img = render_frame(
            None if faces is None else np.asarray(faces)[i],
            None if eyes is None else np.asarray(eyes)[i],
            None if latents is None else np.asarray(latents)[i],
            size=size,
        )
        if out_dir is None:
            outputs.append(img)
        else:
            path = out_dir / f"frame_{i:06d}.png"
            img.save(path)
            outputs.append(path)
    return outputs
