"""
Render Module
Debug images of projected grids: each occupied cell takes its class color,
dimmed by log-depth; vacant cells stay black.
"""
import itertools
import os
from typing import Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from config import NUM_CLASSES  # noqa: E402
from .projection import ProjectedGrid, VACANT  # noqa: E402

MIN_BRIGHTNESS = 0.35


def _build_palette() -> np.ndarray:
    """20 colors with pairwise-distinct directions in RGB space."""
    directions = []
    seen = set()
    for triple in itertools.product(range(3), repeat=3):
        if not any(triple):
            continue
        g = np.gcd.reduce(triple)
        key = tuple(v // g for v in triple)
        if key in seen:
            continue
        seen.add(key)
        directions.append(key)
    directions.append((3, 1, 2))
    colors = np.array(directions[:NUM_CLASSES], dtype=np.float64)
    return colors / colors.max(axis=1, keepdims=True) * 255.0


_palette: Optional[np.ndarray] = None


def get_palette() -> np.ndarray:
    """Get or create the class palette (NUM_CLASSES × 3, values 0-255)."""
    global _palette
    if _palette is None:
        _palette = _build_palette()
    return _palette


def render_grid(grid: ProjectedGrid, palette: np.ndarray = None) -> np.ndarray:
    """H×W×3 uint8 image of ``grid``."""
    palette = get_palette() if palette is None else palette
    h, w = grid.class_map.shape
    image = np.zeros((h, w, 3), dtype=np.float64)
    occupied = grid.class_map != VACANT
    brightness = MIN_BRIGHTNESS + (1.0 - MIN_BRIGHTNESS) * grid.depth_map[occupied]
    image[occupied] = palette[grid.class_map[occupied]] * brightness[:, None]
    return np.round(image).astype(np.uint8)


def save_image(path: str, image: np.ndarray) -> None:
    """Write PNG (through matplotlib) or binary PGM (grayscale) by extension."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    if path.lower().endswith(".pgm"):
        gray = image if image.ndim == 2 else np.round(image.mean(axis=2)).astype(np.uint8)
        h, w = gray.shape
        with open(path, "wb") as f:
            f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
            f.write(gray.astype(np.uint8).tobytes())
    else:
        plt.imsave(path, image)


def render_to_file(grid: ProjectedGrid, path: str, palette: np.ndarray = None) -> np.ndarray:
    image = render_grid(grid, palette)
    save_image(path, image)
    return image


def load_image(path: str) -> np.ndarray:
    """Read a PNG written by ``save_image`` as H×W×3 uint8."""
    image = plt.imread(path)
    if image.dtype != np.uint8:
        image = np.round(image * 255.0).astype(np.uint8)
    return image[..., :3]


def invert_render(image: np.ndarray, palette: np.ndarray = None) -> np.ndarray:
    """Recover the class map from a rendered image by cosine similarity to the palette."""
    palette = get_palette() if palette is None else palette
    pixels = image.reshape(-1, 3).astype(np.float64)
    norms = np.linalg.norm(pixels, axis=1)
    unit_palette = palette / np.linalg.norm(palette, axis=1, keepdims=True)
    similarity = pixels @ unit_palette.T
    class_map = np.argmax(similarity, axis=1)
    class_map[norms == 0] = VACANT
    return class_map.reshape(image.shape[:2])
