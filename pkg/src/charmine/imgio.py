"""Lossless image IO shared by the generator, trainer, and inference."""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image


def save_image(arr: np.ndarray, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr).save(path)
    return path


def load_image(path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def resize_image(arr: np.ndarray, size: int) -> np.ndarray:
    """Bilinear resize to a square (size, size) RGB array."""
    if arr.shape[0] == size and arr.shape[1] == size:
        return arr
    img = Image.fromarray(arr).resize((size, size), Image.BILINEAR)
    return np.asarray(img, dtype=np.uint8)
