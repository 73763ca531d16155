"""Desk-scale synthetic photographer dataset.

Every synthetic author has a two-colour palette and a texture family. Each
image draws its own texture parameters, palette jitter and pixel noise from a
per-image seed, so the dataset is byte-identical for a given seed.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter

from .catalog import Catalog, PhotoRecord, write_manifest

SIZE = 128

# (dark colour, light colour) per author, RGB
PALETTES = [
    ((30, 20, 90), (240, 200, 60)),
    ((120, 20, 20), (200, 230, 250)),
    ((10, 70, 30), (250, 160, 200)),
    ((60, 60, 60), (230, 230, 220)),
    ((90, 40, 10), (120, 220, 210)),
    ((20, 50, 120), (250, 120, 40)),
    ((70, 10, 80), (180, 250, 120)),
    ((40, 40, 10), (170, 180, 250)),
]


def _stripes(rng, yy, xx):
    theta = rng.uniform(0, np.pi)
    period = rng.uniform(7, 11)
    return 0.5 + 0.5 * np.sin(2 * np.pi * (xx * np.cos(theta) + yy * np.sin(theta)) / period + rng.uniform(0, 6.3))


def _checker(rng, yy, xx):
    cell = rng.integers(6, 11)
    ox, oy = rng.integers(0, cell, size=2)
    return (((xx + ox) // cell + (yy + oy) // cell) % 2).astype(float)


def _dots(rng, yy, xx):
    img = np.zeros_like(xx, dtype=float)
    for _ in range(rng.integers(25, 45)):
        cy, cx = rng.uniform(0, SIZE, size=2)
        img += np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * rng.uniform(1.8, 2.8) ** 2))
    return np.clip(img, 0, 1)


def _rings(rng, yy, xx):
    cy, cx = rng.uniform(0.2 * SIZE, 0.8 * SIZE, size=2)
    r = np.hypot(yy - cy, xx - cx)
    return 0.5 + 0.5 * np.cos(2 * np.pi * r / rng.uniform(8, 12))


def _blocks(rng, yy, xx):
    img = np.zeros_like(xx, dtype=float)
    for _ in range(rng.integers(6, 12)):
        y0, x0 = rng.integers(0, SIZE - 10, size=2)
        h, w = rng.integers(10, 32, size=2)
        img[y0:y0 + h, x0:x0 + w] = rng.uniform(0.4, 1.0)
    return img


def _noise(rng, yy, xx):
    img = gaussian_filter(rng.normal(size=xx.shape), rng.uniform(1.2, 2.0))
    return np.clip(0.5 + img / (4 * img.std()), 0, 1)


def _gridlines(rng, yy, xx):
    sp = rng.integers(12, 17)
    o = rng.integers(0, sp, size=2)
    return (((xx + o[0]) % sp < 2) | ((yy + o[1]) % sp < 2)).astype(float)


def _bigblobs(rng, yy, xx):
    img = np.zeros_like(xx, dtype=float)
    for _ in range(rng.integers(3, 7)):
        cy, cx = rng.uniform(0, SIZE, size=2)
        img += np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * rng.uniform(6, 10) ** 2))
    return np.clip(img, 0, 1)


TEXTURES = [_stripes, _checker, _dots, _rings, _blocks, _noise, _gridlines, _bigblobs]


def render(author_index, rng) -> np.ndarray:
    """One SIZE x SIZE uint8 RGB image in the style of synthetic author ``author_index``."""
    yy, xx = np.mgrid[0:SIZE, 0:SIZE]
    t = TEXTURES[author_index % len(TEXTURES)](rng, yy, xx)
    dark, light = (np.array(c, dtype=float) + rng.uniform(-15, 15, 3)
                   for c in PALETTES[author_index % len(PALETTES)])
    img = dark + t[..., None] * (light - dark)
    img += rng.normal(scale=6.0, size=img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def author_name(i):
    return f"author{i:02d}"


def generate_dataset(out_dir, n_authors=8, per_author=200, seed=0) -> Catalog:
    """Write PNGs and ``manifest.jsonl`` under ``out_dir``; return the catalog."""
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    records = []
    for a in range(n_authors):
        name = author_name(a)
        for k in range(per_author):
            rng = np.random.default_rng([seed, a, k])
            pid = f"{name}_{k:04d}"
            rel = f"images/{pid}.png"
            Image.fromarray(render(a, rng)).save(out / rel, format="PNG", optimize=False)
            records.append(PhotoRecord(pid, name, rel, width=SIZE, height=SIZE,
                                       title=f"synthetic {name} #{k}"))
    catalog = Catalog.from_records(records)
    write_manifest(catalog, out / "manifest.jsonl")
    return catalog
