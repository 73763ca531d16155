"""Pastiche generation from a photographer's scene, object and placement statistics.

Scene predictions, object detections and segmentation masks are produced by
external models and ingested from text files. From them we fit, per author:

* a smoothed categorical over scene types,
* for each scene, a categorical over object classes plus a ``<none>`` stop
  symbol (objects are drawn one after another until ``<none>`` comes up or
  ``max_objects`` is reached),
* for each (scene, object), an 8x8 histogram of normalised box centres and the
  mean box area relative to the image, per cell.

A recipe samples from these tables; :func:`compose_pastiche` pastes the
masked crops onto a background photo in placement order.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field, asdict
from typing import Mapping, Sequence

import numpy as np
from PIL import Image

from .errors import (BboxOutOfBounds, MaskShapeMismatch, MissingCrop, NoBackgroundForScene,
                     NoPredictions, RetriesExhausted, UnknownObjectClass)

GRID = 8
NO_OBJECT = "<none>"
N_SCENES = 205
DEFAULT_SCALE = 0.05

# Stand-in set of 25 object categories; real runs pass their detector's classes.
DEFAULT_OBJECT_CLASSES = (
    "person", "car", "bus", "truck", "bicycle", "motorcycle", "horse", "dog", "cat", "cow",
    "sheep", "bird", "boat", "airplane", "train", "chair", "sofa", "table", "bottle", "tv",
    "lamp", "flag", "sign", "umbrella", "hat",
)


def default_scene_types(n=N_SCENES):
    return tuple(f"scene_{i:03d}" for i in range(n))


@dataclass(frozen=True)
class DetectionRecord:
    photo_id: str
    object_class: str
    bbox: tuple[float, float, float, float]   # x0, y0, x1, y1 in pixels
    score: float = 1.0
    mask_path: str | None = None

    def __post_init__(self):
        x0, y0, x1, y1 = self.bbox
        if not (x0 < x1 and y0 < y1):
            raise BboxOutOfBounds(f"degenerate box {self.bbox} for {self.photo_id}")

    def center(self, width, height):
        x0, y0, x1, y1 = self.bbox
        if x0 < 0 or y0 < 0 or x1 > width or y1 > height:
            raise BboxOutOfBounds(f"box {self.bbox} outside {width}x{height} image {self.photo_id}")
        return (x0 + x1) / 2 / width, (y0 + y1) / 2 / height

    def relative_area(self, width, height):
        x0, y0, x1, y1 = self.bbox
        return (x1 - x0) * (y1 - y0) / (width * height)


# ---------------------------------------------------------------- file formats

def load_scene_predictions(path) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line and not line.startswith("#"):
                pid, scene = line.split("\t")[:2]
                out[pid] = scene
    return out


def load_detections(path) -> list[DetectionRecord]:
    dets = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            pid, cls, box = parts[0], parts[1], parts[2]
            score = float(parts[3]) if len(parts) > 3 and parts[3] else 1.0
            mask = parts[4] if len(parts) > 4 and parts[4] else None
            dets.append(DetectionRecord(pid, cls, tuple(float(v) for v in box.split(",")), score, mask))
    return dets


def write_detections(dets, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for d in dets:
            box = ",".join(repr(float(v)) for v in d.bbox)
            fh.write(f"{d.photo_id}\t{d.object_class}\t{box}\t{d.score!r}\t{d.mask_path or ''}\n")


# ---------------------------------------------------------------- fitting

def fit_scene_distribution(scene_predictions: Mapping[str, str], author_photos: Sequence[str],
                           scene_types: Sequence[str] = None, alpha=1.0) -> np.ndarray:
    """p(s) = (count(s) + alpha) / (N + alpha * S) over the author's predicted scenes."""
    scene_types = list(scene_types or default_scene_types())
    pos = {s: i for i, s in enumerate(scene_types)}
    counts = np.zeros(len(scene_types))
    for pid in author_photos:
        if pid in scene_predictions:
            counts[pos[scene_predictions[pid]]] += 1
    n = counts.sum()
    if n == 0:
        raise NoPredictions("author has no photos with a scene prediction")
    return (counts + alpha) / (n + alpha * len(scene_types))


def _photo_detections(detections, photos, min_score):
    by_photo = defaultdict(list)
    for d in detections:
        if d.photo_id in photos and d.score >= min_score:
            by_photo[d.photo_id].append(d)
    return by_photo


def fit_object_given_scene(detections: Sequence[DetectionRecord], scene_predictions: Mapping[str, str],
                           author_photos: Sequence[str], scene_types: Sequence[str] = None,
                           object_classes: Sequence[str] = DEFAULT_OBJECT_CLASSES, alpha=1.0,
                           per_photo_normalize=False, min_score=0.0) -> np.ndarray:
    """Rows: scenes; columns: object classes then ``<none>``.

    Each photo contributes its detections plus one ``<none>`` (the stop after
    its last object). With ``per_photo_normalize`` a photo's detections share a
    total weight of 1. Scenes without photos get a uniform row.
    """
    scene_types = list(scene_types or default_scene_types())
    s_pos = {s: i for i, s in enumerate(scene_types)}
    o_pos = {o: i for i, o in enumerate(object_classes)}
    photos = {p for p in author_photos if p in scene_predictions}
    by_photo = _photo_detections(detections, photos, min_score)
    n_obj = len(object_classes)
    counts = np.zeros((len(scene_types), n_obj + 1))
    for pid in sorted(photos):
        s = s_pos[scene_predictions[pid]]
        dets = by_photo.get(pid, [])
        w = 1.0 / len(dets) if per_photo_normalize and dets else 1.0
        for d in dets:
            if d.object_class not in o_pos:
                raise UnknownObjectClass(d.object_class)
            counts[s, o_pos[d.object_class]] += w
        counts[s, n_obj] += 1
    table = np.full_like(counts, 1.0 / (n_obj + 1))
    seen = counts[:, n_obj] > 0
    table[seen] = (counts[seen] + alpha) / (counts[seen].sum(1, keepdims=True) + alpha * (n_obj + 1))
    return table


@dataclass
class SpatialModel:
    grid: np.ndarray          # (8, 8), rows = y cells, sums to 1
    cell_scale: np.ndarray    # (8, 8) mean relative area per cell
    count: int = 0

    def to_dict(self):
        return {"grid": self.grid.tolist(), "cell_scale": self.cell_scale.tolist(), "count": self.count}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["grid"]), np.array(d["cell_scale"]), d["count"])

    @classmethod
    def uniform(cls, scale=DEFAULT_SCALE):
        return cls(np.full((GRID, GRID), 1.0 / GRID ** 2), np.full((GRID, GRID), scale), 0)


def grid_cell(cx, cy):
    """(row, col) of a normalised centre; the right/bottom edge belongs to the last cell."""
    return min(int(cy * GRID), GRID - 1), min(int(cx * GRID), GRID - 1)


def _spatial_from(points, alpha):
    counts = np.zeros((GRID, GRID))
    scale_sum = np.zeros((GRID, GRID))
    for cx, cy, area in points:
        r, c = grid_cell(cx, cy)
        counts[r, c] += 1
        scale_sum[r, c] += area
    n = counts.sum()
    if n + alpha * GRID ** 2 > 0:
        grid = (counts + alpha) / (n + alpha * GRID ** 2)
    else:
        grid = np.full((GRID, GRID), 1.0 / GRID ** 2)
    mean = scale_sum.sum() / n if n else DEFAULT_SCALE
    cell_scale = np.where(counts > 0, scale_sum / np.maximum(counts, 1), mean)
    return SpatialModel(grid, cell_scale, int(n))


def fit_spatial_model(detections: Sequence[DetectionRecord], scene_predictions: Mapping[str, str],
                      image_sizes: Mapping[str, tuple[int, int]], alpha=1.0, author_photos=None,
                      min_score=0.0) -> dict:
    """Placement model per (scene, object) plus a scene-independent one per object.

    Keys are ``(scene, object)`` and ``(None, object)``. ``image_sizes`` maps
    photo id to (width, height).
    """
    photos = set(author_photos) if author_photos is not None else set(scene_predictions)
    per_pair = defaultdict(list)
    per_obj = defaultdict(list)
    for d in detections:
        if d.photo_id not in photos or d.photo_id not in scene_predictions or d.score < min_score:
            continue
        w, h = image_sizes[d.photo_id]
        cx, cy = d.center(w, h)
        pt = (cx, cy, d.relative_area(w, h))
        per_pair[(scene_predictions[d.photo_id], d.object_class)].append(pt)
        per_obj[(None, d.object_class)].append(pt)
    out = {k: _spatial_from(v, alpha) for k, v in sorted(per_pair.items())}
    out.update({k: _spatial_from(v, alpha) for k, v in sorted(per_obj.items(), key=lambda kv: kv[0][1])})
    return out


@dataclass
class SceneObjectModel:
    author_id: str
    scene_types: list[str]
    object_classes: list[str]
    scene_dist: np.ndarray
    object_given_scene: np.ndarray          # (scenes, objects + 1)
    spatial: dict = field(default_factory=dict)

    def spatial_for(self, scene, obj):
        return self.spatial.get((scene, obj)) or self.spatial.get((None, obj)) or SpatialModel.uniform()

    def to_json(self):
        return json.dumps({
            "author_id": self.author_id,
            "scene_types": list(self.scene_types),
            "object_classes": list(self.object_classes),
            "scene_dist": self.scene_dist.tolist(),
            "object_given_scene": self.object_given_scene.tolist(),
            "spatial": [{"scene": s, "object": o, **m.to_dict()} for (s, o), m in self.spatial.items()],
        })

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        spatial = {(e["scene"], e["object"]): SpatialModel.from_dict(e) for e in d["spatial"]}
        return cls(d["author_id"], d["scene_types"], d["object_classes"], np.array(d["scene_dist"]),
                   np.array(d["object_given_scene"]), spatial)


def fit_author_model(author_id, author_photos, scene_predictions, detections, image_sizes,
                     scene_types=None, object_classes=DEFAULT_OBJECT_CLASSES, alpha=1.0,
                     min_score=0.0) -> SceneObjectModel:
    scene_types = list(scene_types or default_scene_types())
    photos = list(author_photos)
    return SceneObjectModel(
        author_id, scene_types, list(object_classes),
        fit_scene_distribution(scene_predictions, photos, scene_types, alpha),
        fit_object_given_scene(detections, scene_predictions, photos, scene_types, object_classes,
                               alpha, min_score=min_score),
        fit_spatial_model(detections, scene_predictions, image_sizes, alpha, photos, min_score),
    )


# ---------------------------------------------------------------- sampling

@dataclass
class Placement:
    object_class: str
    detection: DetectionRecord
    center: tuple[float, float]
    scale: float


@dataclass
class PasticheRecipe:
    author_id: str
    scene_type: str
    background_photo_id: str
    placements: list[Placement]
    seed: int

    def to_dict(self):
        return {
            "author_id": self.author_id, "scene_type": self.scene_type,
            "background_photo_id": self.background_photo_id, "seed": self.seed,
            "placements": [{"object_class": p.object_class, "detection": asdict(p.detection),
                            "center": list(p.center), "scale": p.scale} for p in self.placements],
        }

    @classmethod
    def from_dict(cls, d):
        pl = []
        for p in d["placements"]:
            det = dict(p["detection"])
            det["bbox"] = tuple(det["bbox"])
            pl.append(Placement(p["object_class"], DetectionRecord(**det), tuple(p["center"]), p["scale"]))
        return cls(d["author_id"], d["scene_type"], d["background_photo_id"], pl, d["seed"])


def _draw(rng, cdf):
    return min(int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right")), len(cdf) - 1)


class RecipeSampler:
    """Draws recipes from one model; cumulative tables are built once."""

    def __init__(self, model: SceneObjectModel, scene_index: Mapping[str, Sequence[str]],
                 detection_index: Mapping[str, Sequence[DetectionRecord]], max_objects=5, max_retries=10):
        self.model = model
        self.scene_index = scene_index
        self.detection_index = detection_index
        self.max_objects = max_objects
        self.max_retries = max_retries
        self._scene_cdf = np.cumsum(model.scene_dist)
        self._obj_cdf = np.cumsum(model.object_given_scene, axis=1)

    def sample(self, seed) -> PasticheRecipe:
        m = self.model
        rng = np.random.default_rng(seed)
        s = _draw(rng, self._scene_cdf)
        scene = m.scene_types[s]
        backgrounds = self.scene_index.get(scene, ())
        if not backgrounds:
            raise NoBackgroundForScene(f"no background photo for scene {scene!r}")
        bg = backgrounds[int(rng.integers(len(backgrounds)))]
        n_obj = len(m.object_classes)
        placements = []
        while len(placements) < self.max_objects:
            for _ in range(self.max_retries + 1):
                o = _draw(rng, self._obj_cdf[s])
                if o == n_obj or self.detection_index.get(m.object_classes[o]):
                    break
            else:
                raise RetriesExhausted(f"no detections for sampled objects in scene {scene!r}")
            if o == n_obj:
                break
            obj = m.object_classes[o]
            sp = m.spatial_for(scene, obj)
            cell = _draw(rng, np.cumsum(sp.grid.ravel()))
            r, c = divmod(cell, GRID)
            cx = (c + rng.random()) / GRID
            cy = (r + rng.random()) / GRID
            dets = self.detection_index[obj]
            det = dets[int(rng.integers(len(dets)))]
            placements.append(Placement(obj, det, (cx, cy), float(sp.cell_scale[r, c])))
        return PasticheRecipe(m.author_id, scene, bg, placements, int(seed) if np.isscalar(seed) else 0)


def sample_recipe(model: SceneObjectModel, scene_index, detection_index, seed, max_objects=5,
                  max_retries=10) -> PasticheRecipe:
    """Sample a scene, a background, and a sequence of placed object segments."""
    return RecipeSampler(model, scene_index, detection_index, max_objects, max_retries).sample(seed)


# ---------------------------------------------------------------- compositing

def cut_detection(image, det: DetectionRecord, mask=None):
    """Crop a detection's box; ``mask`` (nonzero = foreground) must match the crop."""
    img = np.asarray(image)
    x0, y0, x1, y1 = (int(round(v)) for v in det.bbox)
    crop = img[y0:y1, x0:x1]
    if mask is None:
        mask = np.ones(crop.shape[:2], dtype=bool)
    else:
        mask = np.asarray(mask)
        if mask.ndim == 3:
            mask = mask[..., 0]
        if mask.shape != crop.shape[:2]:
            raise MaskShapeMismatch(f"mask {mask.shape} vs crop {crop.shape[:2]}")
        mask = mask != 0
    return crop, mask


def _resize(arr, size, resample):
    w, h = size
    if arr.shape[1] == w and arr.shape[0] == h:
        return arr
    if arr.dtype == bool:
        f = np.asarray(Image.fromarray(arr.astype(np.float32), mode="F").resize((w, h), resample))
        return f >= 0.5
    return np.asarray(Image.fromarray(arr).resize((w, h), resample))


def compose_pastiche(recipe: PasticheRecipe, background, crops: Mapping) -> np.ndarray:
    """Paste each placement's masked crop onto a copy of ``background``.

    ``crops`` maps a :class:`DetectionRecord` to ``(crop, mask)``. A segment is
    rescaled (aspect preserved, bilinear) so its area is ``scale`` times the
    background area, centred on the target and shifted to stay inside the frame.
    """
    out = np.array(background, copy=True)
    H, W = out.shape[:2]
    for p in recipe.placements:
        if p.detection not in crops:
            raise MissingCrop(f"no crop for detection {p.detection}")
        crop, mask = crops[p.detection]
        crop = np.asarray(crop)
        mask = np.asarray(mask)
        if mask.shape != crop.shape[:2]:
            raise MaskShapeMismatch(f"mask {mask.shape} vs crop {crop.shape[:2]}")
        mask = mask.astype(bool)
        if crop.dtype != out.dtype:
            crop = np.clip(crop, 0, 255).astype(out.dtype)
        if crop.ndim == 2 and out.ndim == 3:
            crop = np.repeat(crop[:, :, None], out.shape[2], axis=2)
        elif crop.ndim == 3 and out.ndim == 2:
            crop = np.asarray(Image.fromarray(crop).convert("L"))
        h, w = mask.shape
        f = np.sqrt(p.scale * H * W / (h * w))
        nw, nh = max(1, int(round(w * f))), max(1, int(round(h * f)))
        seg = _resize(crop, (nw, nh), Image.BILINEAR)
        m = _resize(mask, (nw, nh), Image.BILINEAR)
        # oversize segments keep their central part
        if nw > W:
            s0 = (nw - W) // 2
            seg, m, nw = seg[:, s0:s0 + W], m[:, s0:s0 + W], W
        if nh > H:
            s0 = (nh - H) // 2
            seg, m, nh = seg[s0:s0 + H], m[s0:s0 + H], H
        left = min(max(int(round(p.center[0] * W - nw / 2)), 0), W - nw)
        top = min(max(int(round(p.center[1] * H - nh / 2)), 0), H - nh)
        region = out[top:top + nh, left:left + nw]
        region[m] = seg[m]
    return out
