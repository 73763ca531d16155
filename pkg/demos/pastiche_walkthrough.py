# A pastiche: sample a scene, some objects and where they go, then paste.
#
#   python demos/pastiche_walkthrough.py [out.png]

import sys

import numpy as np
from PIL import Image

from photoauthor.pastiche import (DetectionRecord, compose_pastiche, cut_detection, fit_author_model,
                                  sample_recipe)

rng = np.random.default_rng(5)
scenes = ["beach", "street", "field"]
classes = ["person", "dog", "car"]

# pretend predictions: this author shoots mostly streets, people on the left third
preds, dets, sizes, images = {}, [], {}, {}
for i in range(60):
    pid = f"p{i}"
    preds[pid] = scenes[rng.choice(3, p=[0.2, 0.7, 0.1])]
    sizes[pid] = (96, 64)
    img = np.zeros((64, 96, 3), np.uint8)
    img[:] = rng.integers(0, 256, 3)
    images[pid] = img
    if rng.random() < 0.8:
        x0 = rng.uniform(2, 28)
        dets.append(DetectionRecord(pid, "person", (x0, 10, x0 + 12, 50)))
        img[10:50, int(x0):int(x0) + 12] = (230, 200, 160)

model = fit_author_model("street_author", list(preds), preds, dets, sizes, scenes, classes, alpha=1.0)
print(dict(zip(scenes, model.scene_dist.round(3))))
print(dict(zip(classes + ["<none>"], model.object_given_scene[1].round(3))))
print(model.spatial[("street", "person")].grid.sum(axis=0).round(2))   # column marginal: left-heavy

backgrounds = {s: [p for p in preds if preds[p] == s] for s in scenes}
by_class = {"person": [d for d in dets if d.object_class == "person"]}
recipe = sample_recipe(model, backgrounds, by_class, seed=1, max_objects=3)
print(recipe.to_dict())

crops = {p.detection: cut_detection(images[p.detection.photo_id], p.detection) for p in recipe.placements}
out = compose_pastiche(recipe, images[recipe.background_photo_id], crops)
if len(sys.argv) > 1:
    Image.fromarray(out).save(sys.argv[1])
print(out.shape, int((out != images[recipe.background_photo_id]).any(axis=2).sum()), "pixels changed")
