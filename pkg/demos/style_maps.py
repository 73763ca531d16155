# Rolling 1000-way object scores up to coarse categories.
#
# No network outputs here, so we invent a toy label hierarchy and some
# per-photo class scores with a planted taste per author.

import numpy as np

from photoauthor.attribclf import train_ova_svm
from photoauthor.featstore import FeatureMatrix
from photoauthor.stylemaps import (author_response_matrix, build_collapse_map, collapse_model_weights,
                                   top_k_categories)

rng = np.random.default_rng(0)

coarse = ["animal", "vehicle", "building", "food"]
fine = [f"{c}_{i:02d}" for c in coarse for i in range(25)]      # 100 fine classes
hierarchy = {f: [f.split("_")[0]] for f in fine}
hierarchy.update({c: ["entity"] for c in coarse})
hierarchy["food"] = ["entity", "animal"]                          # a DAG, not a tree
cmap = build_collapse_map(hierarchy, fine, {"animal", "vehicle", "building", "food"})
print(cmap.coarse_labels, cmap.group_sizes())

# authors prefer different coarse groups
taste = {"Adams": "building", "Lange": "animal", "Evans": "vehicle"}
ids, rows, labels = [], [], {}
for author, fav in taste.items():
    for k in range(30):
        x = rng.normal(0, 1, len(fine))
        x[[j for j, f in enumerate(fine) if f.startswith(fav)]] += 2.0
        ids.append(f"{author}_{k}")
        rows.append(x)
        labels[ids[-1]] = author
fc8 = FeatureMatrix("C-FC8", ids, np.array(rows))

mean_map = author_response_matrix(fc8, labels, cmap)
print(mean_map.to_tsv())
print(mean_map.sign)

model = train_ova_svm(fc8, labels, C=0.1, seed=0)
print(collapse_model_weights(model, cmap).to_tsv())

for author in taste:
    print(author, top_k_categories(fc8, labels, author, 5, fine))
