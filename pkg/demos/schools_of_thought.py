# Do photographers fall into schools?  t-SNE of photos and a dendrogram of authors.

import numpy as np

from photoauthor.featstore import FeatureMatrix
from photoauthor.styleclust import (agglomerative_dendrogram, author_means, cohesion_text,
                                    group_cohesion_report, tsne_embed)

rng = np.random.default_rng(3)

# two schools of five authors each; authors inside a school share a style centre
schools = {"magnum": rng.normal(0, 1, 64), "fsa": rng.normal(0, 1, 64)}
ids, rows, labels, groups = [], [], {}, {}
for school, centre in schools.items():
    for a in range(5):
        name = f"{school}{a}"
        groups[name] = school
        own = centre + 0.4 * rng.normal(size=64)
        for k in range(12):
            ids.append(f"{name}_{k}")
            rows.append(own + 0.3 * rng.normal(size=64))
            labels[ids[-1]] = name
feats = FeatureMatrix("H-Pool5", ids, np.array(rows))

emb = tsne_embed(feats.values, perplexity=15, seed=0, ids=feats.ids)
print("final KL", round(emb.kl, 4))
for s in schools:
    pts = emb.coords[[i for i, p in enumerate(ids) if groups[labels[p]] == s]]
    print(s, pts.mean(axis=0).round(1))

dendro = agglomerative_dendrogram(author_means(feats, labels), metric="cosine")
print(dendro.to_text())
print(cohesion_text(group_cohesion_report(dendro, groups)))
