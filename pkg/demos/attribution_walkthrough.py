# Who took this picture?  A small end-to-end run on synthetic photographers.
#
#   python demos/attribution_walkthrough.py [out_dir]

import sys
import tempfile
from pathlib import Path

import numpy as np

from photoauthor.attribclf import evaluate, predict, train_ova_svm, weighted_nn_explain
from photoauthor.catalog import load_manifest, make_splits
from photoauthor.pipeline import extract_feature
from photoauthor.synth import generate_dataset

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="attrib_"))

# four "photographers", each with their own palette and texture habits
generate_dataset(out, n_authors=4, per_author=40, seed=1)
catalog = load_manifest(out / "manifest.jsonl")
print(catalog.author_counts)

# 10% test, 10% of the rest for validation, the remainder for training
split = make_splits(catalog, seed=1)
print(len(split.test), len(split.validation), len(split.train))

# 30-d colour histogram: 10 bins each for L*, a*, b*
lab = extract_feature(catalog, out, "lab30")
print(lab.values.shape, lab.values[0].round(3))

labels = catalog.labels()
model = train_ova_svm(lab, labels, C=1.0, seed=0, ids=split.training_ids())
report = evaluate(model, lab, labels, split.test)
print(report.to_text())

# the largest weights per class tell which colour bins each author leans on
for author, w in zip(model.classes.authors, model.weights):
    print(author, np.argsort(w)[::-1][:3])

# nearest training photo of the predicted and of the true author, per test photo,
# with distances weighted by the predicted class's |w|
train_ids = split.training_ids()
for pid in split.test[:5]:
    pred = predict(model, lab.row(pid))
    print(pid, labels[pid], pred, weighted_nn_explain(model, lab, pid, pred, labels[pid], labels, train_ids))
