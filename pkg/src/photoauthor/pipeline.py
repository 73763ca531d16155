"""Catalog-level feature extraction and the synthetic end-to-end benchmark."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import attribclf
from .catalog import Catalog, load_manifest, make_splits
from .featstore import FeatureMatrix, write_feature_file
from .imagefeat import (bow_encode, build_vocabulary, extract_descriptors, gist_descriptor,
                        lab_histogram, load_image)
from .imagefeat.surf import DescriptorSet
from .imagefeat.vocab import MAX_SAMPLE, Vocabulary

log = logging.getLogger(__name__)

FEATURES = ("lab30", "gist", "surfbow500")


def _lab(path):
    return lab_histogram(load_image(path))


def _gist(path):
    return gist_descriptor(load_image(path))


def _surf(args):
    pid, path = args
    return extract_descriptors(load_image(path), photo_id=pid)


def _map(fn, items, threads):
    if threads > 1 and len(items) > 1:
        with ProcessPoolExecutor(threads) as pool:
            return list(pool.map(fn, items, chunksize=16))
    return [fn(i) for i in items]


def _paths(catalog: Catalog, root):
    root = Path(root)
    return [str(root / r.path) for r in catalog.records]


def describe_catalog(catalog: Catalog, root, threads=1) -> dict[str, DescriptorSet]:
    items = list(zip([r.photo_id for r in catalog.records], _paths(catalog, root)))
    return {d.photo_id: d for d in _map(_surf, items, threads)}


def vocabulary_from_descriptors(desc: dict[str, DescriptorSet], train_ids, k=500, seed=0,
                                max_sample=MAX_SAMPLE) -> Vocabulary:
    """k-means vocabulary over descriptors of training images only."""
    pooled = [desc[p].descriptors for p in train_ids if len(desc[p])]
    X = np.vstack(pooled) if pooled else np.zeros((0, 64))
    return build_vocabulary(X, k=k, seed=seed, max_sample=max_sample)


def encode_catalog(desc: dict[str, DescriptorSet], vocab: Vocabulary, ids, name=None) -> FeatureMatrix:
    rows = np.stack([bow_encode(desc[p], vocab) for p in ids]) if ids else np.zeros((0, vocab.k))
    empty = int((rows.sum(1) == 0).sum())
    if empty:
        log.warning("%d images had no descriptors and were encoded as all-zero histograms", empty)
    return FeatureMatrix(name or f"surfbow{vocab.k}", list(ids), rows)


def extract_feature(catalog: Catalog, root, feature, vocab: Vocabulary | None = None, threads=1) -> FeatureMatrix:
    ids = [r.photo_id for r in catalog.records]
    paths = _paths(catalog, root)
    if feature == "lab30":
        return FeatureMatrix("lab30", ids, np.stack(_map(_lab, paths, threads)))
    if feature == "gist":
        return FeatureMatrix("gist", ids, np.stack(_map(_gist, paths, threads)))
    if feature.startswith("surfbow"):
        if vocab is None:
            raise ValueError("surfbow features need a vocabulary")
        return encode_catalog(describe_catalog(catalog, root, threads), vocab, ids, feature)
    raise ValueError(f"unknown feature {feature!r}")


def run_synth_bench(out_dir, seed=0, n_authors=8, per_author=200, k=500, C=1.0, threads=1):
    """Generate the synthetic dataset, extract lab30 and surfbow500, train and evaluate.

    Writes the dataset, splits, feature files, models and reports under
    ``out_dir``; returns {feature: EvalReport}.
    """
    from .synth import generate_dataset

    out = Path(out_dir)
    data = out / "data"
    generate_dataset(data, n_authors, per_author, seed)
    catalog = load_manifest(data / "manifest.jsonl")
    split = make_splits(catalog, seed)
    split.save(out / "split.tsv")
    labels = catalog.labels()
    train_ids = split.training_ids()
    test_ids = split.test

    feats = {"lab30": extract_feature(catalog, data, "lab30", threads=threads)}
    desc = describe_catalog(catalog, data, threads)
    vocab = vocabulary_from_descriptors(desc, train_ids, k=k, seed=seed)
    vocab.save(out / "vocab.npz")
    name = f"surfbow{k}"
    feats[name] = encode_catalog(desc, vocab, [r.photo_id for r in catalog.records], name)

    reports = {}
    for fname, fm in feats.items():
        write_feature_file(fm, out / f"{fname}.pfv")
        model = attribclf.train_ova_svm(fm, labels, C=C, seed=seed, ids=train_ids, threads=threads)
        model.save(out / f"{fname}.psvm")
        rep = attribclf.evaluate(model, fm, labels, test_ids)
        (out / f"{fname}_report.txt").write_text(rep.to_text(), encoding="utf-8")
        reports[fname] = rep
    return reports
