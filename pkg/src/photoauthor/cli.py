"""``photoauthor`` command line.

One subcommand per invocation. Failures print a single ``ERROR <code>: <message>``
line on stderr and exit nonzero. Every run, successful or not, appends one JSON
line (argv, resolved config, seed, sha256 of inputs, status) to the run log.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import BadFlag, IoFailure, PhotoAuthorError, UnknownSubcommand

log = logging.getLogger("photoauthor")

DEFAULT_RUN_LOG = "photoauthor_runs.jsonl"

# argument names whose values are files read by the subcommand
INPUT_ARGS = ("manifest", "in_path", "feature", "vocab", "split", "model", "fc8", "hierarchy",
              "chosen", "dims", "groups", "scenes", "detections", "scene_types", "object_classes")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        if "invalid choice" in message and "command" in message:
            raise UnknownSubcommand(message)
        raise BadFlag(message)


# ---------------------------------------------------------------- helpers

def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _digests(args):
    out = {}
    for name in INPUT_ARGS:
        val = getattr(args, name, None)
        if isinstance(val, str) and os.path.isfile(val):
            out[val] = _sha256(val)
    return out


def _config(args):
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


def _append_log(path, record):
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(record, sort_keys=True, default=str) + "\n")


def _root(args):
    if getattr(args, "root", None):
        return Path(args.root)
    return Path(args.manifest).resolve().parent


def _labels(args, split=None):
    """photo_id -> author from --manifest, else from the split file's author column."""
    from .catalog import load_manifest

    if getattr(args, "manifest", None):
        return load_manifest(args.manifest).labels()
    if split is not None and split.labels:
        return split.labels
    raise BadFlag("author labels needed: pass --manifest or a split file with an author column")


def _features(path, dim=None):
    from .featstore import read_feature_file

    return read_feature_file(path, expected_dimension=dim)


# ---------------------------------------------------------------- subcommands

def cmd_ingest(args):
    from .featstore import ingest, read_feature_file

    if args.out:
        mat = ingest(args.in_path, args.feature_name, args.out, args.expect_dim)
    else:
        mat = read_feature_file(args.in_path, args.expect_dim, args.feature_name)
    print(f"{mat.feature_name}\trows={len(mat)}\tdim={mat.dimension}")


def cmd_split(args):
    from .catalog import PHOTOGRAPHER_COUNTS, load_manifest, make_splits, validate_against_table

    catalog = load_manifest(args.manifest)
    if args.check_table:
        report = validate_against_table(catalog, PHOTOGRAPHER_COUNTS)
        sys.stderr.write(str(report) + "\n")
    split = make_splits(catalog, args.seed)
    split.save(args.out)
    print(f"test={len(split.test)}\tvalidation={len(split.validation)}\ttrain={len(split.train)}")


def cmd_vocab(args):
    from .catalog import SplitAssignment, load_manifest
    from .pipeline import describe_catalog, vocabulary_from_descriptors

    catalog = load_manifest(args.manifest)
    if args.split:
        train_ids = SplitAssignment.load(args.split).training_ids(args.exclude_validation)
    else:
        log.warning("no --split given, the vocabulary is built from every photo in the manifest")
        train_ids = [r.photo_id for r in catalog.records]
    desc = describe_catalog(catalog, _root(args), args.threads)
    vocab = vocabulary_from_descriptors(desc, train_ids, k=args.k, seed=args.seed,
                                        max_sample=args.max_sample)
    vocab.save(args.out)
    print(f"k={vocab.k}\titerations={vocab.n_iter}\tobjective={vocab.final_objective!r}")


def cmd_extract(args):
    from .catalog import load_manifest
    from .featstore import write_feature_file
    from .imagefeat.vocab import Vocabulary
    from .pipeline import extract_feature

    vocab = None
    if args.feature.startswith("surfbow"):
        if not args.vocab:
            raise BadFlag(f"--feature {args.feature} needs --vocab")
        vocab = Vocabulary.load(args.vocab)
        if args.feature != f"surfbow{vocab.k}":
            raise BadFlag(f"vocabulary has k={vocab.k}, which does not match {args.feature}")
    catalog = load_manifest(args.manifest)
    mat = extract_feature(catalog, _root(args), args.feature, vocab, args.threads)
    write_feature_file(mat, args.out)
    print(f"{mat.feature_name}\trows={len(mat)}\tdim={mat.dimension}")


def cmd_train(args):
    from .attribclf import train_ova_svm
    from .catalog import SplitAssignment

    split = SplitAssignment.load(args.split)
    labels = _labels(args, split)
    feats = _features(args.feature)
    model = train_ova_svm(feats, labels, C=args.C, tol=args.tol, seed=args.seed,
                          max_iter=args.max_iter, ids=split.training_ids(args.exclude_validation),
                          threads=args.threads)
    model.save(args.out)
    epochs = max(f.n_iter for f in model.fits)
    print(f"classes={len(model.classes)}\tdim={model.dimension}\tmax_epochs={epochs}")


def cmd_eval(args):
    from .attribclf import evaluate, read_model
    from .catalog import SplitAssignment

    split = SplitAssignment.load(args.split)
    labels = _labels(args, split)
    model = read_model(args.model)
    feats = _features(args.feature, model.dimension)
    report = evaluate(model, feats, labels, split.test)
    out = args.report or str(Path(args.model).with_suffix(".report.txt"))
    Path(out).write_text(report.to_text(), encoding="utf-8")
    print(f"macro_f={report.macro_f!r}\tmicro_f={report.micro_f!r}\treport={out}")


def cmd_explain(args):
    from .attribclf import predict, read_model, weighted_nn_explain
    from .catalog import SplitAssignment

    split = SplitAssignment.load(args.split)
    labels = _labels(args, split)
    model = read_model(args.model)
    feats = _features(args.feature, model.dimension)
    ids = args.test_id or split.test
    train_ids = [p for p in split.training_ids(args.exclude_validation) if p in feats]
    print("test_id\ttrue\tpredicted\tnearest_predicted\tnearest_true")
    for pid in ids:
        pred = predict(model, feats.row(pid))
        near_pred, near_true = weighted_nn_explain(model, feats, pid, pred, labels[pid], labels, train_ids)
        print(f"{pid}\t{labels[pid]}\t{pred}\t{near_pred}\t{near_true}")


def _read_lines(path):
    with open(path, encoding="utf-8") as fh:
        return [ln.rstrip("\n").split("\t")[0] for ln in fh if ln.strip() and not ln.startswith("#")]


def cmd_stylemap(args):
    from .stylemaps import (author_response_matrix, build_collapse_map, collapse_model_weights,
                            default_chosen_path, load_chosen, load_hierarchy)

    hierarchy = load_hierarchy(args.hierarchy)
    chosen = load_chosen(args.chosen or default_chosen_path())
    if args.dims:
        dims = _read_lines(args.dims)
    else:
        dims = sorted(set(hierarchy) - {p for ps in hierarchy.values() for p in ps})
        log.warning("no --dims file, using the %d leaf synsets of the hierarchy in sorted order", len(dims))
    cmap = build_collapse_map(hierarchy, dims, chosen, args.fallback)
    if args.mode == "svm":
        if not args.model:
            raise BadFlag("--mode svm needs --model")
        from .attribclf import read_model

        matrix = collapse_model_weights(read_model(args.model), cmap)
    else:
        if not args.fc8:
            raise BadFlag("--mode mean needs --fc8")
        feats = _features(args.fc8, len(dims))
        matrix = author_response_matrix(feats, _labels(args), cmap)
    text = matrix.to_tsv(args.out)
    if not args.out:
        sys.stdout.write(text)


def cmd_topk(args):
    from .stylemaps import top_k_categories

    feats = _features(args.feature)
    dims = _read_lines(args.dims)
    for label in top_k_categories(feats, _labels(args), args.author, args.k, dims):
        print(label)


def cmd_tsne(args):
    from .styleclust import tsne_embed

    feats = _features(args.feature)
    emb = tsne_embed(feats.values, args.perplexity, args.iterations, args.seed, ids=feats.ids)
    emb.to_tsv(args.out)
    print(f"points={len(emb.ids)}\tkl={emb.kl!r}")


def _dendrogram(args):
    from .styleclust import agglomerative_dendrogram, author_means, load_groups

    feats = _features(args.feature)
    vectors = author_means(feats, _labels(args))
    groups = load_groups(args.groups) if args.groups else None
    if groups and args.only_grouped:
        vectors = {a: v for a, v in vectors.items() if a in groups}
    return agglomerative_dendrogram(vectors, args.metric), groups


def cmd_dendro(args):
    from .styleclust import cohesion_text, group_cohesion_report

    dendro, groups = _dendrogram(args)
    dendro.to_text(args.out)
    if groups:
        text = cohesion_text(group_cohesion_report(dendro, groups))
        Path(str(args.out) + ".cohesion.tsv").write_text(text, encoding="utf-8")
    print(f"leaves={len(dendro.leaves)}\tmerges={len(dendro.merges)}")


def cmd_cohesion(args):
    from .styleclust import cohesion_text, group_cohesion_report

    dendro, groups = _dendrogram(args)
    text = cohesion_text(group_cohesion_report(dendro, groups))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _image_size(root, rec):
    if rec.width and rec.height:
        return rec.width, rec.height
    from PIL import Image

    with Image.open(root / rec.path) as im:
        return im.size


def cmd_pastiche_fit(args):
    from .catalog import load_manifest
    from .pastiche import (DEFAULT_OBJECT_CLASSES, default_scene_types, fit_author_model,
                           load_detections, load_scene_predictions)

    catalog = load_manifest(args.manifest)
    root = _root(args)
    photos = catalog.photos_of(args.author)
    if not photos:
        from .errors import UnknownAuthor

        raise UnknownAuthor(f"no photos for author {args.author!r}")
    scenes = load_scene_predictions(args.scenes)
    dets = load_detections(args.detections) if args.detections else []
    by_id = catalog.by_id()
    mine = set(photos)
    sizes = {p: _image_size(root, by_id[p]) for p in mine if p in scenes}
    scene_types = _read_lines(args.scene_types) if args.scene_types else default_scene_types()
    classes = _read_lines(args.object_classes) if args.object_classes else DEFAULT_OBJECT_CLASSES
    model = fit_author_model(args.author, photos, scenes, dets, sizes, scene_types, classes,
                             args.alpha, args.min_score)
    # backgrounds: any catalogued photo with a scene prediction; segments: the author's detections
    backgrounds = {}
    for pid in sorted(scenes):
        if pid in by_id:
            backgrounds.setdefault(scenes[pid], []).append(pid)
    bare = [s for s, p in zip(model.scene_types, model.scene_dist) if p > 0 and s not in backgrounds]
    if bare:
        log.warning("%d scene types with positive probability have no background photo (e.g. %s); "
                    "sampling them fails, consider --scene-types or --alpha 0", len(bare), bare[0])
    own = [d for d in dets if d.photo_id in mine and d.score >= args.min_score]
    bundle = {
        "model": json.loads(model.to_json()),
        "backgrounds": backgrounds,
        "detections": [{"photo_id": d.photo_id, "object_class": d.object_class, "bbox": list(d.bbox),
                        "score": d.score, "mask_path": d.mask_path} for d in own],
        "images": {p: str((root / by_id[p].path).resolve()) for p in sorted(by_id)
                   if p in scenes or p in mine},
    }
    Path(args.out).write_text(json.dumps(bundle, sort_keys=True), encoding="utf-8")
    print(f"author={args.author}\tphotos={len(photos)}\tdetections={len(own)}")


def cmd_pastiche_sample(args):
    from PIL import Image

    from .pastiche import (DetectionRecord, RecipeSampler, SceneObjectModel, compose_pastiche,
                           cut_detection)

    bundle = json.loads(Path(args.model).read_text(encoding="utf-8"))
    model = SceneObjectModel.from_json(json.dumps(bundle["model"]))
    index = {}
    for d in bundle["detections"]:
        det = DetectionRecord(d["photo_id"], d["object_class"], tuple(d["bbox"]), d["score"], d["mask_path"])
        index.setdefault(det.object_class, []).append(det)
    sampler = RecipeSampler(model, bundle["backgrounds"], index, args.max_objects, args.max_retries)
    images = bundle.get("images", {})
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i in range(args.n):
        recipe = sampler.sample(args.seed + i)
        stem = f"pastiche_{i:03d}"
        (out / f"{stem}.json").write_text(json.dumps(recipe.to_dict(), sort_keys=True), encoding="utf-8")
        if args.no_compose:
            continue
        bg = np.asarray(Image.open(images[recipe.background_photo_id]).convert("RGB"))
        crops = {}
        for p in recipe.placements:
            src = np.asarray(Image.open(images[p.detection.photo_id]).convert("RGB"))
            mask = np.asarray(Image.open(p.detection.mask_path).convert("L")) if p.detection.mask_path else None
            crops[p.detection] = cut_detection(src, p.detection, mask)
        Image.fromarray(compose_pastiche(recipe, bg, crops)).save(out / f"{stem}.png")
    print(f"recipes={args.n}\tout_dir={out}")


def cmd_synth_bench(args):
    from .pipeline import run_synth_bench

    t0 = time.perf_counter()
    reports = run_synth_bench(args.out, seed=args.seed, n_authors=args.authors,
                              per_author=args.per_author, k=args.k, C=args.C, threads=args.threads)
    for name, rep in reports.items():
        print(f"{name}\tmacro_f={rep.macro_f!r}")
    print(f"seconds={time.perf_counter() - t0:.1f}")


# ---------------------------------------------------------------- parser

def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    common.add_argument("--run-log", default=argparse.SUPPRESS)

    p = _Parser(prog="photoauthor", description="Photographer attribution and style analysis.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--threads", type=int, default=1, help="worker count for parallel stages")
    p.add_argument("--run-log", default=DEFAULT_RUN_LOG, help="append-only JSON-lines run log")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    def add(name, func, help):
        sp = sub.add_parser(name, parents=[common], help=help)
        sp.set_defaults(func=func)
        return sp

    sp = add("ingest", cmd_ingest, "validate an externally produced feature file")
    sp.add_argument("--feature-name", required=True)
    sp.add_argument("--in", dest="in_path", required=True)
    sp.add_argument("--expect-dim", type=int)
    sp.add_argument("--out")

    sp = add("split", cmd_split, "assign photos to test/validation/train")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--check-table", action="store_true", help="compare author counts with the built-in per-author totals")

    sp = add("vocab", cmd_vocab, "build a k-means visual vocabulary over SURF descriptors")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--k", type=int, default=500)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--split", help="restrict to training photos of this split")
    sp.add_argument("--exclude-validation", action="store_true")
    sp.add_argument("--max-sample", type=int, default=500_000)
    sp.add_argument("--root", help="image root (default: manifest directory)")

    sp = add("extract", cmd_extract, "compute a handcrafted feature for every photo")
    sp.add_argument("--feature", required=True, choices=["lab30", "gist", "surfbow500"])
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--vocab")
    sp.add_argument("--root")

    sp = add("train", cmd_train, "train a one-vs-all linear SVM")
    sp.add_argument("--feature", required=True)
    sp.add_argument("--split", required=True)
    sp.add_argument("--manifest")
    sp.add_argument("--C", type=float, default=1.0)
    sp.add_argument("--tol", type=float, default=0.1)
    sp.add_argument("--max-iter", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--exclude-validation", action="store_true")
    sp.add_argument("--out", required=True)

    sp = add("eval", cmd_eval, "score a model on the test split")
    sp.add_argument("--model", required=True)
    sp.add_argument("--feature", required=True)
    sp.add_argument("--split", required=True)
    sp.add_argument("--manifest")
    sp.add_argument("--report")

    sp = add("explain", cmd_explain, "nearest training photos under the SVM-weighted metric")
    sp.add_argument("--model", required=True)
    sp.add_argument("--feature", required=True)
    sp.add_argument("--split", required=True)
    sp.add_argument("--manifest")
    sp.add_argument("--test-id", action="append")
    sp.add_argument("--exclude-validation", action="store_true")

    sp = add("stylemap", cmd_stylemap, "collapse activations or SVM weights to coarse categories")
    sp.add_argument("--mode", choices=["mean", "svm"], required=True)
    sp.add_argument("--fc8")
    sp.add_argument("--model")
    sp.add_argument("--hierarchy", required=True)
    sp.add_argument("--chosen")
    sp.add_argument("--dims", help="synset id per feature dimension, one per line")
    sp.add_argument("--manifest")
    sp.add_argument("--fallback", default="other")
    sp.add_argument("--out")

    sp = add("topk", cmd_topk, "most represented categories for one author")
    sp.add_argument("--feature", required=True)
    sp.add_argument("--dims", required=True)
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--author", required=True)
    sp.add_argument("--k", type=int, default=10)

    sp = add("tsne", cmd_tsne, "2-d t-SNE embedding of feature rows")
    sp.add_argument("--feature", required=True)
    sp.add_argument("--perplexity", type=float, default=30.0)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--iterations", type=int, default=1000)
    sp.add_argument("--out", required=True)

    for name, func, need_out in (("dendro", cmd_dendro, True), ("cohesion", cmd_cohesion, False)):
        sp = add(name, func, "author dendrogram" if name == "dendro" else "group cohesion report")
        sp.add_argument("--feature", required=True)
        sp.add_argument("--manifest", required=True)
        sp.add_argument("--groups", required=not need_out)
        sp.add_argument("--metric", choices=["cosine", "euclidean"], default="cosine")
        sp.add_argument("--only-grouped", action="store_true", help="cluster only authors in --groups")
        sp.add_argument("--out", required=need_out)

    sp = add("pastiche", None, "fit or sample pastiche models")
    psub = sp.add_subparsers(dest="pastiche_command", metavar="action", parser_class=_Parser)
    psub.required = True
    fp = psub.add_parser("fit", parents=[common])
    fp.set_defaults(func=cmd_pastiche_fit)
    fp.add_argument("--author", required=True)
    fp.add_argument("--manifest", required=True)
    fp.add_argument("--scenes", required=True)
    fp.add_argument("--detections")
    fp.add_argument("--scene-types")
    fp.add_argument("--object-classes")
    fp.add_argument("--alpha", type=float, default=1.0)
    fp.add_argument("--min-score", type=float, default=0.0)
    fp.add_argument("--root")
    fp.add_argument("--out", required=True)
    sp_ = psub.add_parser("sample", parents=[common])
    sp_.set_defaults(func=cmd_pastiche_sample)
    sp_.add_argument("--model", required=True)
    sp_.add_argument("--seed", type=int, required=True)
    sp_.add_argument("--n", type=int, default=10)
    sp_.add_argument("--max-objects", type=int, default=5)
    sp_.add_argument("--max-retries", type=int, default=10)
    sp_.add_argument("--no-compose", action="store_true", help="write recipes only")
    sp_.add_argument("--out-dir", required=True)

    sp = add("synth-bench", cmd_synth_bench, "synthetic end-to-end attribution benchmark")
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--out", default="synth-bench")
    sp.add_argument("--authors", type=int, default=8)
    sp.add_argument("--per-author", type=int, default=200)
    sp.add_argument("--k", type=int, default=500)
    sp.add_argument("--C", type=float, default=1.0)
    return p


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    record = {"time": time.strftime("%Y-%m-%dT%H:%M:%S"), "argv": argv, "version": __version__}
    # honour --run-log even when the full parse fails
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--run-log", default=DEFAULT_RUN_LOG)
    run_log = pre.parse_known_args(argv)[0].run_log
    status = 1
    try:
        args = build_parser().parse_args(argv)
        run_log = args.run_log
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.threads < 1:
            raise BadFlag("--threads must be >= 1")
        record["config"] = _config(args)
        record["seed"] = getattr(args, "seed", None)
        record["inputs"] = _digests(args)
        args.func(args)
        status = 0
    except PhotoAuthorError as exc:
        print(f"ERROR {exc.code}: {_one_line(exc)}", file=sys.stderr)
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"ERROR {IoFailure.code}: {_one_line(exc)}", file=sys.stderr)
    except ValueError as exc:
        print(f"ERROR InvalidValue: {_one_line(exc)}", file=sys.stderr)
    except SystemExit as exc:       # --help / --version
        status = exc.code if isinstance(exc.code, int) else 0
        return status
    record["status"] = status
    try:
        _append_log(run_log, record)
    except OSError as exc:
        print(f"ERROR {IoFailure.code}: cannot append run log: {_one_line(exc)}", file=sys.stderr)
        status = status or 1
    return status


def _one_line(exc):
    return " ".join(str(exc).split())


if __name__ == "__main__":
    sys.exit(main())
