"""Collapse fine category activations to coarse semantic groups.

A 1000-way activation or SVM weight vector is reduced by mapping every
dimension's synset up a hypernym hierarchy to a chosen coarse synset and
averaging dimensions that share a coarse label.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import CyclicHierarchy, DimensionMismatch, MissingLabel, UnknownAuthor, UnknownSynset
from .featstore import FeatureMatrix

FALLBACK_LABEL = "other"


def load_hierarchy(path) -> dict[str, list[str]]:
    """Read ``child<TAB>parent`` edges into child -> parents."""
    parents = defaultdict(list)
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            child, parent = line.split("\t")[:2]
            if parent not in parents[child]:
                parents[child].append(parent)
    return dict(parents)


def load_chosen(path) -> dict[str, str]:
    """Read ``synset<TAB>display label`` lines (label defaults to the id)."""
    chosen = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            chosen[parts[0]] = parts[1] if len(parts) > 1 and parts[1] else parts[0]
    return chosen


def default_chosen_path() -> Path:
    return Path(__file__).with_name("data") / "coarse_synsets.tsv"


def synset_depths(hierarchy: Mapping[str, Sequence[str]]) -> dict[str, int]:
    """Longest-path distance of every node to a root (a node without parents)."""
    nodes = set(hierarchy)
    for ps in hierarchy.values():
        nodes.update(ps)
    depth: dict[str, int] = {}
    state: dict[str, int] = {}  # 1 = on stack, 2 = done

    for start in sorted(nodes):
        if state.get(start) == 2:
            continue
        stack = [(start, iter(hierarchy.get(start, ())))]
        state[start] = 1
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                stack.pop()
                ps = hierarchy.get(node, ())
                depth[node] = 1 + max(depth[p] for p in ps) if ps else 0
                state[node] = 2
            elif state.get(nxt) == 1:
                raise CyclicHierarchy(f"cycle through {nxt!r}")
            elif state.get(nxt) != 2:
                state[nxt] = 1
                stack.append((nxt, iter(hierarchy.get(nxt, ()))))
    return depth


def ancestors(hierarchy, node) -> set[str]:
    """All nodes reachable upward from ``node``, including itself."""
    seen = {node}
    todo = [node]
    while todo:
        for p in hierarchy.get(todo.pop(), ()):
            if p not in seen:
                seen.add(p)
                todo.append(p)
    return seen


@dataclass(frozen=True)
class CollapseMap:
    source_labels: tuple[str, ...]      # one synset per input dimension
    coarse_labels: tuple[str, ...]      # output schema, only labels with >= 1 dimension
    mapping: tuple[str, ...]            # dimension index -> coarse label

    def __post_init__(self):
        if len(self.mapping) != len(self.source_labels):
            raise ValueError("mapping must cover every dimension")
        if set(self.mapping) != set(self.coarse_labels):
            raise ValueError("coarse labels must be exactly the mapped labels")

    @property
    def dimension(self):
        return len(self.source_labels)

    def groups(self):
        pos = {c: i for i, c in enumerate(self.coarse_labels)}
        return np.array([pos[m] for m in self.mapping])

    def group_sizes(self):
        return np.bincount(self.groups(), minlength=len(self.coarse_labels))


def build_collapse_map(hierarchy: Mapping[str, Sequence[str]], dims: Sequence[str],
                       chosen: Mapping[str, str] | Sequence[str],
                       fallback_label: str = FALLBACK_LABEL) -> CollapseMap:
    """Map each dimension's synset to its deepest chosen ancestor (itself included).

    ``chosen`` is either synset ids or synset -> display label. Equal-depth
    candidates resolve to the smallest synset id. Dimensions without a chosen
    ancestor get ``fallback_label``.
    """
    if not dims:
        raise ValueError("dims must be nonempty")
    if not isinstance(chosen, Mapping):
        chosen = {c: c for c in chosen}
    depth = synset_depths(hierarchy)
    mapping = []
    for syn in dims:
        if syn not in depth:
            raise UnknownSynset(f"{syn!r} does not appear in the hierarchy")
        cands = [a for a in ancestors(hierarchy, syn) if a in chosen]
        if cands:
            best = min(cands, key=lambda a: (-depth[a], a))
            mapping.append(chosen[best])
        else:
            mapping.append(fallback_label)
    labels = sorted(set(mapping))
    return CollapseMap(tuple(dims), tuple(labels), tuple(mapping))


def collapse_vector(v, cmap: CollapseMap) -> np.ndarray:
    """Mean of ``v`` over the dimensions of each coarse label, in ``coarse_labels`` order."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != cmap.dimension:
        raise DimensionMismatch(f"vector length {v.shape[-1]} != map dimension {cmap.dimension}")
    g = cmap.groups()
    k = len(cmap.coarse_labels)
    onehot = np.zeros((cmap.dimension, k))
    onehot[np.arange(cmap.dimension), g] = 1.0
    return (v @ onehot) / np.bincount(g, minlength=k)


@dataclass
class ResponseMatrix:
    authors: list[str]
    labels: list[str]
    values: np.ndarray      # (authors, labels)

    @property
    def sign(self):
        """+1 / -1 / 0 per cell, for positive/negative colour coding."""
        return np.sign(self.values).astype(int)

    def to_tsv(self, path=None):
        lines = ["author\t" + "\t".join(self.labels)]
        for a, row in zip(self.authors, self.values):
            lines.append(a + "\t" + "\t".join(repr(float(v)) for v in row))
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def _author_means(features: FeatureMatrix, labels: Mapping[str, str]):
    missing = [p for p in features.ids if p not in labels]
    if missing:
        raise MissingLabel(f"{len(missing)} photos have no author label, e.g. {missing[0]!r}")
    by_author = defaultdict(list)
    for i, pid in enumerate(features.ids):
        by_author[labels[pid]].append(i)
    authors = sorted(by_author)
    vals = features.values.astype(np.float64)
    return authors, np.stack([vals[by_author[a]].mean(axis=0) for a in authors])


def author_response_matrix(features: FeatureMatrix, labels: Mapping[str, str], cmap: CollapseMap) -> ResponseMatrix:
    """Per-author mean activation, collapsed to coarse labels."""
    authors, means = _author_means(features, labels)
    return ResponseMatrix(authors, list(cmap.coarse_labels), collapse_vector(means, cmap))


def collapse_model_weights(model, cmap: CollapseMap) -> ResponseMatrix:
    """Collapse each class's SVM weights (bias excluded)."""
    if model.dimension != cmap.dimension:
        raise DimensionMismatch(f"model dim {model.dimension} != map dimension {cmap.dimension}")
    return ResponseMatrix(list(model.classes.authors), list(cmap.coarse_labels),
                          collapse_vector(model.weights, cmap))


def top_k_categories(features: FeatureMatrix, labels: Mapping[str, str], author_id: str, k: int,
                     dim_labels: Sequence[str]) -> list[str]:
    """The ``k`` dimension labels with the largest mean raw response for one author.

    Sorted by mean descending, ties by label.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(dim_labels) != features.dimension:
        raise DimensionMismatch(f"{len(dim_labels)} labels for {features.dimension} dimensions")
    ids = [p for p in features.ids if labels.get(p) == author_id]
    if not ids:
        raise UnknownAuthor(f"no photos for author {author_id!r}")
    mean = features.take(ids).astype(np.float64).mean(axis=0)
    order = sorted(range(len(dim_labels)), key=lambda j: (-mean[j], dim_labels[j]))
    return [dim_labels[j] for j in order[:k]]
