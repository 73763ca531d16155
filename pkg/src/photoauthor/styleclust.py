"""Style-space embeddings (exact t-SNE) and photographer dendrograms."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import BadPerplexity, DimensionMismatch, TooFewAuthors, TooFewPoints, UnknownAuthorInGroups

# ---------------------------------------------------------------- t-SNE


@dataclass
class Embedding2D:
    ids: list[str]
    coords: np.ndarray
    kl: float
    iterations: int
    perplexity: float
    seed: int
    kl_history: list[float] = field(default_factory=list, repr=False)
    entropies: np.ndarray | None = field(default=None, repr=False)  # bits, per point

    def to_tsv(self, path=None):
        text = "".join(f"{i}\t{x!r}\t{y!r}\n" for i, (x, y) in zip(self.ids, self.coords.tolist()))
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def squared_distances(X):
    X = np.asarray(X, dtype=np.float64)
    sq = (X * X).sum(1)
    D = sq[:, None] - 2 * X @ X.T + sq[None, :]
    np.fill_diagonal(D, 0.0)
    return np.maximum(D, 0.0)


def _row_probs(d, beta):
    # d excludes self; shift by min for stability
    e = np.exp(-(d - d.min()) * beta)
    p = e / e.sum()
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -np.sum(np.where(p > 0, p * np.log(p), 0.0))
    return p, h / np.log(2)


def conditional_probabilities(D, perplexity, tol=1e-6, max_steps=200):
    """Row-stochastic p_{j|i} with each row's entropy matched to log2(perplexity) by bisection.

    Returns (P, entropies in bits).
    """
    n = D.shape[0]
    target = np.log2(perplexity)
    P = np.zeros((n, n))
    H = np.zeros(n)
    for i in range(n):
        d = np.delete(D[i], i)
        lo, hi = 0.0, np.inf
        beta = 1.0 / max(np.median(d), 1e-12)
        p, h = _row_probs(d, beta)
        for _ in range(max_steps):
            if abs(h - target) < tol:
                break
            if h > target:
                lo = beta
                beta = beta * 2 if hi == np.inf else (beta + hi) / 2
            else:
                hi = beta
                beta = (beta + lo) / 2
            p, h = _row_probs(d, beta)
        P[i, np.arange(n) != i] = p
        H[i] = h
    return P, H


def _student_kernel(Y):
    num = 1.0 / (1.0 + squared_distances(Y))
    np.fill_diagonal(num, 0.0)
    return num


def _kl(P, Q):
    mask = P > 0
    return float(np.sum(P[mask] * np.log(P[mask] / Q[mask])))


def tsne_embed(X, perplexity=30.0, iterations=1000, seed=0, ids=None, learning_rate=200.0,
               exaggeration=4.0, exaggeration_iters=100) -> Embedding2D:
    """Exact t-SNE to two dimensions.

    Gradient descent with momentum (0.5, then 0.8 after 250 steps) and
    per-coordinate gains; P is multiplied by ``exaggeration`` for the first
    ``exaggeration_iters`` steps. Initial points are N(0, 1e-4) from ``seed``.
    Once exaggeration is over, a step that would raise the KL divergence is
    rejected, momentum is reset and the gains are halved, so the recorded KL
    never increases in that phase.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if not np.isfinite(perplexity) or perplexity <= 0:
        raise BadPerplexity(f"perplexity must be positive, got {perplexity}")
    if n < 3 * perplexity:
        raise TooFewPoints(f"{n} points is fewer than 3 x perplexity ({perplexity})")
    if ids is None:
        ids = [str(i) for i in range(n)]
    Pc, H = conditional_probabilities(squared_distances(X), perplexity)
    P = (Pc + Pc.T) / (2 * n)

    rng = np.random.default_rng(seed)
    Y = rng.normal(scale=1e-2, size=(n, 2))
    update = np.zeros_like(Y)
    gains = np.ones_like(Y)
    num = _student_kernel(Y)
    kl = _kl(P, np.maximum(num / num.sum(), 1e-300))
    history = [kl]
    for it in range(iterations):
        Pe = P * exaggeration if it < exaggeration_iters else P
        Q = num / num.sum()
        W = (Pe - Q) * num
        grad = 4.0 * ((np.diag(W.sum(1)) - W) @ Y)
        momentum = 0.5 if it < 250 else 0.8
        same = np.sign(grad) == np.sign(update)
        gains = np.where(same, gains * 0.8, gains + 0.2)
        np.maximum(gains, 0.01, out=gains)
        step = momentum * update - learning_rate * gains * grad
        Y_new = Y + step
        Y_new -= Y_new.mean(axis=0)
        num_new = _student_kernel(Y_new)
        kl_new = _kl(P, np.maximum(num_new / num_new.sum(), 1e-300))
        if it >= exaggeration_iters and kl_new > kl:
            # reject the step: drop momentum and shrink the gains
            update = np.zeros_like(Y)
            gains = np.maximum(gains * 0.5, 0.01)
        else:
            Y, num, kl, update = Y_new, num_new, kl_new, step
        history.append(kl)
    return Embedding2D(list(ids), Y, kl, iterations, float(perplexity), seed, history, H)


# ---------------------------------------------------------------- dendrogram


def pairwise_distances(V, metric="cosine"):
    V = np.asarray(V, dtype=np.float64)
    if metric == "euclidean":
        diff = V[:, None, :] - V[None, :, :]
        return np.sqrt((diff * diff).sum(-1))
    if metric == "cosine":
        norms = np.linalg.norm(V, axis=1)
        norms[norms == 0] = 1.0
        U = V / norms[:, None]
        D = 1.0 - U @ U.T
        np.fill_diagonal(D, 0.0)
        return np.maximum(D, 0.0)
    raise ValueError(f"unknown metric {metric!r}")


@dataclass
class Dendrogram:
    leaves: list[str]
    merges: list[tuple[int, int, float, int]]   # (cluster a, cluster b, height, new id)

    @property
    def n_nodes(self):
        return 2 * len(self.leaves) - 1

    def children(self):
        return {new: (a, b) for a, b, _, new in self.merges}

    def heights(self):
        h = {i: 0.0 for i in range(len(self.leaves))}
        h.update({new: height for _, _, height, new in self.merges})
        return h

    def leaf_sets(self):
        sets = {i: frozenset([self.leaves[i]]) for i in range(len(self.leaves))}
        for a, b, _, new in self.merges:
            sets[new] = sets[a] | sets[b]
        return sets

    def label(self, node):
        return self.leaves[node] if node < len(self.leaves) else f"#{node}"

    def to_newick(self):
        n = len(self.leaves)
        if not self.merges:
            return f"{self.leaves[0]};"
        kids = self.children()
        heights = self.heights()

        def rec(node):
            if node < n:
                return self.leaves[node]
            a, b = kids[node]
            return f"({rec(a)},{rec(b)}):{heights[node]!r}"

        return rec(self.merges[-1][3]) + ";"

    def to_text(self, path=None):
        lines = [f"({self.label(a)}, {self.label(b)}, {h!r})" for a, b, h, _ in self.merges]
        lines.append(self.to_newick())
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def author_means(features, labels: Mapping[str, str]):
    """Mean feature vector per author, authors sorted."""
    by_author: dict[str, list[int]] = {}
    for i, pid in enumerate(features.ids):
        if pid in labels:
            by_author.setdefault(labels[pid], []).append(i)
    authors = sorted(by_author)
    vals = features.values.astype(np.float64)
    return {a: vals[by_author[a]].mean(axis=0) for a in authors}


def agglomerative_dendrogram(vectors: Mapping[str, np.ndarray], metric="cosine", linkage="average") -> Dendrogram:
    """Average-linkage agglomerative clustering of author vectors.

    Leaves are numbered 0..N-1 in sorted author order, merge k creates cluster
    N + k. Equal heights are broken by the lexicographically smallest member id
    of the pair, then by the other cluster's smallest member id.
    """
    if linkage != "average":
        raise ValueError("only average linkage is supported")
    authors = sorted(vectors)
    if len(authors) < 2:
        raise TooFewAuthors("need at least two authors")
    dims = {np.asarray(vectors[a]).shape for a in authors}
    if len(dims) != 1 or len(next(iter(dims))) != 1:
        raise DimensionMismatch("author vectors must be 1-d and share one dimension")
    n = len(authors)
    D = pairwise_distances(np.stack([vectors[a] for a in authors]), metric)
    # S[a, b]: sum of leaf-pair distances between active clusters a and b
    S = np.zeros((2 * n - 1, 2 * n - 1))
    S[:n, :n] = D
    size = {i: 1 for i in range(n)}
    first = {i: authors[i] for i in range(n)}
    active = list(range(n))
    merges = []
    for k in range(n - 1):
        best = None
        for ia, a in enumerate(active):
            for b in active[ia + 1:]:
                h = S[a, b] / (size[a] * size[b])
                lo, hi = sorted((first[a], first[b]))
                key = (h, lo, hi)
                if best is None or key < best[0]:
                    best = (key, a, b)
        (h, _, _), a, b = best
        if first[b] < first[a]:
            a, b = b, a
        new = n + k
        active = [c for c in active if c not in (a, b)]
        for c in active:
            S[new, c] = S[c, new] = S[a, c] + S[b, c]
        active.append(new)
        size[new] = size[a] + size[b]
        first[new] = min(first[a], first[b])
        merges.append((a, b, float(h), new))
    return Dendrogram(authors, merges)


@dataclass
class CohesionEntry:
    tag: str
    group_size: int
    captured: int
    intruders: int
    height: float
    node: int
    members: list[str]

    @property
    def score(self):
        return self.captured - self.intruders


def group_cohesion_report(dendro: Dendrogram, groups: Mapping[str, str]) -> list[CohesionEntry]:
    """For every group tag, the subtree maximising members - non-members.

    Ties prefer more captured members, then a lower subtree, then the lower node id.
    """
    if not groups:
        raise ValueError("groups must be nonempty")
    unknown = set(groups) - set(dendro.leaves)
    if unknown:
        raise UnknownAuthorInGroups(f"authors not in dendrogram: {sorted(unknown)}")
    sets = dendro.leaf_sets()
    heights = dendro.heights()
    out = []
    for tag in sorted(set(groups.values())):
        members = {a for a, t in groups.items() if t == tag}
        best = None
        for node in range(dendro.n_nodes):
            leaves = sets[node]
            cap = len(leaves & members)
            intr = len(leaves) - cap
            key = (-(cap - intr), -cap, heights[node], node)
            if best is None or key < best[0]:
                best = (key, node, cap, intr)
        _, node, cap, intr = best
        out.append(CohesionEntry(tag, len(members), cap, intr, heights[node], node, sorted(sets[node])))
    return out


def cohesion_text(entries: Sequence[CohesionEntry]):
    lines = ["tag\tgroup_size\tcaptured\tintruders\theight\tsubtree"]
    for e in entries:
        lines.append(f"{e.tag}\t{e.group_size}\t{e.captured}\t{e.intruders}\t{e.height!r}\t{','.join(e.members)}")
    return "\n".join(lines) + "\n"


def load_groups(path) -> dict[str, str]:
    groups = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line and not line.startswith("#"):
                author, tag = line.split("\t")[:2]
                groups[author] = tag
    return groups
