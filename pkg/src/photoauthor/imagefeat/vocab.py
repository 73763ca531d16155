"""Visual vocabulary (k-means++ / Lloyd) and bag-of-words histograms."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionMismatch, TooFewDescriptors

CHUNK = 4096
MAX_ITER = 300
MAX_SAMPLE = 500_000


@dataclass
class Vocabulary:
    centroids: np.ndarray
    seed: int = 0
    final_objective: float = float("nan")
    objective_history: list[float] = field(default_factory=list, repr=False)
    n_iter: int = 0

    @property
    def k(self):
        return self.centroids.shape[0]

    def save(self, path):
        np.savez(path, centroids=self.centroids, seed=self.seed,
                 final_objective=self.final_objective,
                 objective_history=np.asarray(self.objective_history), n_iter=self.n_iter)

    @classmethod
    def load(cls, path):
        with np.load(path) as z:
            return cls(z["centroids"], int(z["seed"]), float(z["final_objective"]),
                       list(z["objective_history"]), int(z["n_iter"]))


def _sq_dists(X, C, c_sq):
    # clipped: the expanded form can go slightly negative
    d = (X * X).sum(1)[:, None] - 2.0 * X @ C.T + c_sq[None, :]
    return np.maximum(d, 0.0)


def _exact_sq(X, C):
    diff = X - C
    return (diff * diff).sum(1)


def kmeans_plusplus(X, k, rng):
    n = X.shape[0]
    idx = [int(rng.integers(n))]
    closest = _exact_sq(X, X[idx[0]][None, :])
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0:
            # all points already coincide with a centre; pick any unused index
            remaining = np.setdiff1d(np.arange(n), idx)
            nxt = int(remaining[rng.integers(len(remaining))])
        else:
            nxt = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
            nxt = min(nxt, n - 1)
        idx.append(nxt)
        closest = np.minimum(closest, _exact_sq(X, X[nxt][None, :]))
    return X[idx].copy()


def _objective(X, C, labels):
    total = 0.0
    for s in range(0, X.shape[0], CHUNK):
        total += float(_exact_sq(X[s:s + CHUNK], C[labels[s:s + CHUNK]]).sum())
    return total


def _update(X, labels, k, old):
    # fixed chunk order keeps the accumulation schedule-independent
    sums = np.zeros((k, X.shape[1]))
    counts = np.zeros(k, dtype=np.int64)
    for s in range(0, X.shape[0], CHUNK):
        lab = labels[s:s + CHUNK]
        np.add.at(sums, lab, X[s:s + CHUNK])
        counts += np.bincount(lab, minlength=k)
    C = old.copy()
    nz = counts > 0
    C[nz] = sums[nz] / counts[nz, None]
    return C, counts


def lloyd(X, init, max_iter=MAX_ITER, check_monotone=True):
    """Run Lloyd iterations from ``init`` until the assignment stops changing.

    A point only changes cluster when its exact squared distance strictly
    improves, and an emptied cluster is moved onto the point farthest from its
    centre, so the recorded objective never increases.
    Returns (centroids, labels, objective history, iterations).
    """
    X = np.asarray(X, dtype=np.float64)
    C = np.array(init, dtype=np.float64)
    k = C.shape[0]
    labels = np.full(X.shape[0], -1, dtype=np.int64)
    history = []
    it = 0
    for it in range(1, max_iter + 1):
        changed = False
        c_sq = (C * C).sum(1)
        for s in range(0, X.shape[0], CHUNK):
            xs = X[s:s + CHUNK]
            cand = np.argmin(_sq_dists(xs, C, c_sq), axis=1)
            cur = labels[s:s + CHUNK]
            if it == 1:
                labels[s:s + CHUNK] = cand
                changed = True
                continue
            d_new = _exact_sq(xs, C[cand])
            d_cur = _exact_sq(xs, C[cur])
            move = (d_new < d_cur) & (cand != cur)
            if move.any():
                cur[move] = cand[move]
                changed = True
        if not changed:
            break
        C, counts = _update(X, labels, k, C)
        for j in np.nonzero(counts == 0)[0]:
            d = _exact_sq(X, C[labels])
            far = int(np.argmax(d))
            if d[far] <= 0:
                break
            labels[far] = j
            C, counts = _update(X, labels, k, C)
        obj = _objective(X, C, labels)
        if check_monotone and history and obj > history[-1] * (1 + 1e-12) + 1e-300:
            raise AssertionError(f"k-means objective increased at iteration {it}: {history[-1]} -> {obj}")
        history.append(obj)
    return C, labels, history, it


def build_vocabulary(descriptors, k=500, seed=0, max_iter=MAX_ITER, max_sample=MAX_SAMPLE) -> Vocabulary:
    """Cluster a pooled descriptor sample into ``k`` visual words."""
    X = np.asarray(descriptors, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("descriptors must be a 2-d array")
    if k < 1:
        raise ValueError("k must be >= 1")
    if X.shape[0] < k:
        raise TooFewDescriptors(f"{X.shape[0]} descriptors for k={k}")
    rng = np.random.default_rng(seed)
    if X.shape[0] > max_sample:
        X = X[np.sort(rng.choice(X.shape[0], max_sample, replace=False))]
    init = kmeans_plusplus(X, k, rng)
    C, labels, history, n_iter = lloyd(X, init, max_iter)
    return Vocabulary(C, seed, history[-1] if history else _objective(X, C, labels), history, n_iter)


def assign(descriptors, centroids):
    """Nearest centroid by exact Euclidean distance; ties go to the lower index."""
    X = np.asarray(descriptors, dtype=np.float64)
    C = np.asarray(centroids, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != C.shape[1]:
        raise DimensionMismatch(f"descriptor dim {X.shape[-1]} != vocabulary dim {C.shape[1]}")
    out = np.empty(X.shape[0], dtype=np.int64)
    step = max(1, 2_000_000 // max(1, C.size))
    for s in range(0, X.shape[0], step):
        diff = X[s:s + step, None, :] - C[None, :, :]
        out[s:s + step] = np.argmin((diff * diff).sum(2), axis=1)
    return out


def bow_encode(descriptors, vocab) -> np.ndarray:
    """L1-normalised visual-word histogram; all zeros when there are no descriptors."""
    C = vocab.centroids if isinstance(vocab, Vocabulary) else np.asarray(vocab)
    X = getattr(descriptors, "descriptors", descriptors)
    X = np.asarray(X, dtype=np.float64)
    if X.size == 0:
        return np.zeros(C.shape[0])
    if X.ndim != 2 or X.shape[1] != C.shape[1]:
        raise DimensionMismatch(f"descriptor dim {X.shape[-1]} != vocabulary dim {C.shape[1]}")
    counts = np.bincount(assign(X, C), minlength=C.shape[0])
    return counts / counts.sum()
