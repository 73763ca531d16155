"""One-vs-all linear SVMs for photographer attribution.

Each binary problem is the L2-regularised hinge-loss SVM solved in the dual by
coordinate descent over randomly permuted examples. The bias is learned as the
weight of an appended constant-1 feature, which keeps every coordinate update
closed-form and removes the equality constraint from the dual.
"""

from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .errors import (BadMagic, DimensionMismatch, EmptyClass, EmptyTestSet, IoFailure,
                     MissingFeatureRow, NonPositiveC, SingleClass, TruncatedFile)
from .featstore import AuthorIndex, FeatureMatrix

DEFAULT_C = 1.0
DEFAULT_TOL = 0.1
DEFAULT_MAX_ITER = 1000


@dataclass
class BinaryFit:
    w: np.ndarray          # includes the bias as last entry
    alpha: np.ndarray
    dual_objectives: list[float]
    n_iter: int
    converged: bool


def dual_objective(alpha, Xa, y):
    """sum(alpha) - 1/2 ||sum_i alpha_i y_i x_i||^2 over bias-augmented rows."""
    w = (alpha * y) @ Xa
    return float(alpha.sum() - 0.5 * w @ w)


def augment(X):
    X = np.asarray(X, dtype=np.float64)
    return np.hstack([X, np.ones((X.shape[0], 1))])


def dual_cd(Xa, y, C, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, rng=None, check=True) -> BinaryFit:
    """Dual coordinate descent for one binary problem with labels in {-1, +1}.

    Stops when max(PG) - min(PG) over an epoch drops below ``tol``.
    With ``check`` the box constraints and the per-epoch objective ascent are
    asserted.
    """
    if C <= 0:
        raise NonPositiveC(f"C must be positive, got {C}")
    rng = rng if rng is not None else np.random.default_rng(0)
    n, d = Xa.shape
    y = np.asarray(y, dtype=np.float64)
    alpha = np.zeros(n)
    w = np.zeros(d)
    qii = np.einsum("ij,ij->i", Xa, Xa)
    rows = [Xa[i] for i in range(n)]
    history = [0.0]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        pg_max, pg_min = -np.inf, np.inf
        for i in rng.permutation(n):
            xi = rows[i]
            yi = y[i]
            G = yi * w.dot(xi) - 1.0
            a = alpha[i]
            if a == 0.0:
                pg = min(G, 0.0)
            elif a == C:
                pg = max(G, 0.0)
            else:
                pg = G
            if pg > pg_max:
                pg_max = pg
            if pg < pg_min:
                pg_min = pg
            if pg != 0.0:
                new = min(max(a - G / qii[i], 0.0), C)
                if new != a:
                    w += (new - a) * yi * xi
                    alpha[i] = new
        obj = float(alpha.sum() - 0.5 * w.dot(w))
        if check:
            if alpha.min() < 0.0 or alpha.max() > C:
                raise AssertionError("dual variable left the box [0, C]")
            if obj < history[-1] - 1e-9 * max(1.0, abs(history[-1])):
                raise AssertionError(f"dual objective decreased: {history[-1]} -> {obj}")
        history.append(obj)
        if pg_max - pg_min < tol:
            converged = True
            break
    return BinaryFit(w, alpha, history, it, converged)


@dataclass
class LinearModel:
    classes: AuthorIndex
    weights: np.ndarray    # (n_classes, dim)
    biases: np.ndarray     # (n_classes,)
    C: float = DEFAULT_C
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    feature_name: str = ""
    seed: int = 0
    fits: list[BinaryFit] = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.biases = np.asarray(self.biases, dtype=np.float64)
        if self.weights.shape[0] != len(self.classes) or self.biases.shape != (len(self.classes),):
            raise ValueError("need one weight vector and one bias per class")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.biases))):
            raise ValueError("model parameters must be finite")

    @property
    def dimension(self):
        return self.weights.shape[1]

    def decision_function(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.dimension:
            raise DimensionMismatch(f"input dim {X.shape[-1]} != model dim {self.dimension}")
        return X @ self.weights.T + self.biases

    def save(self, path):
        write_model(self, path)

    @classmethod
    def load(cls, path):
        return read_model(path)


def _labels_for(features: FeatureMatrix, labels: Mapping[str, str], ids):
    missing = [p for p in ids if p not in features]
    if missing:
        raise MissingFeatureRow(f"{len(missing)} labelled photos have no feature row, e.g. {missing[0]!r}")
    return features.take(ids), [labels[p] for p in ids]


def train_ova_svm(features: FeatureMatrix, labels: Mapping[str, str], C=DEFAULT_C, tol=DEFAULT_TOL,
                  seed=0, max_iter=DEFAULT_MAX_ITER, ids: Sequence[str] | None = None,
                  classes: Sequence[str] | None = None, threads=1) -> LinearModel:
    """Train one binary SVM per author (author vs the rest).

    ``ids`` restricts training to a subset (e.g. the training split); by
    default every labelled photo is used. Class order defaults to sorted ids.
    """
    if C <= 0:
        raise NonPositiveC(f"C must be positive, got {C}")
    ids = list(labels) if ids is None else list(ids)
    X, y = _labels_for(features, labels, ids)
    classes = tuple(classes) if classes is not None else tuple(sorted(set(y)))
    if len(set(y)) < 2:
        raise SingleClass("training data contains fewer than two authors")
    Xa = augment(X)
    y_arr = np.array(y, dtype=object)

    def fit(c):
        target = np.where(y_arr == classes[c], 1.0, -1.0)
        rng = np.random.default_rng([seed, c])
        return dual_cd(Xa, target, C, tol, max_iter, rng)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            fits = list(pool.map(fit, range(len(classes))))
    else:
        fits = [fit(c) for c in range(len(classes))]
    W = np.stack([f.w[:-1] for f in fits])
    b = np.array([f.w[-1] for f in fits])
    return LinearModel(AuthorIndex(classes), W, b, C, tol, max_iter, features.feature_name, seed, fits)


def predict(model: LinearModel, x) -> str:
    """Author with the largest decision value (first one on ties)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch("predict takes a single vector")
    return model.classes[int(np.argmax(model.decision_function(x)))]


def predict_many(model: LinearModel, X) -> list[str]:
    return [model.classes[i] for i in np.argmax(model.decision_function(X), axis=1)]


@dataclass
class EvalReport:
    classes: list[str]
    confusion: np.ndarray   # rows: true, columns: predicted
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    macro_f: float
    micro_f: float
    macro_f_fraction: Fraction | None = field(default=None, compare=False)

    @property
    def support(self):
        return self.confusion.sum(axis=1)

    def to_text(self):
        lines = ["class\tprecision\trecall\tf1\tsupport"]
        for c, p, r, f, n in zip(self.classes, self.precision, self.recall, self.f1, self.support):
            lines.append(f"{c}\t{p:.6f}\t{r:.6f}\t{f:.6f}\t{n}")
        lines.append(f"macro_f\t{self.macro_f:.6f}")
        lines.append(f"micro_f\t{self.micro_f:.6f}")
        lines.append("confusion (rows true, cols predicted)")
        lines.append("\t" + "\t".join(self.classes))
        for c, row in zip(self.classes, self.confusion):
            lines.append(c + "\t" + "\t".join(str(int(v)) for v in row))
        return "\n".join(lines) + "\n"


def confusion_matrix(y_true, y_pred, classes):
    pos = {c: i for i, c in enumerate(classes)}
    cm = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        cm[pos[t], pos[p]] += 1
    return cm


def report_from_confusion(cm, classes) -> EvalReport:
    """Per-class P/R/F1 (F1 = 0 when TP = 0) and macro/micro averages.

    Macro-F is accumulated in exact rational arithmetic, so the only rounding
    is the final conversion to float.
    """
    cm = np.asarray(cm, dtype=np.int64)
    tp = np.diag(cm)
    pred_tot = cm.sum(axis=0)
    true_tot = cm.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(pred_tot > 0, tp / np.maximum(pred_tot, 1), 0.0)
        recall = np.where(true_tot > 0, tp / np.maximum(true_tot, 1), 0.0)
    f_exact = [Fraction(0) if t == 0 else Fraction(2 * int(t), int(2 * t + (pt - t) + (tt - t)))
               for t, pt, tt in zip(tp, pred_tot, true_tot)]
    f1 = np.array([float(f) for f in f_exact])
    macro = sum(f_exact, Fraction(0)) / len(f_exact) if f_exact else Fraction(0)
    total = int(cm.sum())
    micro = float(Fraction(int(tp.sum()), total)) if total else 0.0
    return EvalReport(list(classes), cm, precision, recall, f1, float(macro), micro, macro)


def evaluate_predictions(y_true, y_pred, classes=None) -> EvalReport:
    if len(y_true) == 0:
        raise EmptyTestSet("no test examples")
    if classes is None:
        classes = sorted(set(y_true) | set(y_pred))
    else:
        classes = list(classes) + sorted((set(y_true) | set(y_pred)) - set(classes))
    return report_from_confusion(confusion_matrix(y_true, y_pred, classes), classes)


def evaluate(model: LinearModel, features: FeatureMatrix, labels: Mapping[str, str],
             test_ids: Sequence[str]) -> EvalReport:
    """Score ``model`` on ``test_ids``; the label universe is the model's classes plus any test labels."""
    test_ids = list(test_ids)
    if not test_ids:
        raise EmptyTestSet("test set is empty")
    X, y_true = _labels_for(features, labels, test_ids)
    return evaluate_predictions(y_true, predict_many(model, X), model.classes.authors)


def weighted_distances(w, x, Z):
    return (np.abs(w) * (Z - x) ** 2).sum(axis=1)


def weighted_nn_explain(model: LinearModel, features: FeatureMatrix, test_id, predicted_class,
                        true_class, labels: Mapping[str, str], train_ids: Sequence[str] | None = None):
    """Closest training photo from the predicted and from the true class.

    Searching class c uses distance sum_j |w_cj| (x_j - z_j)^2 with that class's
    SVM weights. Returns ``(photo_id_in_predicted, photo_id_in_true)``; ties go
    to the earlier id in ``train_ids`` order.
    """
    x = features.row(test_id).astype(np.float64)
    if train_ids is None:
        train_ids = [p for p in labels if p != test_id and p in features]
    out = []
    for cls in (predicted_class, true_class):
        pool = [p for p in train_ids if labels.get(p) == cls]
        if not pool:
            raise EmptyClass(f"no training images for class {cls!r}")
        w = model.weights[model.classes.position(cls)]
        d = weighted_distances(w, x, features.take(pool).astype(np.float64))
        out.append(pool[int(np.argmin(d))])
    return tuple(out)


# --- model file ---------------------------------------------------------------
# b"PSVM" | u32 version | u32 dim | u32 n_classes
# n_classes x (u32 len | utf-8 author id)
# n_classes x (dim x f64 weights | f64 bias)
# f64 C | f64 tol | u32 max_iter | u64 seed | u32 len | utf-8 feature name

MODEL_MAGIC = b"PSVM"
MODEL_VERSION = 1


def encode_model(model: LinearModel) -> bytes:
    parts = [MODEL_MAGIC, struct.pack("<III", MODEL_VERSION, model.dimension, len(model.classes))]
    for a in model.classes.authors:
        raw = a.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)) + raw)
    for w, b in zip(model.weights, model.biases):
        parts.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        parts.append(struct.pack("<d", b))
    name = model.feature_name.encode("utf-8")
    parts.append(struct.pack("<ddIQI", model.C, model.tol, model.max_iter, model.seed, len(name)))
    parts.append(name)
    return b"".join(parts)


def write_model(model: LinearModel, path):
    try:
        with open(path, "wb") as fh:
            fh.write(encode_model(model))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def decode_model(buf: bytes) -> LinearModel:
    if buf[:4] != MODEL_MAGIC:
        raise BadMagic("not a PSVM model file")
    off = 4

    def take(n):
        nonlocal off
        if off + n > len(buf):
            raise TruncatedFile("model file is truncated")
        chunk = buf[off:off + n]
        off += n
        return chunk

    version, dim, n_cls = struct.unpack("<III", take(12))
    if version != MODEL_VERSION:
        raise BadMagic(f"unsupported model version {version}")
    authors = []
    for _ in range(n_cls):
        (n,) = struct.unpack("<I", take(4))
        authors.append(take(n).decode("utf-8"))
    W = np.empty((n_cls, dim))
    b = np.empty(n_cls)
    for c in range(n_cls):
        W[c] = np.frombuffer(take(8 * dim), dtype="<f8")
        (b[c],) = struct.unpack("<d", take(8))
    C, tol, max_iter, seed, n = struct.unpack("<ddIQI", take(32))
    name = take(n).decode("utf-8")
    return LinearModel(AuthorIndex(tuple(authors)), W, b, C, tol, max_iter, name, seed)


def read_model(path) -> LinearModel:
    with open(path, "rb") as fh:
        return decode_model(fh.read())
