from fractions import Fraction

import numpy as np
import pytest

from oracles import macro_f_direct, macro_f_exact, svm_dual_objective, svm_dual_qp
from photoauthor.attribclf import (LinearModel, augment, decode_model, dual_cd, encode_model,
                                   evaluate, evaluate_predictions, predict, predict_many, read_model,
                                   report_from_confusion, train_ova_svm, weighted_nn_explain, write_model)
from photoauthor.errors import (BadMagic, DimensionMismatch, EmptyClass, EmptyTestSet, MissingFeatureRow,
                                NonPositiveC, SingleClass)
from photoauthor.featstore import AuthorIndex, FeatureMatrix


def _fm(X, prefix="p"):
    return FeatureMatrix("x", [f"{prefix}{i}" for i in range(len(X))], X)


def _blobs(rng, n_classes=3, per=20, dim=4, spread=0.5):
    centers = rng.normal(scale=4, size=(n_classes, dim))
    X = np.concatenate([c + spread * rng.normal(size=(per, dim)) for c in centers])
    labels = {f"p{i}": f"c{i // per}" for i in range(n_classes * per)}
    return _fm(X), labels


# ---------------------------------------------------------------- solver

def test_separable_toy():
    X = np.array([[2.0, 2.0], [3.0, 1.0], [-2.0, -1.0], [-1.0, -3.0]])
    fm = _fm(X)
    labels = {"p0": "A", "p1": "A", "p2": "B", "p3": "B"}
    m = train_ova_svm(fm, labels, tol=1e-6)
    assert predict_many(m, X) == ["A", "A", "B", "B"]
    y = np.array([1, 1, -1, -1])
    margins = y * (X @ m.weights[0] + m.biases[0])
    assert margins.min() > 0


def test_dual_matches_qp_oracle(rng):
    X = rng.normal(size=(10, 3))
    y = np.array([1.0, -1.0] * 5)
    _, best = svm_dual_qp(X, y, 1.0)
    fit = dual_cd(augment(X), y, 1.0, tol=1e-8, max_iter=100_000, rng=rng)
    assert svm_dual_objective(fit.alpha, X, y) == pytest.approx(best, abs=1e-5)


def test_box_and_ascent_recorded(rng):
    X = rng.normal(size=(40, 5))
    y = np.where(rng.random(40) < 0.5, 1.0, -1.0)
    for C in (0.1, 1.0, 10.0):
        fit = dual_cd(augment(X), y, C, tol=1e-4, rng=np.random.default_rng(0))
        assert (fit.alpha >= 0).all() and (fit.alpha <= C).all()
        h = np.array(fit.dual_objectives)
        assert (np.diff(h) >= -1e-9 * np.maximum(1, np.abs(h[:-1]))).all()
        np.testing.assert_allclose(fit.w, (fit.alpha * y) @ augment(X), atol=1e-10)


def test_inactive_duplicate_leaves_optimum(rng):
    X = np.concatenate([rng.normal(2, 0.5, size=(15, 2)), rng.normal(-2, 0.5, size=(15, 2))])
    y = np.array([1.0] * 15 + [-1.0] * 15)
    fit = dual_cd(augment(X), y, 1.0, tol=1e-10, max_iter=100_000, rng=np.random.default_rng(1))
    margin = y * (augment(X) @ fit.w)
    i = int(np.argmax(margin))
    assert fit.alpha[i] == 0 and margin[i] > 1
    X2, y2 = np.vstack([X, X[i]]), np.append(y, y[i])
    fit2 = dual_cd(augment(X2), y2, 1.0, tol=1e-10, max_iter=100_000, rng=np.random.default_rng(1))
    np.testing.assert_allclose(fit2.w, fit.w, atol=1e-6)


def test_training_errors(rng):
    fm, labels = _blobs(rng)
    with pytest.raises(NonPositiveC):
        train_ova_svm(fm, labels, C=0)
    with pytest.raises(SingleClass):
        train_ova_svm(fm, {p: "same" for p in labels})
    with pytest.raises(MissingFeatureRow):
        train_ova_svm(fm, {**labels, "ghost": "c0"})


def test_deterministic_and_thread_independent(rng):
    fm, labels = _blobs(rng, n_classes=4)
    a = train_ova_svm(fm, labels, seed=9)
    b = train_ova_svm(fm, labels, seed=9)
    c = train_ova_svm(fm, labels, seed=9, threads=3)
    np.testing.assert_array_equal(a.weights, b.weights)
    np.testing.assert_array_equal(a.weights, c.weights)
    np.testing.assert_array_equal(a.biases, c.biases)


# ---------------------------------------------------------------- prediction

def test_predict_dominant_and_antisymmetric():
    w = np.array([[1.0, 0.0], [-1.0, 0.0]])
    m = LinearModel(AuthorIndex(("one", "two")), w, np.zeros(2))
    assert predict(m, np.array([3.0, 0.0])) == "one"
    assert predict(m, np.array([-3.0, 0.0])) == "two"
    m3 = LinearModel(AuthorIndex(("a", "b", "c")), np.eye(3) * 10, np.zeros(3))
    assert predict(m3, np.array([0.0, 1.0, 0.0])) == "b"
    assert predict(LinearModel(AuthorIndex(("a", "b")), np.zeros((2, 2)), np.zeros(2)), np.ones(2)) == "a"
    with pytest.raises(DimensionMismatch):
        predict(m, np.ones(3))


def test_predict_scan_oracle(rng):
    m = LinearModel(AuthorIndex(tuple("abcde")), rng.normal(size=(5, 7)), rng.normal(size=5))
    for _ in range(100):
        x = rng.normal(size=7)
        scores = [sum(m.weights[c, j] * x[j] for j in range(7)) + m.biases[c] for c in range(5)]
        best = max(range(5), key=lambda c: (scores[c], -c))
        assert predict(m, x) == "abcde"[best]
        shifted = LinearModel(m.classes, m.weights, m.biases + 123.0)
        assert predict(shifted, x) == predict(m, x)


def test_model_file_roundtrip(tmp_path, rng):
    fm, labels = _blobs(rng)
    m = train_ova_svm(fm, labels, C=0.5, seed=4)
    write_model(m, tmp_path / "m.psvm")
    back = read_model(tmp_path / "m.psvm")
    np.testing.assert_array_equal(back.weights, m.weights)
    np.testing.assert_array_equal(back.biases, m.biases)
    assert back.classes == m.classes and back.C == 0.5 and back.seed == 4 and back.feature_name == "x"
    raw = encode_model(m)
    assert raw[:4] == b"PSVM"
    with pytest.raises(BadMagic):
        decode_model(b"XSVM" + raw[4:])


# ---------------------------------------------------------------- evaluation

def test_worked_example_is_four_ninths():
    rep = evaluate_predictions(list("AABBCC"), list("AABCAA"))
    assert rep.macro_f_fraction == Fraction(4, 9)
    assert rep.macro_f == 4 / 9
    np.testing.assert_allclose(rep.f1, [2 / 3, 2 / 3, 0.0])
    assert macro_f_exact(list("AABBCC"), list("AABCAA")) == Fraction(4, 9)


def test_perfect_predictions():
    assert evaluate_predictions(list("ABCA"), list("ABCA")).macro_f == 1.0


def test_macro_f_random_confusions(rng):
    worst = 0.0
    for _ in range(1000):
        k = int(rng.integers(2, 12))
        cm = rng.integers(0, 20, size=(k, k)) * (rng.random((k, k)) < 0.7)
        rep = report_from_confusion(cm, [str(i) for i in range(k)])
        worst = max(worst, abs(rep.macro_f - macro_f_direct(cm)))
        assert 0 <= rep.macro_f <= 1
    assert worst <= 1e-12


def test_confusion_rows_are_supports(rng):
    y = [str(v) for v in rng.integers(0, 4, 200)]
    p = [str(v) for v in rng.integers(0, 4, 200)]
    rep = evaluate_predictions(y, p)
    for c, n in zip(rep.classes, rep.support):
        assert n == y.count(c)


def test_chance_level(rng):
    classes = [f"a{i}" for i in range(41)]
    y = [c for c in classes for _ in range(100)]
    scores = []
    for seed in range(10):
        r = np.random.default_rng(seed)
        pred = [classes[i] for i in r.integers(0, 41, len(y))]
        scores.append(evaluate_predictions(y, pred, classes).macro_f)
    assert abs(np.mean(scores) - 0.0244) <= 0.005


def test_evaluate_model(rng):
    fm, labels = _blobs(rng, spread=0.1)
    m = train_ova_svm(fm, labels)
    rep = evaluate(m, fm, labels, list(labels))
    assert rep.macro_f == 1.0
    with pytest.raises(EmptyTestSet):
        evaluate(m, fm, labels, [])


# ---------------------------------------------------------------- explanation

def test_weighted_nn_uniform_weights_is_plain_nn(rng):
    X = rng.normal(size=(20, 3))
    fm = _fm(X)
    labels = {f"p{i}": "A" if i < 10 else "B" for i in range(20)}
    m = LinearModel(AuthorIndex(("A", "B")), np.ones((2, 3)), np.zeros(2))
    train = [f"p{i}" for i in range(1, 20)]
    got = weighted_nn_explain(m, fm, "p0", "B", "A", labels, train)
    d = ((X - X[0]) ** 2).sum(1)
    assert got == (f"p{10 + int(np.argmin(d[10:]))}", f"p{1 + int(np.argmin(d[1:10]))}")


def test_weighted_nn_self_match(rng):
    X = rng.normal(size=(6, 2))
    X[5] = X[2]
    fm = _fm(X)
    labels = {f"p{i}": "A" if i < 3 else "B" for i in range(6)}
    m = LinearModel(AuthorIndex(("A", "B")), rng.normal(size=(2, 2)), np.zeros(2))
    _, true_nn = weighted_nn_explain(m, fm, "p5", "B", "A", labels, ["p0", "p1", "p2", "p3", "p4"])
    assert true_nn == "p2"


def test_weighted_nn_scan_oracle(rng):
    X = rng.normal(size=(20, 4))
    fm = _fm(X)
    labels = {f"p{i}": "ABC"[i % 3] for i in range(20)}
    m = LinearModel(AuthorIndex(tuple("ABC")), rng.normal(size=(3, 4)), np.zeros(3))
    train = [f"p{i}" for i in range(1, 20)]
    for pred, true in [("B", "A"), ("C", "A"), ("A", "A")]:
        expect = []
        for cls in (pred, true):
            w = m.weights["ABC".index(cls)]
            best = None
            for i in range(1, 20):
                if labels[f"p{i}"] != cls:
                    continue
                d = sum(abs(w[j]) * (X[0, j] - X[i, j]) ** 2 for j in range(4))
                if best is None or d < best[0]:
                    best = (d, f"p{i}")
            expect.append(best[1])
        assert weighted_nn_explain(m, fm, "p0", pred, true, labels, train) == tuple(expect)


def test_weighted_nn_empty_class(rng):
    fm = _fm(rng.normal(size=(3, 2)))
    labels = {"p0": "A", "p1": "A", "p2": "B"}
    m = LinearModel(AuthorIndex(("A", "B")), np.ones((2, 2)), np.zeros(2))
    with pytest.raises(EmptyClass):
        weighted_nn_explain(m, fm, "p2", "A", "B", labels, ["p0", "p1"])
