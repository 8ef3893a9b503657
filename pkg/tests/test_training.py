import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tpp.datamodel import LabeledDataset, TrainedTpp, estimate_moments
from tpp.errors import DegenerateData, DimensionMismatch, SingularMoments
from tpp.training import (
    TrainingOptions,
    compare_methods,
    predict,
    shuffle_equivariance_check,
    train,
    train_closed_form,
    train_numeric,
)

from conftest import random_dataset

TOY = LabeledDataset(("a", "b"), (np.array([[[1.0]]]), np.array([[[-1.0]]])), 1.0)


def brute_force(ds, lam=0.0):
    """Y X^T (X X^T - lam I)^-1 from explicit loops and a dense solve."""
    cols, ys = [], []
    for p in range(ds.n_classes):
        for x in ds.flat(p):
            cols.append(list(x) + [1.0])
            ys.append([1.0 if k == p else 0.0 for k in range(ds.n_classes)])
    X = np.array(cols).T
    Y = np.array(ys).T
    A = X @ X.T - lam * np.eye(X.shape[0])
    return np.linalg.solve(A.T, (Y @ X.T).T).T


def aug(m):
    return np.hstack([m.W, m.b[:, None]])


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def test_toy_by_hand():
    m = train_numeric(TOY)
    assert np.allclose(m.W, [[0.5], [-0.5]], atol=1e-14)
    assert np.allclose(m.b, [0.5, 0.5], atol=1e-14)
    assert np.allclose(predict(m, [1.0]), [1.0, 0.0], atol=1e-14)
    assert np.allclose(predict(m, [-1.0]), [0.0, 1.0], atol=1e-14)


def test_toy_closed_form():
    # two shots per class so the moment estimator is defined; still noiseless
    ds = LabeledDataset(("a", "b"), (np.ones((2, 1, 1)), -np.ones((2, 1, 1))), 1.0)
    m = train_closed_form(estimate_moments(ds))
    assert np.allclose(m.W, [[0.5], [-0.5]], atol=1e-14) and np.allclose(m.b, [0.5, 0.5], atol=1e-14)
    assert m.classes == ("a", "b")


def test_constant_model():
    m = TrainedTpp(W=np.zeros((2, 3)), b=[0.0, 1.0], lam=0, method="numeric-lsq", classes=("a", "b"))
    assert np.array_equal(predict(m, np.arange(3.0)), [0.0, 1.0])


@given(st.integers(0, 10_000), st.integers(2, 4), st.integers(1, 2), st.integers(1, 3))
def test_matches_brute_force(seed, C, n_obs, n_time):
    rng = np.random.default_rng(seed)
    ds = random_dataset(rng, C, n_obs, n_time, n_shots=int(rng.integers(n_obs * n_time + 2, 11)))
    assert rel(aug(train_numeric(ds)), brute_force(ds)) < 1e-10


@given(st.integers(0, 10_000), st.integers(2, 4))
def test_constraint_and_output_sum(seed, C):
    rng = np.random.default_rng(seed)
    ds = random_dataset(rng, C, 2, 3, n_shots=30)
    for m in (train_numeric(ds), train_closed_form(estimate_moments(ds))):
        assert np.abs(m.W.sum(axis=0)).max() <= 1e-9 * np.abs(m.W).max()
        assert abs(m.b.sum() - 1) <= 1e-9
        y = predict(m, rng.normal(size=(20, ds.dim)) * 5)
        assert np.allclose(y.sum(axis=1), 1.0, atol=1e-9)


@given(st.integers(0, 10_000))
def test_closed_form_equals_numeric(seed):
    rng = np.random.default_rng(seed)
    ds = random_dataset(rng, 3, 2, 4, n_shots=40)
    a, b, r = compare_methods(ds)
    assert r <= 1e-8
    assert rel(aug(b), aug(a)) <= 1e-8


def test_closed_form_with_lambda_matches_numeric(rng):
    ds = random_dataset(rng, 3, 1, 5, n_shots=40)
    a = train(ds, TrainingOptions(lam=0.1))
    b = train(ds, TrainingOptions(lam=0.1, method="closed-form"))
    assert rel(aug(b), aug(a)) < 1e-8


def test_duplication_invariance(rng):
    ds = random_dataset(rng, 3, 2, 3, n_shots=15)
    dup = LabeledDataset(ds.classes, tuple(np.concatenate([a, a]) for a in ds.shots), ds.dt)
    assert rel(aug(train_numeric(dup)), aug(train_numeric(ds))) < 1e-12


def test_noiseless_closed_form_separates():
    ds = LabeledDataset(("a", "b"), (np.full((3, 1, 1), 2.0), np.full((3, 1, 1), -1.0)), 1.0)
    m = train_closed_form(estimate_moments(ds))
    assert np.argmax(predict(m, [2.0])) == 0 and np.argmax(predict(m, [-1.0])) == 1


def test_errors(rng):
    ds = random_dataset(rng, 2, 1, 3, n_shots=10)
    m = train_numeric(ds)
    with pytest.raises(DimensionMismatch):
        predict(m, np.zeros(4))
    empty = LabeledDataset(("a", "b"), (np.zeros((0, 1, 3)), ds.shots[1]), 1.0)
    with pytest.raises(DegenerateData):
        train_numeric(empty)
    flat = LabeledDataset(("a", "b"), (np.ones((3, 1, 4)), -np.ones((3, 1, 4))), 1.0)
    with pytest.raises(SingularMoments):
        train_closed_form(estimate_moments(flat))
    # lambda > 0 makes the same moments solvable
    assert np.all(np.isfinite(train_closed_form(estimate_moments(flat), lam=1e-3).W))
    with pytest.raises(ValueError):
        TrainingOptions(lam=-1.0)


def test_singular_numeric_uses_pseudo_inverse():
    flat = LabeledDataset(("a", "b"), (np.ones((3, 1, 4)), -np.ones((3, 1, 4))), 1.0)
    m = train_numeric(flat)
    assert m.meta["solver"] == "pinv"
    assert np.argmax(predict(m, np.ones(4))) == 0 and np.argmax(predict(m, -np.ones(4))) == 1
    assert abs(m.b.sum() - 1) < 1e-9


def test_underdetermined_warns(rng):
    ds = random_dataset(rng, 2, 1, 10, n_shots=3)
    with pytest.warns(UserWarning, match="underdetermined"):
        train_numeric(ds)


@pytest.mark.parametrize("lam", [0.0, 1e-6])
@given(seed=st.integers(0, 10_000))
def test_shuffle_equivariance(lam, seed):
    rng = np.random.default_rng(seed)
    ds = random_dataset(rng, 3, 2, 3, n_shots=25)
    m = train_numeric(ds, lam=lam)
    dim = ds.dim
    assert shuffle_equivariance_check(m, ds, np.arange(dim))
    assert shuffle_equivariance_check(m, ds, np.arange(dim)[::-1])
    assert shuffle_equivariance_check(m, ds, rng.permutation(dim))


def test_equivariance_detects_wrong_weights(rng):
    ds = random_dataset(rng, 2, 1, 4, n_shots=20)
    m = train_numeric(ds)
    bad = TrainedTpp(W=m.W * 1.01, b=m.b, lam=0.0, method="numeric-lsq", classes=m.classes)
    assert not shuffle_equivariance_check(bad, ds, rng.permutation(4))
    with pytest.raises(ValueError):
        shuffle_equivariance_check(m, ds, [0, 0, 1, 2])
