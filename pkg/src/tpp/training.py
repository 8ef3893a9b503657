"""Least-squares training of the temporal post-processor.

Both routes solve ``W_aug = M (C - lam I)^{-1}`` where ``C`` is the augmented
second-moment matrix (records with a trailing 1 for the bias) and ``M``
stacks the class means, each followed by a 1. ``train_numeric`` builds them
from the raw shots, ``train_closed_form`` from a :class:`MomentSummary`.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .datamodel import HeterodyneRecord, LabeledDataset, MomentSummary, TrainedTpp, estimate_moments
from .errors import DegenerateData, DimensionMismatch, SingularMoments

log = logging.getLogger(__name__)

COND_LIMIT = 1e12


@dataclass(frozen=True)
class TrainingOptions:
    lam: float = 0.0
    method: str = "numeric-lsq"

    def __post_init__(self):
        if not np.isfinite(self.lam) or self.lam < 0:
            raise ValueError("lambda must be finite and >= 0")
        if self.method not in ("numeric-lsq", "closed-form"):
            raise ValueError(f"unknown training method {self.method!r}")


def _right_solve(B, A, lam=0.0, allow_pinv=True):
    """Return ``B (A - lam I)^{-1}`` for symmetric ``A``.

    The system is Jacobi-equilibrated first because record samples and the
    bias row differ in scale by many orders of magnitude. An LDL^T solve is
    used when the scaled condition number is below COND_LIMIT, otherwise an
    eigenvalue pseudo-inverse (or SingularMoments when not allowed).
    """
    A = np.asarray(A, dtype=np.float64) - lam * np.eye(A.shape[0])
    d = np.sqrt(np.abs(np.diag(A)))
    d[d == 0] = 1.0
    As = A / d[:, None] / d[None, :]
    As = 0.5 * (As + As.T)
    Bs = B / d[None, :]
    evals, evecs = np.linalg.eigh(As)
    amax = np.abs(evals).max()
    amin = np.abs(evals).min()
    cond = np.inf if amin == 0 else amax / amin
    if cond <= COND_LIMIT:
        Xs = scipy.linalg.solve(As, Bs.T, assume_a="sym", check_finite=False).T
        info = {"cond": float(cond), "solver": "ldl"}
    else:
        if not allow_pinv:
            raise SingularMoments(
                f"moment matrix is numerically singular (cond ~ {cond:.3g}); use lambda > 0"
            )
        keep = np.abs(evals) > amax * 1e-13
        inv = np.where(keep, 1.0 / np.where(keep, evals, 1.0), 0.0)
        Xs = ((Bs @ evecs) * inv) @ evecs.T
        info = {"cond": float(cond), "solver": "pinv"}
        log.info("moment matrix ill-conditioned (cond %.3g), using pseudo-inverse", cond)
    return Xs / d[None, :], info


def _split(W_aug, lam, method, classes, info):
    return TrainedTpp(W=W_aug[:, :-1], b=W_aug[:, -1], lam=lam, method=method, classes=classes, meta=info)


def train_numeric(dataset: LabeledDataset, opts: TrainingOptions | None = None, lam: float | None = None) -> TrainedTpp:
    """Regularised least-squares fit of (W, b) to one-hot targets."""
    opts = opts or TrainingOptions()
    lam = opts.lam if lam is None else float(lam)
    counts = dataset.shots_per_class
    if min(counts) == 0:
        raise DegenerateData("every class needs at least one training shot")
    X, labels = dataset.stacked()
    n_total, dim = X.shape
    if n_total < dim + 1:
        warnings.warn(
            f"{n_total} training shots for {dim + 1} unknowns per class; solution is underdetermined",
            stacklevel=2,
        )
    C = dataset.n_classes
    n_train = n_total / C
    Xa = np.hstack([X, np.ones((n_total, 1))])
    moments = Xa.T @ Xa / n_train
    Y = np.zeros((C, n_total))
    Y[labels, np.arange(n_total)] = 1.0
    M = Y @ Xa / n_train
    W_aug, info = _right_solve(M, moments, lam)
    return _split(W_aug, lam, "numeric-lsq", dataset.classes, info)


def augmented_moments(moments: MomentSummary):
    """Block matrices (M, D) built from class means, V and G."""
    s = moments.means
    C = moments.n_classes
    ssum = s.sum(axis=0)
    D = np.empty((moments.dim + 1, moments.dim + 1))
    D[:-1, :-1] = moments.G + moments.V
    D[:-1, -1] = ssum
    D[-1, :-1] = ssum
    D[-1, -1] = C
    M = np.hstack([s, np.ones((C, 1))])
    return M, D


def train_closed_form(moments: MomentSummary, opts: TrainingOptions | None = None, lam: float | None = None) -> TrainedTpp:
    opts = opts or TrainingOptions(method="closed-form")
    lam = opts.lam if lam is None else float(lam)
    M, D = augmented_moments(moments)
    W_aug, info = _right_solve(M, D, lam, allow_pinv=lam > 0)
    classes = moments.classes or tuple(str(i) for i in range(moments.n_classes))
    return _split(W_aug, lam, "closed-form", classes, info)


def train(dataset: LabeledDataset, opts: TrainingOptions) -> TrainedTpp:
    if opts.method == "closed-form":
        return train_closed_form(estimate_moments(dataset), opts)
    return train_numeric(dataset, opts)


def compare_methods(dataset: LabeledDataset, lam: float = 0.0, tol: float = 1e-6):
    """Train by both routes; warn when they disagree by more than ``tol``."""
    a = train_numeric(dataset, lam=lam)
    b = train_closed_form(estimate_moments(dataset), lam=lam)
    wa = np.hstack([a.W, a.b[:, None]])
    wb = np.hstack([b.W, b.b[:, None]])
    rel = np.linalg.norm(wa - wb) / max(np.linalg.norm(wa), 1e-300)
    if rel > tol:
        warnings.warn(f"numeric and closed-form weights differ by {rel:.2e}; check conditioning", stacklevel=2)
    return a, b, float(rel)


def _as_matrix(model: TrainedTpp, x):
    if isinstance(x, HeterodyneRecord):
        x = x.values.reshape(-1)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 3:
        x = x.reshape(x.shape[0], -1)
    if x.shape[-1] != model.dim:
        raise DimensionMismatch(f"model expects {model.dim} samples per shot, got {x.shape[-1]}")
    return x


def predict(model: TrainedTpp, x) -> np.ndarray:
    """TPP output ``W x + b`` for a record, a flat vector or a batch of rows."""
    x = _as_matrix(model, x)
    return x @ model.W.T + model.b


def shuffle_equivariance_check(model: TrainedTpp, dataset: LabeledDataset, permutation, tol: float = 1e-9) -> bool:
    """Retrain on row-permuted data and compare with the permuted weights.

    ``permutation`` reorders the augmented rows: new row i is old row
    ``permutation[i]``. It may omit the bias row, which always stays last.
    """
    perm = np.asarray(permutation, dtype=int)
    dim = dataset.dim
    if perm.size == dim:
        perm = np.append(perm, dim)
    if perm.size != dim + 1 or perm[-1] != dim or sorted(perm.tolist()) != list(range(dim + 1)):
        raise ValueError("permutation must reorder the record rows and fix the bias row")
    X, labels = dataset.stacked()
    shuffled = LabeledDataset.from_stacked(dataset.classes, X[:, perm[:-1]], labels, dataset.n_obs, dataset.dt)
    retrained = train_numeric(shuffled, lam=model.lam)
    w = np.hstack([model.W, model.b[:, None]])
    wj = np.hstack([retrained.W, retrained.b[:, None]])
    rel = np.linalg.norm(wj - w[:, perm]) / np.linalg.norm(w)
    return bool(rel <= tol)
