"""Decision rules: argmax on TPP outputs, per-class Gaussian likelihood, FGDA.

Labels are class indices into the dataset's class tuple. Every rule breaks
ties toward the lower class index, and priors are always uniform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datamodel import LabeledDataset, TrainedTpp
from .errors import DimensionMismatch, TooFewShots
from .filters import one_vs_all_filter
from .training import predict

JITTER = 1e-12


@dataclass(frozen=True)
class GaussianDiscriminator:
    means: np.ndarray  # (C, F)
    covs: np.ndarray  # (C, F, F)

    @property
    def n_classes(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]


def fit_gaussian(features) -> GaussianDiscriminator:
    """Sample mean and 1/N full covariance per class.

    ``features`` is a sequence with one (n_c, F) array per class. A jitter of
    1e-12 * tr(cov)/F keeps every covariance positive definite; a class with
    zero spread borrows the scale of the pooled second moment instead.
    """
    blocks = [np.asarray(f, dtype=np.float64) for f in features]
    blocks = [b[:, None] if b.ndim == 1 else b for b in blocks]
    dims = {b.shape[1] for b in blocks}
    if len(dims) != 1:
        raise DimensionMismatch(f"feature dimension differs across classes: {sorted(dims)}")
    if min(b.shape[0] for b in blocks) < 2:
        raise TooFewShots("each class needs at least two feature samples")
    F = dims.pop()
    pooled = np.concatenate(blocks)
    fallback = float(np.mean(pooled**2)) or 1.0
    means = np.empty((len(blocks), F))
    covs = np.empty((len(blocks), F, F))
    for c, b in enumerate(blocks):
        mu = b.mean(axis=0)
        d = b - mu
        cov = d.T @ d / b.shape[0]
        cov = 0.5 * (cov + cov.T)
        scale = np.trace(cov) / F
        if not scale > 0:
            scale = fallback
        means[c] = mu
        covs[c] = cov + JITTER * scale * np.eye(F)
    return GaussianDiscriminator(means, covs)


def log_likelihoods(disc: GaussianDiscriminator, features) -> np.ndarray:
    """(n, C) Gaussian log-likelihoods without the constant term."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        # a batch of scalars or a single feature vector
        x = x[:, None] if disc.dim == 1 else x[None, :]
    if x.shape[1] != disc.dim:
        raise DimensionMismatch(f"discriminator expects {disc.dim} features, got {x.shape[1]}")
    out = np.empty((x.shape[0], disc.n_classes))
    for c in range(disc.n_classes):
        chol = np.linalg.cholesky(disc.covs[c])
        z = np.linalg.solve(chol, (x - disc.means[c]).T)
        out[:, c] = -0.5 * np.sum(z * z, axis=0) - np.sum(np.log(np.diag(chol)))
    return out


def classify_gaussian(disc: GaussianDiscriminator, features) -> np.ndarray:
    """Maximum-likelihood class per row; ties go to the lower index."""
    return np.argmax(log_likelihoods(disc, features), axis=1)


def classify_argmax(model: TrainedTpp, records) -> np.ndarray:
    """Index of the largest TPP output per shot; ties go to the lower index."""
    y = np.atleast_2d(predict(model, records))
    return np.argmax(y, axis=1)


# ------------------------------------------------------------------ FGDA


def filter_features(filters, X, n_obs: int) -> np.ndarray:
    """One scalar per observable per filter: (n, n_filters * n_obs)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 3:
        X = X.reshape(X.shape[0], -1)
    Fm = np.atleast_2d(np.asarray(filters, dtype=np.float64))
    if Fm.shape[1] != X.shape[1]:
        raise DimensionMismatch(f"filter length {Fm.shape[1]} does not match record length {X.shape[1]}")
    n_t = X.shape[1] // n_obs
    Xo = X.reshape(X.shape[0], n_obs, n_t)
    Fo = Fm.reshape(Fm.shape[0], n_obs, n_t)
    return np.einsum("nmt,kmt->nkm", Xo, Fo).reshape(X.shape[0], -1)


def _class_features(filters, dataset: LabeledDataset):
    return [filter_features(filters, dataset.flat(c), dataset.n_obs) for c in range(dataset.n_classes)]


def fgda_fit(filters, train: LabeledDataset) -> GaussianDiscriminator:
    return fit_gaussian(_class_features(filters, train))


def fgda_pipeline(filters, train: LabeledDataset, evaluate: LabeledDataset) -> np.ndarray:
    """Fit Gaussians on filtered training features, label the eval shots.

    Returns labels for ``evaluate.stacked()`` order.
    """
    disc = fgda_fit(filters, train)
    X, _ = evaluate.stacked()
    return classify_gaussian(disc, filter_features(filters, X, evaluate.n_obs))


def _one_vs_rest(filt, train: LabeledDataset, p: int) -> GaussianDiscriminator:
    feats = _class_features(filt, train)
    rest = np.concatenate([f for c, f in enumerate(feats) if c != p])
    # index 0 = "is p", index 1 = "is not p"
    return fit_gaussian([feats[p], rest])


def multi_fgda(train: LabeledDataset, evaluate: LabeledDataset, scheme, seed: int = 0) -> np.ndarray:
    """Two one-vs-all FGDA instances combined by a decision table (C = 3).

    With verdicts (is p, is q): (yes, no) -> p, (no, yes) -> q,
    (no, no) -> the remaining class, (yes, yes) -> random choice of p or q
    drawn from ``seed``.
    """
    if train.n_classes != 3:
        raise ValueError("multi-FGDA is defined for three classes")
    name_p, name_q = scheme
    p, q = train.index(name_p), train.index(name_q)
    if p == q:
        raise ValueError("scheme needs two distinct classes")
    r = ({0, 1, 2} - {p, q}).pop()
    X, _ = evaluate.stacked()
    verdicts = []
    for c in (p, q):
        filt = one_vs_all_filter(train, train.classes[c])
        disc = _one_vs_rest(filt, train, c)
        verdicts.append(classify_gaussian(disc, filter_features(filt, X, evaluate.n_obs)) == 0)
    is_p, is_q = verdicts
    labels = np.full(X.shape[0], r)
    labels[is_p & ~is_q] = p
    labels[~is_p & is_q] = q
    both = is_p & is_q
    coin = np.random.default_rng(seed).integers(0, 2, size=int(both.sum()))
    labels[both] = np.where(coin == 0, p, q)
    return labels


__all__ = [
    "GaussianDiscriminator",
    "classify_argmax",
    "classify_gaussian",
    "fgda_fit",
    "fgda_pipeline",
    "filter_features",
    "fit_gaussian",
    "log_likelihoods",
    "multi_fgda",
]
