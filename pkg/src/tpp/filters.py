"""Optimal TPP filters in semi-analytic form, and the baseline filters.

The semi-analytic route whitens with the Cholesky factor of the summed noise
covariance V and solves a (C-1)-dimensional system in the class-mean
overlaps. Pairs of consecutive classes, [1,2], [2,3], ..., index that system.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .datamodel import FilterBank, LabeledDataset, MomentSummary
from .errors import NotPSD, SingularQ

log = logging.getLogger(__name__)


def whitening(V, lambda_v: float | None = None) -> np.ndarray:
    """Lower-triangular ``L`` with ``L.T @ L == inv(V + lambda_v I)``.

    ``L`` is the inverse of the Cholesky factor of V. Jitter is only added
    when the plain factorisation fails; ``lambda_v`` overrides its default
    of 1e-10 * tr(V) / dim.
    """
    V = np.asarray(V, dtype=np.float64)
    V = 0.5 * (V + V.T)
    n = V.shape[0]
    try:
        R = scipy.linalg.cholesky(V, lower=True)
    except np.linalg.LinAlgError:
        evals = np.linalg.eigvalsh(V)
        scale = max(np.abs(evals).max(), 1e-300)
        if evals.min() < -1e-8 * scale:
            raise NotPSD(f"V has eigenvalue {evals.min():.3g} (largest {scale:.3g})") from None
        jitter = lambda_v if lambda_v is not None else 1e-10 * max(np.trace(V) / n, 1e-300)
        for _ in range(8):
            try:
                R = scipy.linalg.cholesky(V + jitter * np.eye(n), lower=True)
                break
            except np.linalg.LinAlgError:
                jitter *= 10.0
        else:
            raise NotPSD("V could not be factorised even with jitter") from None
        log.info("whitening: added jitter %.3g to V", jitter)
    return scipy.linalg.solve_triangular(R, np.eye(n), lower=True)


@dataclass(frozen=True)
class QSystem:
    Q: np.ndarray
    T: np.ndarray
    pairs: tuple
    overlaps: np.ndarray


def q_system(means, Vinv_means) -> QSystem:
    """Build Q and diagonal T from overlaps O[c, c'] = s_c'^T V^-1 s_c."""
    means = np.asarray(means)
    C = means.shape[0]
    O = Vinv_means @ means.T
    O = 0.5 * (O + O.T)
    Mm = O + 1.0 + np.eye(C)
    pairs = tuple((p, p + 1) for p in range(C - 1))
    Q = np.empty((C - 1, C - 1))
    T = np.zeros((C - 1, C - 1))
    for p, (a, b) in enumerate(pairs):
        tail = Mm[a, C - 1] - Mm[b, C - 1]
        for c in range(C - 1):
            Q[p, c] = (Mm[a, c] - Mm[b, c]) - tail
        T[p, p] = tail
    return QSystem(Q=Q, T=T, pairs=pairs, overlaps=O)


def analytic_filters(moments: MomentSummary, assume_white: bool = False) -> FilterBank:
    """Optimal filters ``f_k = sum_p C_kp V^-1 s_p`` and their biases.

    With ``assume_white`` the covariance is replaced by its isotropic fit
    (tr V / dim) * I, giving the white-noise TPP filters.
    """
    s = moments.means
    C, dim = s.shape
    if C < 2:
        raise ValueError("need at least two classes")
    if assume_white:
        sigma2 = np.trace(moments.V) / dim
        Vinv_s = s / sigma2
    else:
        L = whitening(moments.V)
        Vinv_s = (L.T @ (L @ s.T)).T
    qs = q_system(s, Vinv_s)
    if not np.all(np.isfinite(qs.Q)) or np.linalg.cond(qs.Q) > 1e12:
        raise SingularQ("class means are not distinguishable under the V^-1 inner product")
    Qinv = np.linalg.inv(qs.Q)

    coeff = np.zeros((C, C))
    for c in range(C - 1):
        coeff[c, 0] = Qinv[c, 0]
        for p in range(1, C - 1):
            coeff[c, p] = Qinv[c, p] - Qinv[c, p - 1]
        coeff[c, C - 1] = -Qinv[c, C - 2]
    coeff[C - 1] = -coeff[: C - 1].sum(axis=0)

    filters = coeff @ Vinv_s
    # last filter from the constraint: filters sum to zero
    filters[C - 1] = -filters[: C - 1].sum(axis=0)
    biases = np.zeros(C)
    biases[: C - 1] = -Qinv @ np.diag(qs.T)
    biases[C - 1] = 1.0 - biases[: C - 1].sum()
    prov = "white-noise-analytic" if assume_white else "general-analytic"
    return FilterBank(filters=filters, provenance=prov, coefficients=coeff, biases=biases)


def filters_to_model(bank: FilterBank, classes, lam: float = 0.0):
    from .datamodel import TrainedTpp

    return TrainedTpp(W=bank.filters, b=bank.biases, lam=lam, method=bank.provenance, classes=tuple(classes))


# ------------------------------------------------------------------ baselines


def matched_filter(dataset: LabeledDataset, class_a: str, class_b: str) -> np.ndarray:
    """Difference of the empirical class means, all observables."""
    a = dataset.index(class_a)
    b = dataset.index(class_b)
    return dataset.flat(a).mean(axis=0) - dataset.flat(b).mean(axis=0)


def one_vs_all_filter(dataset: LabeledDataset, class_p: str) -> np.ndarray:
    """Mean of class p minus the average of the other class means."""
    p = dataset.index(class_p)
    means = np.array([dataset.flat(c).mean(axis=0) for c in range(dataset.n_classes)])
    others = np.delete(means, p, axis=0)
    return means[p] - others.mean(axis=0)


def boxcar_filter(cfg, n_obs: int = 2) -> np.ndarray:
    """1 while the drive is on (t_on <= t < t_off), 0 elsewhere, per observable."""
    t = np.arange(cfg.n_time) * cfg.dt
    eps = 1e-9 * cfg.dt
    on = ((t >= cfg.t_on - eps) & (t < cfg.t_off - eps)).astype(np.float64)
    if not on.any():
        warnings.warn("boxcar window is empty; filter is identically zero", stacklevel=2)
    return np.tile(on, n_obs)


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def parse_filter_spec(spec: str, dataset: LabeledDataset, cfg=None) -> np.ndarray:
    """``matched:e,g`` | ``boxcar`` | ``ova:e`` -> filter vector."""
    kind, _, arg = spec.partition(":")
    if kind == "matched":
        a, b = [x.strip() for x in arg.split(",")]
        return matched_filter(dataset, a, b)
    if kind == "ova":
        return one_vs_all_filter(dataset, arg.strip())
    if kind == "boxcar":
        if cfg is None:
            raise ValueError("boxcar filter needs a cavity config")
        return boxcar_filter(cfg, dataset.n_obs)
    raise ValueError(f"unknown filter spec {spec!r}")


__all__ = [
    "QSystem",
    "analytic_filters",
    "boxcar_filter",
    "cosine_similarity",
    "filters_to_model",
    "matched_filter",
    "one_vs_all_filter",
    "parse_filter_spec",
    "q_system",
    "whitening",
]
