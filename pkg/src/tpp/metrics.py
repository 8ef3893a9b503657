"""Fidelity accounting, comparison metrics, noise spectra and cross-validation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .datamodel import LabeledDataset
from .discriminators import classify_argmax, fgda_pipeline, multi_fgda
from .errors import DivideByZero, LengthMismatch, TooFewShots
from .filters import boxcar_filter, matched_filter
from .seeds import derive_seed
from .training import train_numeric


@dataclass(frozen=True)
class EvalReport:
    """Confusion counts (rows = true class) and derived fidelities.

    ``fidelity`` is the balanced accuracy (mean of per-class accuracies);
    ``pooled_fidelity`` is the plain fraction correct.
    """

    confusion: np.ndarray
    fidelity: float
    pooled_fidelity: float
    n_eval: int
    binomial_se: float
    classes: tuple = ()

    @property
    def infidelity(self) -> float:
        return 1.0 - self.fidelity

    def to_dict(self) -> dict:
        return {
            "classes": list(self.classes),
            "confusion": self.confusion.astype(int).tolist(),
            "fidelity": self.fidelity,
            "infidelity": self.infidelity,
            "pooled_fidelity": self.pooled_fidelity,
            "n_eval": self.n_eval,
            "binomial_se": self.binomial_se,
        }


def binomial_se(f: float, n: int) -> float:
    return float(np.sqrt(max(f * (1.0 - f), 0.0) / n))


def fidelity(labels_true, labels_pred, n_classes: int | None = None, classes=()) -> EvalReport:
    t = np.asarray(labels_true, dtype=int).ravel()
    p = np.asarray(labels_pred, dtype=int).ravel()
    if t.size != p.size:
        raise LengthMismatch(f"{t.size} true labels but {p.size} predictions")
    if t.size == 0:
        raise LengthMismatch("need at least one label")
    C = n_classes or len(classes) or int(max(t.max(), p.max())) + 1
    conf = np.zeros((C, C), dtype=np.int64)
    np.add.at(conf, (t, p), 1)
    rows = conf.sum(axis=1)
    present = rows > 0
    per_class = np.diag(conf)[present] / rows[present]
    f = float(per_class.mean())
    return EvalReport(
        confusion=conf,
        fidelity=f,
        pooled_fidelity=float(np.trace(conf) / t.size),
        n_eval=int(t.size),
        binomial_se=binomial_se(f, t.size),
        classes=tuple(classes),
    )


def e_metric(f_tpp: float, f_fgda: float) -> float:
    """Percentage fewer errors made by the TPP than by the FGDA."""
    if f_fgda >= 1.0:
        raise DivideByZero("FGDA fidelity is 1; the E metric is undefined")
    return 100.0 * (f_tpp - f_fgda) / (1.0 - f_fgda)


def e_metric_se(f_tpp: float, se_tpp: float, f_fgda: float, se_fgda: float) -> float:
    """First-order error propagation for :func:`e_metric`."""
    if f_fgda >= 1.0:
        raise DivideByZero("FGDA fidelity is 1; the E metric is undefined")
    d_tpp = 100.0 / (1.0 - f_fgda)
    d_fgda = 100.0 * (f_tpp - 1.0) / (1.0 - f_fgda) ** 2
    return float(np.hypot(d_tpp * se_tpp, d_fgda * se_fgda))


def n_metric(infidelities: dict) -> dict:
    """Infidelity at each amplitude over the infidelity at the smallest one."""
    if not infidelities:
        raise DivideByZero("no infidelities given")
    s0 = min(infidelities)
    ref = infidelities[s0]
    if ref <= 0:
        raise DivideByZero(f"infidelity at the smallest amplitude {s0} is {ref}")
    return {s: v / ref for s, v in infidelities.items()}


# ------------------------------------------------------------------ PSD


def psd_frequencies(n_time: int, dt: float) -> np.ndarray:
    return np.fft.rfftfreq(n_time, dt)


def _centred(dataset: LabeledDataset, p: int, m: int) -> np.ndarray:
    counts = dataset.shots_per_class
    if counts[p] < 2:
        raise TooFewShots(f"class {dataset.classes[p]!r} needs at least 2 shots for a PSD")
    x = np.asarray(dataset.shots[p][:, m, :], dtype=np.float64)
    return x - x.mean(axis=0)


def noise_psd(dataset: LabeledDataset, p, m: int = 0, method: str = "direct"):
    """One-sided noise spectrum of class ``p``, observable ``m``.

    S[f] = (dt / N_T) Re sum_{j >= k} exp(-2 pi i f dt (j - k)) Sigma_jk,
    with Sigma the 1/N sample covariance. The diagonal is kept so a white
    process of per-sample variance s2 has the flat level s2 * dt.
    ``method="fft"`` computes the same sum from FFT autocorrelations of the
    shots instead of the covariance matrix. Returns (freqs, S).
    """
    if isinstance(p, str):
        p = dataset.index(p)
    z = _centred(dataset, p, m)
    n_shots, n_t = z.shape
    dt = dataset.dt
    freqs = psd_frequencies(n_t, dt)
    if method == "direct":
        cov = z.T @ z / n_shots
        raw = kernels.psd_direct(cov, freqs, dt)
    elif method == "fft":
        spec = np.fft.rfft(z, n=2 * n_t, axis=1)
        lag = np.fft.irfft(np.abs(spec) ** 2, n=2 * n_t, axis=1)[:, :n_t].mean(axis=0)
        raw = np.real(np.fft.rfft(lag))
    else:
        raise ValueError(f"unknown PSD method {method!r}")
    return freqs, raw * dt / n_t


def fit_lorentzian(freqs, S):
    """Least-squares fit of A / (1 + (f / w)^2) + c; returns (A, w, c)."""
    from scipy.optimize import curve_fit

    f = np.asarray(freqs, dtype=np.float64)
    S = np.asarray(S, dtype=np.float64)

    def model(f, A, w, c):
        return A / (1.0 + (f / w) ** 2) + c

    c0 = S[-max(len(S) // 10, 1):].mean()
    A0 = max(S[0] - c0, 1e-30)
    half = np.nonzero(S - c0 < 0.5 * A0)[0]
    w0 = f[half[0]] if half.size else f[-1] / 2
    (A, w, c), _ = curve_fit(model, f, S, p0=(A0, max(w0, f[1]), c0), maxfev=20000)
    return float(A), float(abs(w)), float(c)


# ------------------------------------------------------------------ pipelines


Pipeline = Callable[[LabeledDataset, LabeledDataset, int], np.ndarray]


def make_pipeline(spec: str, cfg=None, lam: float = 0.0) -> Pipeline:
    """Pipeline from a spec string.

    tpp | fgda:matched[:a,b] | fgda:boxcar | multi-fgda:p,q. Each pipeline
    maps (train, eval, seed) to labels in ``eval.stacked()`` order.
    """
    kind, _, arg = spec.partition(":")
    if kind == "tpp":
        def run(train, evaluate, seed):
            model = train_numeric(train, lam=lam)
            return classify_argmax(model, evaluate.stacked()[0])
        return run
    if kind == "fgda":
        what, _, pair = arg.partition(":")
        if what == "matched":
            def run(train, evaluate, seed):
                a, b = pair.split(",") if pair else train.classes[:2]
                return fgda_pipeline(matched_filter(train, a, b), train, evaluate)
            return run
        if what == "boxcar":
            if cfg is None:
                raise ValueError("the boxcar pipeline needs a cavity config")
            def run(train, evaluate, seed):
                return fgda_pipeline(boxcar_filter(cfg, train.n_obs), train, evaluate)
            return run
        raise ValueError(f"unknown FGDA filter {what!r}")
    if kind == "multi-fgda":
        scheme = tuple(s.strip() for s in arg.split(","))
        if len(scheme) != 2:
            raise ValueError("multi-fgda needs a scheme like multi-fgda:g,e")
        def run(train, evaluate, seed):
            return multi_fgda(train, evaluate, scheme, seed=seed)
        return run
    raise ValueError(f"unknown pipeline {spec!r}")


# ------------------------------------------------------------------ cross-validation


@dataclass
class CrossValReport:
    reports: list
    train_frac: float
    label_flip_prob: float
    seed: int
    classes: tuple = ()
    meta: dict = field(default_factory=dict)

    @property
    def fidelities(self) -> np.ndarray:
        return np.array([r.fidelity for r in self.reports])

    @property
    def mean_fidelity(self) -> float:
        return float(self.fidelities.mean())

    @property
    def spread(self) -> float:
        f = self.fidelities
        return float(f.std(ddof=1)) if f.size > 1 else 0.0

    @property
    def mean_infidelity(self) -> float:
        return 1.0 - self.mean_fidelity

    @property
    def n_eval_total(self) -> int:
        return int(sum(r.n_eval for r in self.reports))

    @property
    def binomial_se(self) -> float:
        """Binomial error of the mean fidelity over all held-out shots."""
        return binomial_se(self.mean_fidelity, self.n_eval_total)

    def to_dict(self) -> dict:
        return {
            "classes": list(self.classes),
            "train_frac": self.train_frac,
            "n_iter": len(self.reports),
            "seed": self.seed,
            "label_flip_prob": self.label_flip_prob,
            "mean_fidelity": self.mean_fidelity,
            "mean_infidelity": self.mean_infidelity,
            "spread": self.spread,
            "binomial_se": self.binomial_se,
            "iterations": [r.to_dict() for r in self.reports],
            **self.meta,
        }


def split_indices(counts, train_frac: float, rng: np.random.Generator):
    """Class-balanced random split -> (train_idx, eval_idx) per class."""
    train, held = [], []
    for n in counts:
        k = int(round(train_frac * n))
        if k == 0 or k == n:
            raise TooFewShots(f"a class with {n} shots cannot be split at train_frac={train_frac}")
        perm = rng.permutation(n)
        train.append(np.sort(perm[:k]))
        held.append(np.sort(perm[k:]))
    return train, held


def flip_labels(dataset: LabeledDataset, prob: float, rng: np.random.Generator) -> LabeledDataset:
    """Relabel each shot with probability ``prob`` as a uniformly drawn other class."""
    if prob <= 0:
        return dataset
    X, labels = dataset.stacked()
    C = dataset.n_classes
    flip = rng.random(labels.size) < prob
    shift = rng.integers(1, C, size=labels.size)
    new = np.where(flip, (labels + shift) % C, labels)
    return LabeledDataset.from_stacked(dataset.classes, X, new, dataset.n_obs, dataset.dt)


def cross_validate(
    dataset: LabeledDataset,
    pipeline: Pipeline | str,
    train_frac: float = 0.8,
    n_iter: int = 10,
    seed: int = 0,
    label_flip_prob: float = 0.0,
    cfg=None,
) -> CrossValReport:
    """Repeated random class-balanced splits; label flips hit training shots only."""
    if not 0.0 < train_frac < 1.0:
        raise ValueError("train_frac must lie in (0, 1)")
    if n_iter < 1:
        raise ValueError("n_iter must be >= 1")
    if not 0.0 <= label_flip_prob <= 1.0:
        raise ValueError("label_flip_prob must lie in [0, 1]")
    name = pipeline if isinstance(pipeline, str) else getattr(pipeline, "__name__", "custom")
    if isinstance(pipeline, str):
        pipeline = make_pipeline(pipeline, cfg=cfg)
    reports = []
    for it in range(n_iter):
        rng = np.random.default_rng(derive_seed(seed, f"crossval/{it}"))
        tr, ev = split_indices(dataset.shots_per_class, train_frac, rng)
        train = flip_labels(dataset.subset(tr), label_flip_prob, rng)
        held = dataset.subset(ev)
        pred = pipeline(train, held, derive_seed(seed, f"pipeline/{it}"))
        reports.append(fidelity(held.stacked()[1], pred, dataset.n_classes, dataset.classes))
    return CrossValReport(reports, train_frac, label_flip_prob, seed, dataset.classes, {"pipeline": name})


__all__ = [
    "CrossValReport",
    "EvalReport",
    "binomial_se",
    "cross_validate",
    "e_metric",
    "e_metric_se",
    "fidelity",
    "fit_lorentzian",
    "flip_labels",
    "make_pipeline",
    "n_metric",
    "noise_psd",
    "psd_frequencies",
    "split_indices",
]
