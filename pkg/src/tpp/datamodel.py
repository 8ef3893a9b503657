"""Core data types, empirical moments and the on-disk dataset/model formats.

Records are stored observable-major: a shot with ``values`` of shape
(n_obs, n_time) flattens to ``values.reshape(-1)``, i.e. all samples of
observable 0, then all samples of observable 1, and so on.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, FormatError, TooFewShots

MAGIC = b"TPPD1\n"

METHODS = ("numeric-lsq", "closed-form", "white-noise-analytic", "general-analytic")
PROVENANCES = ("white-noise-analytic", "general-analytic", "numeric")


def _frozen(a, dtype=np.float64):
    a = np.array(a, dtype=dtype, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class HeterodyneRecord:
    """One shot: ``values`` is (n_obs, n_time), sampled every ``dt`` seconds."""

    values: np.ndarray
    dt: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim == 1:
            v = v[None, :]
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise DimensionMismatch(f"record values must be (n_obs, n_time), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("record contains non-finite values")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        object.__setattr__(self, "values", _frozen(v))
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def n_obs(self) -> int:
        return self.values.shape[0]

    @property
    def n_time(self) -> int:
        return self.values.shape[1]


def flatten(record: HeterodyneRecord) -> np.ndarray:
    """Concatenate the observables of ``record`` into one vector."""
    return record.values.reshape(-1).copy()


def unflatten(x, n_obs: int, dt: float) -> HeterodyneRecord:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size % n_obs:
        raise DimensionMismatch(f"cannot split length {x.size} into {n_obs} observables")
    return HeterodyneRecord(x.reshape(n_obs, -1), dt)


@dataclass(frozen=True)
class LabeledDataset:
    """Shots grouped by class.

    ``shots[p]`` is an array of shape (n_shots_p, n_obs, n_time). The order of
    ``classes`` fixes the one-hot index of each class.
    """

    classes: tuple
    shots: tuple
    dt: float

    def __post_init__(self):
        classes = tuple(str(c) for c in self.classes)
        if len(classes) < 2:
            raise ValueError("a dataset needs at least two classes")
        if len(set(classes)) != len(classes):
            raise ValueError(f"class names must be unique: {classes}")
        if len(self.shots) != len(classes):
            raise DimensionMismatch("one shot array per class is required")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        arrays = []
        shape = None
        for name, block in zip(classes, self.shots):
            a = np.asarray(block, dtype=np.float64)
            if a.ndim == 2:
                a = a[:, None, :]
            if a.ndim != 3:
                raise DimensionMismatch(f"class {name!r}: expected (n_shots, n_obs, n_time)")
            if shape is None:
                shape = a.shape[1:]
            elif a.shape[1:] != shape:
                raise DimensionMismatch(f"class {name!r} has record shape {a.shape[1:]}, expected {shape}")
            if not np.all(np.isfinite(a)):
                raise ValueError(f"class {name!r} contains non-finite values")
            arrays.append(_frozen(a))
        if shape[0] < 1 or shape[1] < 1:
            raise DimensionMismatch("records need n_obs >= 1 and n_time >= 1")
        object.__setattr__(self, "classes", classes)
        object.__setattr__(self, "shots", tuple(arrays))
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def n_obs(self) -> int:
        return self.shots[0].shape[1]

    @property
    def n_time(self) -> int:
        return self.shots[0].shape[2]

    @property
    def dim(self) -> int:
        return self.n_obs * self.n_time

    @property
    def shots_per_class(self) -> list:
        return [a.shape[0] for a in self.shots]

    def index(self, name: str) -> int:
        from .errors import UnknownClass

        try:
            return self.classes.index(name)
        except ValueError:
            raise UnknownClass(f"unknown class {name!r}; dataset has {list(self.classes)}") from None

    def flat(self, p: int) -> np.ndarray:
        """Shots of class ``p`` as rows of flattened vectors."""
        a = self.shots[p]
        return a.reshape(a.shape[0], -1)

    def record(self, p: int, n: int) -> HeterodyneRecord:
        return HeterodyneRecord(self.shots[p][n], self.dt)

    def stacked(self):
        """All shots as (X, labels) with X of shape (n_total, dim)."""
        X = np.concatenate([self.flat(p) for p in range(self.n_classes)], axis=0)
        labels = np.concatenate([np.full(n, p) for p, n in enumerate(self.shots_per_class)])
        return X, labels

    def subset(self, indices: Sequence) -> "LabeledDataset":
        """Keep ``shots[p][indices[p]]`` for every class."""
        return LabeledDataset(self.classes, tuple(a[np.asarray(i, dtype=int)] for a, i in zip(self.shots, indices)), self.dt)

    def select_classes(self, names: Sequence[str]) -> "LabeledDataset":
        idx = [self.index(n) for n in names]
        return LabeledDataset(tuple(names), tuple(self.shots[i] for i in idx), self.dt)

    def window(self, start: int, stop: int) -> "LabeledDataset":
        """Restrict every record to time samples ``start:stop``."""
        return LabeledDataset(self.classes, tuple(a[:, :, start:stop] for a in self.shots), self.dt)

    @classmethod
    def from_stacked(cls, classes, X, labels, n_obs, dt) -> "LabeledDataset":
        X = np.asarray(X, dtype=np.float64)
        labels = np.asarray(labels)
        blocks = tuple(X[labels == p].reshape(-1, n_obs, X.shape[1] // n_obs) for p in range(len(classes)))
        return cls(tuple(classes), blocks, dt)


@dataclass(frozen=True)
class MomentSummary:
    """Per-class means and (1/N) covariances of flattened records."""

    means: np.ndarray
    covariances: np.ndarray
    V: np.ndarray
    G: np.ndarray
    classes: tuple = ()

    @property
    def n_classes(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]


def estimate_moments(dataset: LabeledDataset) -> MomentSummary:
    """Sample means and biased sample covariances per class.

    ``V`` is the sum of class covariances and ``G`` the sum of outer
    products of class means.
    """
    counts = dataset.shots_per_class
    if min(counts) < 2:
        bad = [c for c, n in zip(dataset.classes, counts) if n < 2]
        raise TooFewShots(f"need at least 2 shots per class, short classes: {bad}")
    means, covs = [], []
    for p in range(dataset.n_classes):
        x = dataset.flat(p)
        s = x.mean(axis=0)
        z = x - s
        cov = z.T @ z / x.shape[0]
        covs.append(0.5 * (cov + cov.T))
        means.append(s)
    means = np.array(means)
    covs = np.array(covs)
    return MomentSummary(
        means=means,
        covariances=covs,
        V=covs.sum(axis=0),
        G=means.T @ means,
        classes=dataset.classes,
    )


@dataclass(frozen=True)
class TrainedTpp:
    """Linear map y = W x + b with one row of W per class."""

    W: np.ndarray
    b: np.ndarray
    lam: float
    method: str
    classes: tuple
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        W = np.atleast_2d(np.asarray(self.W, dtype=np.float64))
        b = np.asarray(self.b, dtype=np.float64).reshape(-1)
        if W.shape[0] != b.shape[0] or W.shape[0] != len(self.classes):
            raise DimensionMismatch(f"W has {W.shape[0]} rows, b has {b.shape[0]}, {len(self.classes)} classes")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        object.__setattr__(self, "W", _frozen(W))
        object.__setattr__(self, "b", _frozen(b))
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "classes", tuple(self.classes))

    @property
    def n_classes(self) -> int:
        return self.W.shape[0]

    @property
    def dim(self) -> int:
        return self.W.shape[1]


@dataclass(frozen=True)
class FilterBank:
    """Per-class filters, optional C_kp mixing coefficients and biases."""

    filters: np.ndarray
    provenance: str
    coefficients: np.ndarray | None = None
    biases: np.ndarray | None = None

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        object.__setattr__(self, "filters", _frozen(np.atleast_2d(self.filters)))
        if self.coefficients is not None:
            object.__setattr__(self, "coefficients", _frozen(self.coefficients))
        if self.biases is not None:
            object.__setattr__(self, "biases", _frozen(self.biases))


# ---------------------------------------------------------------- file I/O


def write_dataset(dataset: LabeledDataset, path) -> None:
    header = {
        "n_obs": dataset.n_obs,
        "n_time": dataset.n_time,
        "dt": dataset.dt,
        "classes": list(dataset.classes),
        "shots_per_class": dataset.shots_per_class,
    }
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(header).encode("ascii") + b"\n")
        for block in dataset.shots:
            fh.write(np.ascontiguousarray(block, dtype="<f8").tobytes())


def read_dataset(path) -> LabeledDataset:
    raw = Path(path).read_bytes()
    if not raw.startswith(MAGIC):
        raise FormatError(f"{path}: bad magic, expected {MAGIC!r}")
    end = raw.find(b"\n", len(MAGIC))
    if end < 0:
        raise FormatError(f"{path}: missing header line")
    try:
        header = json.loads(raw[len(MAGIC):end].decode("ascii"))
        n_obs = int(header["n_obs"])
        n_time = int(header["n_time"])
        dt = float(header["dt"])
        classes = [str(c) for c in header["classes"]]
        counts = [int(n) for n in header["shots_per_class"]]
    except (ValueError, KeyError, TypeError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: malformed header ({exc})") from None
    if len(counts) != len(classes):
        raise FormatError(f"{path}: {len(classes)} classes but {len(counts)} shot counts")
    if n_obs < 1 or n_time < 1 or min(counts, default=0) < 0:
        raise FormatError(f"{path}: invalid dimensions in header")
    payload = raw[end + 1:]
    per_shot = n_obs * n_time
    expected = sum(counts) * per_shot * 8
    if len(payload) != expected:
        raise FormatError(f"{path}: payload has {len(payload)} bytes, header implies {expected}")
    flat = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    blocks, offset = [], 0
    for n in counts:
        blocks.append(flat[offset:offset + n * per_shot].reshape(n, n_obs, n_time))
        offset += n * per_shot
    try:
        return LabeledDataset(tuple(classes), tuple(blocks), dt)
    except (ValueError, DimensionMismatch) as exc:
        raise FormatError(f"{path}: {exc}") from None


def model_to_dict(model: TrainedTpp) -> dict:
    return {
        "classes": list(model.classes),
        "lambda": model.lam,
        "method": model.method,
        "W": model.W.tolist(),
        "b": model.b.tolist(),
    }


def write_model(model: TrainedTpp, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)) + "\n")


def read_model(path) -> TrainedTpp:
    try:
        d = json.loads(Path(path).read_text())
        return TrainedTpp(
            W=np.array(d["W"], dtype=np.float64),
            b=np.array(d["b"], dtype=np.float64),
            lam=d["lambda"],
            method=d["method"],
            classes=tuple(d["classes"]),
        )
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"{path}: malformed model file ({exc})") from None
