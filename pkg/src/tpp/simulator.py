"""Synthetic heterodyne readout records.

Class means come from the driven, damped cavity field

    d(alpha)/dt = -[i(chi_p - delta_da) + kappa/2] alpha - i eta u(t),

with u(t) = 1 on [t_on, t_off), and are reported as
I = sqrt(2 kappa) Re(alpha), Q = sqrt(2 kappa) Im(alpha). Noise is added
according to a :class:`NoiseSpec`. White heterodyne noise has variance
1/dt per sample and every other amplitude is expressed in those units.

Each shot draws from its own generator seeded with (seed, class index, shot
index), so a dataset is a pure function of its inputs and shots can be
generated in any order.
"""

from __future__ import annotations

import dataclasses
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .datamodel import HeterodyneRecord, LabeledDataset
from .errors import ConfigError, UnknownClass

KAPPA_DEMO = 2 * np.pi * 1.54e6
CHI_OVER_KAPPA_DEMO = 0.195
# transmon ladder: chi_p / chi for e, g, f, h
TRANSMON_CHI_PATTERN = {"e": -1.0, "g": 1.0, "f": -3.0, "h": -5.0}

NOISE_MODELS = ("white", "iq-variances", "amplifier", "jumps", "pink-mix")


def transmon_chis(kappa: float = KAPPA_DEMO, chi_over_kappa: float = CHI_OVER_KAPPA_DEMO, states="egfh") -> dict:
    chi = chi_over_kappa * kappa
    return {s: TRANSMON_CHI_PATTERN[s] * chi for s in states}


@dataclass(frozen=True)
class CavityConfig:
    """Readout cavity and drive. Rates in rad/s, times in s."""

    kappa: float
    chi: dict
    eta: float
    t_on: float
    t_off: float
    t_meas: float
    dt: float
    delta_da: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "chi", {str(k): float(v) for k, v in dict(self.chi).items()})
        if not self.kappa > 0:
            raise ConfigError("kappa must be positive")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if self.eta < 0:
            raise ConfigError("eta must be >= 0")
        if not (0 <= self.t_on <= self.t_off <= self.t_meas):
            raise ConfigError("need 0 <= t_on <= t_off <= t_meas")
        ratio = self.t_meas / self.dt
        if abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ConfigError("dt must divide t_meas")
        if self.kappa * self.dt > 0.1:
            warnings.warn(f"kappa*dt = {self.kappa * self.dt:.3g} > 0.1; RK4 error may matter", stacklevel=2)

    @property
    def n_time(self) -> int:
        return int(round(self.t_meas / self.dt))

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_time) * self.dt

    def index_of(self, t: float) -> int:
        """First sample index with time >= t."""
        return int(np.ceil(t / self.dt - 1e-9))

    def chi_of(self, name: str) -> float:
        try:
            return self.chi[name]
        except KeyError:
            raise UnknownClass(f"no dispersive shift configured for class {name!r}") from None


@dataclass(frozen=True)
class NoiseSpec:
    """Noise model and its parameters (unused ones are ignored).

    rates: transition rates in 1/s keyed "j->k" (jumps model).
    """

    model: str = "white"
    sigma_i2: float = 1.0
    sigma_q2: float = 1.0
    gain_tr: float = 1.0
    gamma_over_kappa: float = 5.0
    n_cl: float = 0.0
    rates: dict = field(default_factory=dict)
    sigma_w: float = 1.0
    sigma_p: float = 0.0

    def __post_init__(self):
        if self.model not in NOISE_MODELS:
            raise ConfigError(f"unknown noise model {self.model!r}; choose from {NOISE_MODELS}")
        for name in ("sigma_i2", "sigma_q2", "n_cl", "sigma_w", "sigma_p", "gamma_over_kappa"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.gain_tr < 1:
            raise ConfigError("gain_tr must be >= 1")
        rates = {}
        for key, val in dict(self.rates).items():
            src, _, dst = str(key).partition("->")
            if not dst:
                raise ConfigError(f"rate key {key!r} must look like 'e->g'")
            if src == dst:
                raise ConfigError(f"rate {key!r}: diagonal rates are not allowed")
            if val < 0:
                raise ConfigError(f"rate {key!r} must be >= 0")
            rates[f"{src}->{dst}"] = float(val)
        object.__setattr__(self, "rates", rates)

    def gamma_eff(self, kappa: float) -> float:
        """Amplifier response rate gamma / sqrt(G)."""
        return self.gamma_over_kappa * kappa / np.sqrt(self.gain_tr)


# ------------------------------------------------------------------ means


def _alpha(cfg: CavityConfig, jump_times, chis) -> np.ndarray:
    return kernels.integrate_cavity(
        jump_times, chis, cfg.kappa, cfg.delta_da, cfg.eta, cfg.t_on, cfg.t_off, cfg.dt, cfg.n_time
    )


def _quadratures(cfg: CavityConfig, alpha) -> np.ndarray:
    """(..., n_time) complex field -> (..., 2, n_time) I/Q means."""
    scale = np.sqrt(2.0 * cfg.kappa)
    return np.stack([scale * alpha.real, scale * alpha.imag], axis=-2)


def cavity_mean_trace(cfg: CavityConfig, p: str) -> HeterodyneRecord:
    """Noiseless I/Q record for a qubit held in state ``p``."""
    alpha = _alpha(cfg, np.empty((1, 0)), np.array([[cfg.chi_of(p)]]))[0]
    return HeterodyneRecord(_quadratures(cfg, alpha), cfg.dt)


def lowpass(x, rate: float, dt: float) -> np.ndarray:
    """One-pole low-pass y' = rate (x - y), exact for piecewise-constant x, y(0) = 0."""
    x = np.asarray(x, dtype=np.float64)
    shape = x.shape
    rows = x.reshape(-1, shape[-1])
    a = np.exp(-rate * dt)
    drive = np.zeros_like(rows)
    drive[:, 1:] = (1.0 - a) * rows[:, :-1]
    return kernels.ar1_filter(drive, a, np.zeros(rows.shape[0])).reshape(shape)


def ou_noise(white, rate: float, variance: float, dt: float) -> np.ndarray:
    """Stationary Ornstein-Uhlenbeck samples driven by unit normals ``white``.

    ``white`` has shape (..., n_time); the first sample sets the initial
    state drawn from the stationary distribution.
    """
    white = np.asarray(white, dtype=np.float64)
    shape = white.shape
    rows = white.reshape(-1, shape[-1])
    a = np.exp(-rate * dt)
    sd = np.sqrt(variance)
    drive = sd * np.sqrt(1.0 - a * a) * rows
    return kernels.ar1_filter(drive, a, sd * rows[:, 0]).reshape(shape)


def pink_noise(rng: np.random.Generator, n_time: int, dt: float, n_rows: int = 2) -> np.ndarray:
    """1/f noise over [1/(n_time dt), 1/(2 dt)] with expected variance 1/dt per sample."""
    n_freq = n_time // 2 + 1
    k = np.arange(n_freq)
    amp = np.zeros(n_freq)
    amp[1:] = 1.0 / np.sqrt(k[1:])
    re = rng.standard_normal((n_rows, n_freq))
    im = rng.standard_normal((n_rows, n_freq))
    coeff = amp * (re + 1j * im) / np.sqrt(2.0)
    weight = np.full(n_freq, 2.0)
    weight[0] = 0.0
    if n_time % 2 == 0:
        # Nyquist bin is real
        coeff[:, -1] = amp[-1] * re[:, -1]
        weight[-1] = 1.0
    var = (weight * amp**2).sum() / n_time**2
    x = np.fft.irfft(coeff, n=n_time, axis=-1)
    return x * np.sqrt(1.0 / (dt * var))


# ------------------------------------------------------------------ jumps


def _parse_rates(noise: NoiseSpec, states) -> np.ndarray:
    idx = {s: i for i, s in enumerate(states)}
    R = np.zeros((len(states), len(states)))
    for key, val in noise.rates.items():
        src, dst = key.split("->")
        if src not in idx or dst not in idx:
            raise UnknownClass(f"rate {key!r} refers to a state without a dispersive shift")
        R[idx[src], idx[dst]] = val
    return R


def sample_jumps(rng: np.random.Generator, start: int, rates: np.ndarray, t_end: float):
    """Gillespie path of a continuous-time Markov chain: (times, states)."""
    times, states = [], [start]
    t, cur = 0.0, start
    out = rates.sum(axis=1)
    while out[cur] > 0:
        t += rng.exponential(1.0 / out[cur])
        if t >= t_end:
            break
        cur = int(rng.choice(len(out), p=rates[cur] / out[cur]))
        times.append(t)
        states.append(cur)
    return times, states


# ------------------------------------------------------------------ driver


def _shot_rng(seed: int, p: int, n: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(p), int(n)])


def simulate_class(cfg: CavityConfig, noise: NoiseSpec, classes, p: int, n_shots: int, seed: int) -> np.ndarray:
    """Shots of class index ``p``, shape (n_shots, 2, n_time)."""
    name = classes[p]
    chi_p = cfg.chi_of(name)
    n_t, dt = cfg.n_time, cfg.dt
    rngs = [_shot_rng(seed, p, n) for n in range(n_shots)]
    white = np.stack([r.standard_normal((2, n_t)) for r in rngs]) if n_shots else np.zeros((0, 2, n_t))

    if noise.model == "jumps":
        states = list(cfg.chi)
        R = _parse_rates(noise, states)
        chi_vals = np.array([cfg.chi[s] for s in states])
        paths = [sample_jumps(r, states.index(name), R, cfg.t_meas) for r in rngs]
        width = max((len(t) for t, _ in paths), default=0)
        jt = np.full((n_shots, width), np.inf)
        ch = np.empty((n_shots, width + 1))
        for n, (t, s) in enumerate(paths):
            jt[n, : len(t)] = t
            ch[n, : len(s)] = chi_vals[s]
            ch[n, len(s):] = chi_vals[s[-1]]
        mean = _quadratures(cfg, _alpha(cfg, jt, ch))
        return mean + white / np.sqrt(dt)

    mean = _quadratures(cfg, _alpha(cfg, np.empty((1, 0)), np.array([[chi_p]]))[0])

    if noise.model == "white":
        return mean + white / np.sqrt(dt)
    if noise.model == "iq-variances":
        sd = np.sqrt(np.array([noise.sigma_i2, noise.sigma_q2]) / dt)[:, None]
        return mean + sd * white
    if noise.model == "amplifier":
        g_eff = noise.gamma_eff(cfg.kappa)
        ou_white = np.stack([r.standard_normal((2, n_t)) for r in rngs]) if n_shots else white
        signal = np.sqrt(noise.gain_tr) * lowpass(mean, g_eff, dt)
        corr = ou_noise(ou_white, g_eff, noise.gain_tr / dt, dt)
        return signal + corr + white * np.sqrt((1.0 + noise.n_cl) / dt)
    if noise.model == "pink-mix":
        classical_w = np.stack([r.standard_normal((2, n_t)) for r in rngs]) if n_shots else white
        pink = np.stack([pink_noise(r, n_t, dt) for r in rngs]) if n_shots else white
        return mean + (white + noise.sigma_w * classical_w) / np.sqrt(dt) + noise.sigma_p * pink
    raise ConfigError(f"unhandled noise model {noise.model!r}")


def simulate(cfg: CavityConfig, noise: NoiseSpec, classes, n_shots: int, seed: int) -> LabeledDataset:
    """Labelled dataset with ``n_shots`` records per class."""
    classes = tuple(classes)
    for c in classes:
        cfg.chi_of(c)
    blocks = tuple(simulate_class(cfg, noise, classes, p, n_shots, seed) for p in range(len(classes)))
    return LabeledDataset(classes, blocks, cfg.dt)


# ------------------------------------------------------------------ config


_CAVITY_KEYS = {f.name for f in dataclasses.fields(CavityConfig)}
_NOISE_KEYS = {f.name for f in dataclasses.fields(NoiseSpec)}
_TOP_KEYS = {"cavity", "noise", "classes", "n_shots", "seed"}


def _strict(d: dict, allowed: set, where: str) -> dict:
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")
    return d


def parse_config(d: dict):
    """Strictly parse a simulation config -> (cfg, noise, classes, n_shots, seed)."""
    _strict(d, _TOP_KEYS, "config")
    if "cavity" not in d:
        raise ConfigError("config needs a 'cavity' section")
    try:
        cfg = CavityConfig(**_strict(d["cavity"], _CAVITY_KEYS, "cavity"))
        noise = NoiseSpec(**_strict(d.get("noise", {}), _NOISE_KEYS, "noise"))
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    classes = tuple(d.get("classes", cfg.chi.keys()))
    return cfg, noise, classes, int(d.get("n_shots", 1000)), int(d.get("seed", 0))


def load_config(path):
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return parse_config(d)
