"""Desk-scale reproduction recipes.

Each recipe simulates fresh train and eval sets from one seed, compares the
TPP with FGDA baselines, writes plot-ready CSV rows and checks the expected
trends. Comparisons "within 2 sigma" use the combined binomial error of the
two infidelities involved.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .datamodel import estimate_moments
from .discriminators import classify_argmax, classify_gaussian, fgda_pipeline, fit_gaussian, multi_fgda
from .errors import UnknownRecipe
from .filters import analytic_filters, boxcar_filter, filters_to_model, matched_filter
from .metrics import EvalReport, e_metric, e_metric_se, fidelity, noise_psd
from .seeds import derive_seed
from .simulator import KAPPA_DEMO, CavityConfig, NoiseSpec, simulate, transmon_chis
from .training import predict, train_numeric

US = 1e-6


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


@dataclass
class RecipeResult:
    name: str
    header: list
    rows: list
    checks: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header)
            for row in self.rows:
                w.writerow([_fmt(v) for v in row])

    def summary(self) -> dict:
        return {
            "recipe": self.name,
            "passed": self.passed,
            "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in self.checks],
            **self.extra,
        }


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _sigma(a: EvalReport, b: EvalReport) -> float:
    return float(np.hypot(a.binomial_se, b.binomial_se))


def _pair(cfg, noise, classes, n_shots, seed, tag):
    train = simulate(cfg, noise, classes, n_shots, derive_seed(seed, f"{tag}/train"))
    held = simulate(cfg, noise, classes, n_shots, derive_seed(seed, f"{tag}/eval"))
    return train, held


def _tpp_gaussian(model, train, X):
    """Gaussian discriminator on the first C-1 TPP outputs (the last is redundant)."""
    C = train.n_classes
    feats = [predict(model, train.flat(c))[:, : C - 1] for c in range(C)]
    return classify_gaussian(fit_gaussian(feats), predict(model, X)[:, : C - 1])


# ------------------------------------------------------------------ fig 2


FIG2_AMPLITUDES = (0.5, 0.7, 0.9)  # eta / kappa


def fig2_white_noise_3state(seed: int = 0, n_shots: int = 4000) -> RecipeResult:
    """Three-state (e, g, f) readout in white noise at three drive amplitudes."""
    classes = ("e", "g", "f")
    methods = ("tpp", "fgda:e-g", "fgda:e-f", "fgda:g-f", "fgda:boxcar", "multi-fgda:g,e")
    rows, checks = [], []
    for amp in FIG2_AMPLITUDES:
        cfg = CavityConfig(
            kappa=KAPPA_DEMO, chi=transmon_chis(states="egf"), eta=amp * KAPPA_DEMO,
            t_on=0.1 * US, t_off=1.9 * US, t_meas=2.0 * US, dt=0.01 * US,
        )
        train, held = _pair(cfg, NoiseSpec(), classes, n_shots, seed, f"fig2/{amp}")
        X, y = held.stacked()
        model = filters_to_model(analytic_filters(estimate_moments(train), assume_white=True), classes)
        labels = {"tpp": _tpp_gaussian(model, train, X)}
        for a, b in (("e", "g"), ("e", "f"), ("g", "f")):
            labels[f"fgda:{a}-{b}"] = fgda_pipeline(matched_filter(train, a, b), train, held)
        labels["fgda:boxcar"] = fgda_pipeline(boxcar_filter(cfg), train, held)
        labels["multi-fgda:g,e"] = multi_fgda(train, held, ("g", "e"), seed=derive_seed(seed, f"fig2/{amp}/multi"))
        rep = {m: fidelity(y, labels[m], 3, classes) for m in methods}
        for m in methods:
            rows.append([amp, m, rep[m].infidelity, rep[m].binomial_se])
        t = rep["tpp"]
        for m in ("fgda:e-g", "fgda:e-f", "fgda:boxcar"):
            s = _sigma(t, rep[m])
            checks.append(Check(
                f"amp {amp}: TPP <= {m}",
                t.infidelity <= rep[m].infidelity + 2 * s,
                f"{t.infidelity:.4f} vs {rep[m].infidelity:.4f} (2 sigma {2 * s:.4f})",
            ))
        g = rep["fgda:g-f"]
        s = _sigma(t, g)
        checks.append(Check(
            f"amp {amp}: fgda:g-f within 2 sigma of TPP",
            abs(g.infidelity - t.infidelity) <= 2 * s,
            f"{g.infidelity:.4f} vs {t.infidelity:.4f} (2 sigma {2 * s:.4f})",
        ))
    return RecipeResult("fig2-white-noise-3state", ["amplitude", "method", "infidelity", "se"], rows, checks)


# ------------------------------------------------------------------ fig 4

# (gain, eta / kappa): drive chosen per gain so the FGDA infidelity sits near 5%
FIG4_POINTS = ((50.0, 13.0), (200.0, 21.0), (800.0, 37.0))


def fig4_config(amp: float) -> CavityConfig:
    return CavityConfig(
        kappa=KAPPA_DEMO, chi=transmon_chis(states="eg"), eta=amp * KAPPA_DEMO,
        t_on=0.5 * US, t_off=0.8 * US, t_meas=1.0 * US, dt=0.01 * US,
    )


def _pre_norm(f, n0: int, n_obs: int = 2) -> float:
    f = np.asarray(f) / np.linalg.norm(f)
    return float(np.linalg.norm(f.reshape(n_obs, -1)[:, :n0]))


def fig4_amplifier(seed: int = 0, n_shots: int = 8000) -> RecipeResult:
    """Binary g/e readout through a finite-bandwidth amplifier at three gains."""
    classes = ("g", "e")
    rows, checks, es = [], [], []
    last = None
    for gain, amp in FIG4_POINTS:
        cfg = fig4_config(amp)
        noise = NoiseSpec(model="amplifier", gain_tr=gain, gamma_over_kappa=5.0, n_cl=30.0)
        train, held = _pair(cfg, noise, classes, n_shots, seed, f"fig4/{gain}")
        X, y = held.stacked()
        model = train_numeric(train)
        t = fidelity(y, classify_argmax(model, X), 2, classes)
        f = fidelity(y, fgda_pipeline(matched_filter(train, "g", "e"), train, held), 2, classes)
        E, E_se = e_metric(t.fidelity, f.fidelity), e_metric_se(t.fidelity, t.binomial_se, f.fidelity, f.binomial_se)
        n0 = cfg.index_of(cfg.t_on)
        white = analytic_filters(estimate_moments(train), assume_white=True).filters[0]
        pre_ratio = _pre_norm(model.W[0], n0) / _pre_norm(white, n0)
        # records cut at t_on carry no state information
        tr_pre, ev_pre = train.window(0, n0), held.window(0, n0)
        Xp, yp = ev_pre.stacked()
        tp = fidelity(yp, classify_argmax(train_numeric(tr_pre), Xp), 2, classes)
        fp = fidelity(yp, fgda_pipeline(matched_filter(tr_pre, "g", "e"), tr_pre, ev_pre), 2, classes)
        rows.append([gain, amp, t.infidelity, t.binomial_se, f.infidelity, f.binomial_se, E, E_se,
                     pre_ratio, tp.infidelity, fp.infidelity])
        es.append(E)
        checks.append(Check(f"gain {gain:g}: E > 0", E > 0, f"E = {E:.1f} +- {E_se:.1f}"))
        for label, r in (("TPP", tp), ("FGDA", fp)):
            checks.append(Check(
                f"gain {gain:g}: {label} on t < t_on is at chance",
                abs(r.infidelity - 0.5) <= 2 * r.binomial_se,
                f"{r.infidelity:.4f} (2 sigma {2 * r.binomial_se:.4f})",
            ))
        last = (gain, t, f, pre_ratio)
    checks.append(Check("E increases with gain", bool(np.all(np.diff(es) > 0)), ", ".join(f"{e:.1f}" for e in es)))
    gain, t, f, pre_ratio = last
    ratio = f.infidelity / t.infidelity if t.infidelity > 0 else np.inf
    checks.append(Check(f"gain {gain:g}: FGDA/TPP infidelity >= 2", ratio >= 2, f"ratio {ratio:.2f}"))
    checks.append(Check(f"gain {gain:g}: pre-t_on filter norm ratio >= 5", pre_ratio >= 5, f"ratio {pre_ratio:.1f}"))
    header = ["gain", "amplitude", "tpp_infidelity", "tpp_se", "fgda_infidelity", "fgda_se", "E", "E_se",
              "pre_norm_ratio", "tpp_pre_infidelity", "fgda_pre_infidelity"]
    return RecipeResult("fig4-amplifier", header, rows, checks)


# ------------------------------------------------------------------ fig 5

FIG5_AMPLITUDE = 1.5
FIG5_RATES = (
    ("none", {}),
    ("eg-2.5e5", {"e->g": 2.5e5}),
    ("eg-5e5", {"e->g": 5e5}),
    ("eg-1e6", {"e->g": 1e6}),
    ("all", {"e->g": 2e6, "g->e": 5e5, "e->f": 1e6, "f->e": 5e5, "g->f": 2e5}),
)


def low_frequency_peak(S) -> float:
    """Mean of the three lowest bins over the mean of the upper three quarters."""
    S = np.asarray(S)
    return float(S[:3].mean() / S[len(S) // 4:].mean())


def fig5_jumps(seed: int = 0, n_shots: int = 8000) -> RecipeResult:
    """Binary e/g readout with qubit transitions during the measurement."""
    classes = ("e", "g")
    cfg = CavityConfig(
        kappa=KAPPA_DEMO, chi=transmon_chis(states="egf"), eta=FIG5_AMPLITUDE * KAPPA_DEMO,
        t_on=0.1 * US, t_off=1.0 * US, t_meas=1.0 * US, dt=0.01 * US,
    )
    rows, checks, peaks = [], [], {}
    results = {}
    for tag, rates in FIG5_RATES:
        noise = NoiseSpec(model="jumps", rates=rates)
        train, held = _pair(cfg, noise, classes, n_shots, seed, f"fig5/{tag}")
        X, y = held.stacked()
        t = fidelity(y, classify_argmax(train_numeric(train), X), 2, classes)
        f = fidelity(y, fgda_pipeline(matched_filter(train, "e", "g"), train, held), 2, classes)
        E, E_se = e_metric(t.fidelity, f.fidelity), e_metric_se(t.fidelity, t.binomial_se, f.fidelity, f.binomial_se)
        pe = low_frequency_peak(noise_psd(train, "e", 0)[1])
        pg = low_frequency_peak(noise_psd(train, "g", 0)[1])
        peaks[tag] = (pe, pg)
        results[tag] = (E, E_se)
        rows.append([tag, rates.get("e->g", 0.0), t.infidelity, t.binomial_se, f.infidelity, f.binomial_se, E, E_se, pe, pg])
    E0, s0 = results["none"]
    checks.append(Check("no transitions: |E| <= 2 sigma", abs(E0) <= 2 * s0, f"E = {E0:.1f} +- {s0:.1f}"))
    Ea, sa = results["all"]
    checks.append(Check("all transitions: E > 0", Ea > 0, f"E = {Ea:.1f} +- {sa:.1f}"))
    eg = ["none", "eg-2.5e5", "eg-5e5", "eg-1e6"]
    pe = [peaks[t][0] for t in eg]
    pg = [peaks[t][1] for t in eg]
    checks.append(Check("S(e) low-frequency peak grows with gamma_eg", bool(np.all(np.diff(pe) > 0)),
                        ", ".join(f"{p:.2f}" for p in pe)))
    checks.append(Check("S(g) stays flat when only gamma_eg > 0", bool(np.all(np.abs(np.array(pg) - 1) <= 0.1)),
                        ", ".join(f"{p:.2f}" for p in pg)))
    header = ["rates", "gamma_eg", "tpp_infidelity", "tpp_se", "fgda_infidelity", "fgda_se", "E", "E_se",
              "psd_peak_e", "psd_peak_g"]
    return RecipeResult("fig5-jumps", header, rows, checks)


# ------------------------------------------------------------------ pink

PINK_AMPLITUDE = 6.0
PINK_RATIOS = (0.0, 0.25, 1.0)  # (sigma_P / sigma_W)^2
PINK_SIGMA_W = float(np.sqrt(30.0))


def pink_noise(seed: int = 0, n_shots: int = 8000) -> RecipeResult:
    """Binary e/g readout with white plus 1/f classical noise."""
    classes = ("e", "g")
    cfg = CavityConfig(
        kappa=KAPPA_DEMO, chi=transmon_chis(states="eg"), eta=PINK_AMPLITUDE * KAPPA_DEMO,
        t_on=0.2 * US, t_off=1.0 * US, t_meas=1.0 * US, dt=0.01 * US,
    )
    rows, checks = [], []
    for r in PINK_RATIOS:
        noise = NoiseSpec(model="pink-mix", sigma_w=PINK_SIGMA_W, sigma_p=PINK_SIGMA_W * np.sqrt(r))
        train, held = _pair(cfg, noise, classes, n_shots, seed, f"pink/{r}")
        X, y = held.stacked()
        t = fidelity(y, classify_argmax(train_numeric(train), X), 2, classes)
        f = fidelity(y, fgda_pipeline(matched_filter(train, "e", "g"), train, held), 2, classes)
        E, E_se = e_metric(t.fidelity, f.fidelity), e_metric_se(t.fidelity, t.binomial_se, f.fidelity, f.binomial_se)
        rows.append([r, t.infidelity, t.binomial_se, f.infidelity, f.binomial_se, E, E_se])
        if r == 0:
            checks.append(Check("ratio 0: |E| < 2 sigma", abs(E) < 2 * E_se, f"E = {E:.1f} +- {E_se:.1f}"))
        else:
            checks.append(Check(f"ratio {r:g}: E > 0", E > 0, f"E = {E:.1f} +- {E_se:.1f}"))
    header = ["ratio", "tpp_infidelity", "tpp_se", "fgda_infidelity", "fgda_se", "E", "E_se"]
    return RecipeResult("pink-noise", header, rows, checks)


RECIPES = {
    "fig2-white-noise-3state": fig2_white_noise_3state,
    "fig4-amplifier": fig4_amplifier,
    "fig5-jumps": fig5_jumps,
    "pink-noise": pink_noise,
}


def run_repro(name: str, seed: int = 0, n_shots: int | None = None, out_dir=None) -> RecipeResult:
    """Run a recipe; with ``out_dir`` also write ``<name>.csv`` and ``<name>.json``."""
    if name not in RECIPES:
        raise UnknownRecipe(f"unknown recipe {name!r}; choose from {sorted(RECIPES)}")
    kwargs = {"seed": seed}
    if n_shots is not None:
        kwargs["n_shots"] = n_shots
    result = RECIPES[name](**kwargs)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        result.write_csv(out / f"{name}.csv")
        (out / f"{name}.json").write_text(json.dumps(result.summary(), indent=2) + "\n")
    return result
