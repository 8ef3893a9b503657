import json

import numpy as np
import pytest

from tpp.errors import ConfigError, UnknownClass
from tpp.metrics import fit_lorentzian, noise_psd
from tpp.simulator import (
    KAPPA_DEMO,
    CavityConfig,
    NoiseSpec,
    cavity_mean_trace,
    load_config,
    ou_noise,
    parse_config,
    pink_noise,
    sample_jumps,
    simulate,
    transmon_chis,
)

from conftest import demo_config


def test_demo_shifts():
    chis = transmon_chis()
    chi = 0.195 * KAPPA_DEMO
    assert chis == pytest.approx({"e": -chi, "g": chi, "f": -3 * chi, "h": -5 * chi})


def test_no_drive_gives_zero_trace():
    cfg = demo_config(eta_over_kappa=0.0)
    assert not cavity_mean_trace(cfg, "e").values.any()


def test_steady_state():
    k = KAPPA_DEMO
    eta = 0.7 * k
    cfg = CavityConfig(kappa=k, chi={"z": 0.0}, eta=eta, t_on=0, t_off=10e-6, t_meas=10e-6, dt=1e-8)
    tr = cavity_mean_trace(cfg, "z").values
    assert abs(tr[0, -1]) < 1e-9 * abs(tr[1, -1])
    assert tr[1, -1] == pytest.approx(-2 * np.sqrt(2 * k) * eta / k, rel=1e-9)


def test_chi_mirror_symmetry():
    cfg = CavityConfig(kappa=KAPPA_DEMO, chi={"a": 0.3 * KAPPA_DEMO, "b": -0.3 * KAPPA_DEMO},
                       eta=KAPPA_DEMO, t_on=1e-7, t_off=8e-7, t_meas=1e-6, dt=1e-8)
    a = cavity_mean_trace(cfg, "a").values
    b = cavity_mean_trace(cfg, "b").values
    assert np.allclose(a[0], -b[0], atol=1e-12 * np.abs(a).max())
    assert np.allclose(a[1], b[1], atol=1e-12 * np.abs(a).max())
    assert np.abs(a[0]).max() > 0.1 * np.abs(a).max()


def test_rk4_step_convergence():
    # halving dt must not change the sampled trace beyond O(dt^4) noise
    coarse = cavity_mean_trace(demo_config(dt=1e-8), "f").values
    fine = cavity_mean_trace(demo_config(dt=5e-9), "f").values[:, ::2]
    assert np.abs(coarse - fine).max() < 1e-6 * np.abs(fine).max()


def test_config_validation():
    with pytest.raises(ConfigError):
        demo_config(t_on=0.5e-6, t_off=0.2e-6)
    with pytest.raises(ConfigError):
        CavityConfig(kappa=1.0, chi={}, eta=1.0, t_on=0, t_off=1, t_meas=1.0, dt=0.3)
    with pytest.warns(UserWarning):
        CavityConfig(kappa=1.0, chi={}, eta=1.0, t_on=0, t_off=1, t_meas=1.0, dt=0.5)
    with pytest.raises(ConfigError):
        NoiseSpec(model="brown")
    with pytest.raises(ConfigError):
        NoiseSpec(model="jumps", rates={"e->e": 1.0})
    with pytest.raises(ConfigError):
        NoiseSpec(model="jumps", rates={"e->g": -1.0})


def test_unknown_class():
    with pytest.raises(UnknownClass):
        simulate(demo_config(states="eg"), NoiseSpec(), ("e", "h"), 2, 0)


def test_white_noise_clt_bound():
    cfg = demo_config(eta_over_kappa=0.0, t_meas=0.5e-6, t_off=0.5e-6)
    ds = simulate(cfg, NoiseSpec(), ("e", "g"), 10_000, 1)
    m = ds.shots[0].mean(axis=0)
    assert np.abs(m).max() < 5 * np.sqrt(1 / (cfg.dt * 10_000))


def test_iq_variances():
    cfg = demo_config(eta_over_kappa=0.0, t_meas=0.3e-6, t_off=0.3e-6)
    ds = simulate(cfg, NoiseSpec(model="iq-variances", sigma_i2=1.0, sigma_q2=4.0), ("g", "e"), 4000, 2)
    var = ds.shots[0].var(axis=0).mean(axis=1) * cfg.dt
    assert var == pytest.approx([1.0, 4.0], rel=0.03)


def test_determinism_and_shot_streams():
    cfg = demo_config(t_meas=0.4e-6, t_off=0.3e-6)
    noise = NoiseSpec(model="jumps", rates={"e->g": 3e6})
    a = simulate(cfg, noise, ("e", "g"), 6, 9)
    b = simulate(cfg, noise, ("e", "g"), 6, 9)
    for x, y in zip(a.shots, b.shots):
        assert x.tobytes() == y.tobytes()
    # shot n does not depend on how many shots were requested
    c = simulate(cfg, noise, ("e", "g"), 3, 9)
    assert np.array_equal(c.shots[0], a.shots[0][:3])
    d = simulate(cfg, noise, ("e", "g"), 6, 10)
    assert not np.array_equal(d.shots[0], a.shots[0])


def test_jumps_without_rates_equal_white():
    cfg = demo_config(t_meas=0.5e-6, t_off=0.4e-6)
    a = simulate(cfg, NoiseSpec(), ("e", "g", "f"), 20, 4)
    b = simulate(cfg, NoiseSpec(model="jumps"), ("e", "g", "f"), 20, 4)
    for x, y in zip(a.shots, b.shots):
        assert np.allclose(x, y, rtol=0, atol=1e-9 * np.abs(x).max())


def test_two_state_occupancy():
    gamma = 2e6
    R = np.array([[0.0, gamma], [0.0, 0.0]])
    rng = np.random.default_rng(0)
    n = 20_000
    times = np.array([0.2e-6, 0.5e-6, 1.0e-6])
    first_jump = np.array([(sample_jumps(rng, 0, R, 2e-6)[0] or [np.inf])[0] for _ in range(n)])
    for t in times:
        p = np.mean(first_jump > t)
        q = np.exp(-gamma * t)
        assert abs(p - q) < 3 * np.sqrt(q * (1 - q) / n)


def test_ou_autocorrelation_rate():
    rate, dt, n_t = 2e6, 1e-8, 200
    rng = np.random.default_rng(5)
    x = ou_noise(rng.standard_normal((10_000, n_t)), rate, 1.0, dt)
    lags = np.arange(1, 40)
    ac = np.array([np.mean(x[:, :-k] * x[:, k:]) for k in lags])
    slope = np.polyfit(lags * dt, np.log(ac), 1)[0]
    assert -slope == pytest.approx(rate, rel=0.10)
    assert x.var() == pytest.approx(1.0, rel=0.03)


def test_pink_power_matches_white():
    rng = np.random.default_rng(6)
    dt, n_t = 1e-8, 100
    p = pink_noise(rng, n_t, dt, n_rows=20_000)
    w = rng.standard_normal((20_000, n_t)) / np.sqrt(dt)
    assert p.var() == pytest.approx(w.var(), rel=0.02)
    # 1/f shape: the lowest band carries far more power than the highest
    spec = np.abs(np.fft.rfft(p, axis=1)) ** 2
    lo, hi = spec[:, 1:3].mean(), spec[:, -10:-1].mean()
    assert lo > 10 * hi


def test_amplifier_unit_gain_is_flat():
    cfg = demo_config(eta_over_kappa=0.0, t_meas=1e-6, t_off=1e-6)
    ds = simulate(cfg, NoiseSpec(model="amplifier", gain_tr=1.0, n_cl=0.0, gamma_over_kappa=1e6), ("g", "e"), 10_000, 3)
    _, S = noise_psd(ds, 0, 0)
    assert np.all(np.abs(S / S.mean() - 1) < 0.1)


def test_amplifier_ou_lorentzian():
    cfg = demo_config(eta_over_kappa=0.0, t_meas=4e-6, t_off=4e-6)
    noise = NoiseSpec(model="amplifier", gain_tr=25.0, n_cl=0.0)
    ds = simulate(cfg, noise, ("g", "e"), 10_000, 8)
    f, S = noise_psd(ds, 0, 0)
    _, width, _ = fit_lorentzian(f, S)
    assert width == pytest.approx(noise.gamma_eff(cfg.kappa) / (2 * np.pi), rel=0.15)


CONFIG = {
    "cavity": {"kappa": KAPPA_DEMO, "chi": {"e": -1e6, "g": 1e6}, "eta": 1e7,
               "t_on": 1e-7, "t_off": 5e-7, "t_meas": 6e-7, "dt": 1e-8},
    "noise": {"model": "white"},
    "classes": ["e", "g"],
    "n_shots": 5,
    "seed": 3,
}


def test_parse_config_roundtrip(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(CONFIG))
    cfg, noise, classes, n, seed = load_config(p)
    assert classes == ("e", "g") and n == 5 and seed == 3 and cfg.n_time == 60 and noise.model == "white"


@pytest.mark.parametrize("where", ["top", "cavity", "noise"])
def test_parse_config_strict(where):
    d = json.loads(json.dumps(CONFIG))
    target = d if where == "top" else d[where]
    target["colour"] = "blue"
    with pytest.raises(ConfigError, match="colour"):
        parse_config(d)


def test_load_config_bad_json(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{")
    with pytest.raises(ConfigError):
        load_config(p)
