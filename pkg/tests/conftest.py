import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from tpp.datamodel import LabeledDataset
from tpp.simulator import KAPPA_DEMO, CavityConfig, NoiseSpec, simulate, transmon_chis

settings.register_profile("default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_dataset(rng, n_classes=2, n_obs=1, n_time=3, n_shots=10, spread=1.0, dt=1.0):
    """Small Gaussian dataset with distinct random class means."""
    blocks = []
    for _ in range(n_classes):
        mu = rng.normal(size=(n_obs, n_time)) * 3
        blocks.append(mu + spread * rng.normal(size=(n_shots, n_obs, n_time)))
    names = tuple("abcdefgh"[:n_classes])
    return LabeledDataset(names, tuple(blocks), dt)


def demo_config(eta_over_kappa=1.0, t_on=0.1e-6, t_off=0.9e-6, t_meas=1.0e-6, states="egf", dt=1e-8):
    return CavityConfig(
        kappa=KAPPA_DEMO, chi=transmon_chis(states=states), eta=eta_over_kappa * KAPPA_DEMO,
        t_on=t_on, t_off=t_off, t_meas=t_meas, dt=dt,
    )


def white_dataset(classes=("e", "g"), n_shots=2000, seed=0, eta_over_kappa=1.0, **kw):
    cfg = demo_config(eta_over_kappa, **kw)
    return simulate(cfg, NoiseSpec(), classes, n_shots, seed), cfg


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def record_acceptance(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"criterion {number:>2} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
