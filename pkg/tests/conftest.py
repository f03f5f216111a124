from pathlib import Path

import numpy as np
import pytest

DATA = Path(__file__).parent / "data"


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


@pytest.fixture
def data_dir():
    return DATA


def gaussian_panel(rng, n=5, t=50, p=3, alpha=None):
    """Independent Gaussian returns on Gaussian factors, N x T and T x p."""
    F = rng.normal(size=(t, p))
    beta = rng.normal(size=(n, p))
    Y = beta @ F.T + rng.normal(size=(n, t))
    if alpha is not None:
        Y = Y + np.asarray(alpha)[:, None]
    return Y, F


@pytest.fixture(scope="session")
def null_stats():
    """Per-replication reports under a cross-sectionally independent Gaussian null."""
    from alphaq.experiments import simulate_cell
    from alphaq.simulation import AlphaSpec, SimConfig

    cache = {}

    def get(N, T=240, reps=2000, seed=11, threads=1):
        key = (N, T, reps, seed, threads)
        if key not in cache:
            config = SimConfig(T=T, N=N, seed=seed, latent=False)
            cache[key] = simulate_cell(config, AlphaSpec.null(), reps, threads=threads)
        return cache[key]

    return get


ACCEPTANCE_LINES = []


@pytest.fixture
def report_line():
    """Record one PASS/FAIL line for the acceptance summary."""

    def record(name, passed, detail):
        ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
