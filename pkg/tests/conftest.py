"""Shared fixtures and the acceptance-criteria reporting hook."""

import numpy as np
import pytest

from chaosid.datagen import ExperimentConfig, ParameterPrior, generate_dataset

_CRITERION_LINES = []


def record_criterion(number, ok, detail):
    """Record one acceptance-criterion verdict and return the summary line."""
    line = f"[criterion {number:2d}] {'PASS' if ok else 'FAIL'} - {detail}"
    _CRITERION_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERION_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_config():
    """Experiment-1 configuration shrunk to 12 simulations for fast tests."""
    return ExperimentConfig(
        id=1, K=4, J=4, F=10.0, regime="EARLY",
        n_sims=12, holdout_sims=4, n_keep=1400, n_discard=50, master_seed=7,
    )


@pytest.fixture(scope="session")
def small_dataset(small_config):
    """Dataset generated once from small_config (40 train / 20 test rows)."""
    return generate_dataset(small_config, ParameterPrior())


@pytest.fixture(scope="session")
def rng_factory():
    """Factory for independent, reproducible generators."""
    def make(seed=0):
        return np.random.default_rng(seed)
    return make
