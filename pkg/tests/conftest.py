import numpy as np
import pytest

from uqbench.physics import ScenarioConfig, UncertainInput


class FakeModel:
    """Synthetic vector-valued model with the SolverModel call surface."""

    def __init__(self, fn):
        self.fn = fn
        self.run_count = 0

    def run_many(self, omegas):
        omegas = np.atleast_2d(np.asarray(omegas, dtype=float))
        self.run_count += omegas.shape[0]
        return np.array([np.atleast_1d(self.fn(om)) for om in omegas])


@pytest.fixture(scope="session")
def cfg():
    return ScenarioConfig()


@pytest.fixture(scope="session")
def nominal(cfg):
    return UncertainInput.nominal(cfg)


def restrict(values: np.ndarray, factor: int) -> np.ndarray:
    """Average consecutive groups of ``factor`` fine cells onto coarse cells."""
    return values.reshape(-1, factor).mean(axis=1)
