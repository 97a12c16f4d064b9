import numpy as np
import pytest

from reinflow.numerics import flatten_params
from reinflow.numerics.rng import SeededRng


def rel_err(analytic, numeric) -> float:
    """Worst component error relative to the gradient's magnitude."""
    a = np.asarray(analytic, dtype=np.float64).reshape(-1)
    f = np.asarray(numeric, dtype=np.float64).reshape(-1)
    scale = max(float(np.max(np.abs(f))), 1e-8)
    return float(np.max(np.abs(a - f)) / scale)


def flat_grads(grads) -> np.ndarray:
    return flatten_params(grads.param_arrays())


@pytest.fixture
def rng():
    return SeededRng(1234, 0)
