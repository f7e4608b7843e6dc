import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_simplex(rng, shape, sparsity=0.0):
    """Random distributions along the last axis, optionally with exact zeros."""
    x = rng.gamma(0.7, size=shape)
    if sparsity:
        x = np.where(rng.random(shape) < sparsity, 0.0, x)
        flat = x.reshape(-1, shape[-1])
        empty = flat.sum(axis=1) == 0
        flat[empty, 0] = 1.0
    return x / x.sum(axis=-1, keepdims=True)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
