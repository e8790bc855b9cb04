import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def rotation_23n(rng, n):
    """Random orthogonal map acting on coordinates 2..n of an ambient vector of length n+1."""
    m = rng.normal(size=(n - 1, n - 1))
    qmat, _ = np.linalg.qr(m)
    R = np.eye(n + 1)
    R[1:n, 1:n] = qmat
    return R


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod and getattr(mod, "RESULTS", None):
        terminalreporter.section("acceptance")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
