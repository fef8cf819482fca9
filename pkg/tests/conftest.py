import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from parasource.spectral import Grid

settings.register_profile("ci", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))


def brute_dft(values, grid):
    """O(N^2) direct evaluation of the quadrature transform, angular frequencies."""
    x = grid.axes()[0]
    n = len(x)
    xi = 2 * np.pi * np.fft.fftfreq(n, d=grid.spacing[0])
    kernel = np.exp(-1j * np.outer(xi, x))
    return grid.spacing[0] / np.sqrt(2 * np.pi) * kernel @ values


@pytest.fixture
def grid1d():
    return Grid.cube(-10.0, 10.0, 257)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "CRITERIA", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(lines):
        terminalreporter.write_line(lines[num])
