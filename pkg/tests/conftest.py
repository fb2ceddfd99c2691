import numpy as np
import pytest

# One verdict line per acceptance criterion, echoed in the terminal summary
# regardless of capture mode.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_stable_block(rng, p, k, target_radius=0.9):
    """Random (P, K*P) coefficient block rescaled to the given companion radius."""
    from varstream.model import companion_spectral_radius

    phi = rng.normal(scale=0.4, size=(p, k * p))
    r = companion_spectral_radius(phi)
    if r > 0:
        phi *= target_radius / r
    return phi


def random_psd(rng, p, scale=1.0):
    a = rng.normal(size=(p, p))
    return scale * (a @ a.T) / p + 0.1 * np.eye(p)
