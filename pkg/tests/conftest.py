import warnings

import numpy as np
import pytest

from subdynamics import FormFactor, ModelConfig, Observable, StateFunctional
from subdynamics.grid import RegimeWarning


def random_observable(grid, rng, scale=1.0):
    n = grid.size
    size = 1 + 3 * n + n * n
    vec = rng.normal(size=size) + 1j * rng.normal(size=size)
    return Observable.unflatten(scale * vec, grid)


def random_state(grid, rng, rho1=0.4):
    """Physical state: real diagonal parts, conjugate coherences, Hermitian kernel, unit trace."""
    n = grid.size
    w = grid.weights
    rho_w = rng.uniform(0.1, 1.0, n)
    rho_w *= (1 - rho1) / np.dot(w, rho_w)
    c = 0.1 * (rng.normal(size=n) + 1j * rng.normal(size=n))
    k = 0.1 * (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    k = k + k.conj().T
    np.fill_diagonal(k, 0.0)
    return StateFunctional.from_components([rho1, rho_w, c, c.conj(), k], grid)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_cfg():
    return ModelConfig.build(n=24, lam=0.1)


@pytest.fixture
def gauss_cfg():
    return ModelConfig.build(n=30, lam=0.1, cutoff=4.0, form_factor=FormFactor("gaussian-bump"))


@pytest.fixture
def gl_cfg():
    return ModelConfig.build(n=25, lam=0.1, cutoff=3.0, rule="gauss-legendre", order=5,
                             form_factor=FormFactor("lorentzian"))


def quiet_config(**kw):
    """ModelConfig.build without the large-coupling warning."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        return ModelConfig.build(**kw)


# acceptance criteria report one line each at the end of the session
ACCEPTANCE_LINES: list = []


def record_criterion(label, ok, detail):
    line = f"criterion {label}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES.append(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
