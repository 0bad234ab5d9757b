import numpy as np
import pytest

from hodgekit import BeltramiField, TorusGrid

# one line per acceptance criterion, collected by tests/test_acceptance.py
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def record(key: str, passed: bool, detail: str) -> None:
    ACCEPTANCE[key] = (bool(passed), detail)
    print(f"{key}: {'PASS' if passed else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k.split()[0][1:])):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key}  {detail}")


def fd4(values, h, axis):
    """Fourth-order centered difference along ``axis`` of periodic samples."""
    r = np.roll
    return (8.0 * (r(values, -1, axis) - r(values, 1, axis)) - (r(values, -2, axis) - r(values, 2, axis))) / (12.0 * h)


def observed_order(errors):
    e = np.asarray(errors, float)
    return np.log2(e[:-1] / e[1:])


def trig_eval(grid, coef, points):
    """Evaluate the trigonometric polynomial with coefficients ``coef`` at real points ``(m, 2n)``."""
    nz = np.nonzero(np.abs(coef) > 0)
    ks = np.stack([np.fft.fftfreq(grid.N, 1.0 / grid.N)[idx] for idx in nz], axis=1)
    return np.exp(1j * points @ ks.T) @ coef[nz]


def split_field(grid, rng, band):
    """Diagonal field with ``phi^i_ibar`` a function of ``z_i`` alone; ``t * phi`` is integrable for every t."""
    g1 = TorusGrid(1, grid.N)
    data = np.zeros((grid.n, grid.n) + grid.shape, complex)
    for i in range(grid.n):
        shape = [1] * grid.ndim
        shape[2 * i] = shape[2 * i + 1] = grid.N
        data[i, i] = g1.random_values(rng, band=band).reshape(shape)
    phi = BeltramiField(grid, data)
    return phi * (1.0 / phi.sup_norm())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def grid1():
    return TorusGrid(1, 32)


@pytest.fixture(scope="session")
def grid2():
    return TorusGrid(2, 8)
