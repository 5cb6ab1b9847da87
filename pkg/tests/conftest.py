import numpy as np
import pytest

from pwsint import RegionSide, elliptic_system, harmonic_system, resolve_scheme


@pytest.fixture(scope="session")
def harmonic():
    return harmonic_system()


@pytest.fixture(scope="session")
def elliptic():
    return elliptic_system()


@pytest.fixture(scope="session")
def harmonic_dmm(harmonic):
    return (resolve_scheme("dmm-midpoint", harmonic, RegionSide.MINUS),
            resolve_scheme("dmm-midpoint", harmonic, RegionSide.PLUS))


@pytest.fixture(scope="session")
def harmonic_rk2(harmonic):
    return (resolve_scheme("rk2", harmonic, RegionSide.MINUS),
            resolve_scheme("rk2", harmonic, RegionSide.PLUS))


@pytest.fixture(scope="session")
def elliptic_dmm(elliptic):
    return (resolve_scheme("dmm-elliptic", elliptic, RegionSide.MINUS),
            resolve_scheme("dmm-elliptic", elliptic, RegionSide.PLUS))


def midpoint_harmonic_step(omega2: float, x0, tau: float) -> np.ndarray:
    """Independent oracle for one implicit-midpoint step of the oscillator.

    The step equation is linear, (I - tau/2 A) x1 = (I + tau/2 A) x0 with
    A = [[0, 1], [-omega2, 0]], so it can be solved directly.
    """
    A = np.array([[0.0, 1.0], [-omega2, 0.0]])
    I = np.eye(2)
    return np.linalg.solve(I - 0.5 * tau * A, (I + 0.5 * tau * A) @ np.asarray(x0))
