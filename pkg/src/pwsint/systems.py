"""Built-in example systems, addressable by name.

``harmonic``: oscillator with a different spring stiffness in each half
plane, switching on the line y = 0.  Each side conserves its own energy
(omega^2 x^2 + y^2) / 2.

``elliptic``: cubic system xdot = 2y, ydot = 3x^2 + a with a different
parameter inside and outside a circle centered at the origin.  Each side
conserves y^2 - x^3 - a x, whose level sets are elliptic curves.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .model import ConservedSet, PwsSystem, SwitchingSurface


def harmonic_system(omega2_minus: float = 3.0, omega2_plus: float = 1.0) -> PwsSystem:
    """Piecewise harmonic oscillator split by the line y = 0."""

    def make_field(w2):
        def f(t, x):
            return np.array([x[1], -w2 * x[0]])
        return f

    def make_conserved(w2):
        def psi(x):
            return np.array([0.5 * (w2 * x[..., 0] ** 2 + x[..., 1] ** 2)])

        def grad_psi(x):
            return np.array([[w2 * x[0], x[1]]])

        return ConservedSet(psi=psi, grad_psi=grad_psi, d_psi=1)

    surface = SwitchingSurface(
        g=lambda x: x[..., 1],
        grad_g=lambda x: np.array([0.0, 1.0]),
        hess_g=lambda x: np.zeros((2, 2)),
    )
    return PwsSystem(
        dim=2,
        f_minus=make_field(omega2_minus),
        f_plus=make_field(omega2_plus),
        surface=surface,
        conserved_minus=make_conserved(omega2_minus),
        conserved_plus=make_conserved(omega2_plus),
        name="harmonic",
        params={"omega2_minus": omega2_minus, "omega2_plus": omega2_plus},
    )


def elliptic_system(a_minus: float = -3.0, a_plus: float = -2.0,
                    radius: float = 1.0) -> PwsSystem:
    """Cubic system switching on a circle of the given radius."""

    def make_field(a):
        def f(t, x):
            return np.array([2.0 * x[1], 3.0 * x[0] ** 2 + a])
        return f

    def make_conserved(a):
        def psi(x):
            return np.array([x[..., 1] ** 2 - x[..., 0] ** 3 - a * x[..., 0]])

        def grad_psi(x):
            return np.array([[-3.0 * x[0] ** 2 - a, 2.0 * x[1]]])

        return ConservedSet(psi=psi, grad_psi=grad_psi, d_psi=1)

    r2 = radius * radius
    surface = SwitchingSurface(
        g=lambda x: x[..., 0] ** 2 + x[..., 1] ** 2 - r2,
        grad_g=lambda x: np.array([2.0 * x[0], 2.0 * x[1]]),
        hess_g=lambda x: 2.0 * np.eye(2),
    )
    return PwsSystem(
        dim=2,
        f_minus=make_field(a_minus),
        f_plus=make_field(a_plus),
        surface=surface,
        conserved_minus=make_conserved(a_minus),
        conserved_plus=make_conserved(a_plus),
        name="elliptic",
        params={"a_minus": a_minus, "a_plus": a_plus, "radius": radius},
    )


SYSTEMS = {
    "harmonic": harmonic_system,
    "elliptic": elliptic_system,
}


def make_system(name: str, **params) -> PwsSystem:
    """Instantiate a catalog system, overriding any of its parameters."""
    try:
        factory = SYSTEMS[name]
    except KeyError:
        raise ConfigError(
            f"unknown system {name!r}; available: {sorted(SYSTEMS)}") from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for system {name!r}: {exc}") from None
