import logging

import numpy as np
import pytest

from odebeat import make_basis, make_quadrature

# fit loops log expected non-convergence warnings; keep test output readable
logging.getLogger("odebeat").setLevel(logging.ERROR)


@pytest.fixture(scope="session")
def beat_basis():
    """The standard beat-window basis: [0, 0.2] s with 0.012 s knots."""
    return make_basis((0.0, 0.2), 0.012)


@pytest.fixture(scope="session")
def beat_quad(beat_basis):
    return make_quadrature(beat_basis)


@pytest.fixture()
def rng():
    return np.random.Generator(np.random.Philox(20240817))


def rk4_oracle(w1_fun, w0_fun, x0, v0, times, forcing=None, substeps=64):
    """Reference integrator for x'' + w1(t) x' + w0(t) x = forcing(t).

    Deliberately independent of the library's solvers; used to freeze
    expected values.
    """
    times = np.asarray(times, dtype=float)
    f = forcing if forcing is not None else (lambda t: 0.0)

    def deriv(t, x, v):
        return v, -w1_fun(t) * v - w0_fun(t) * x + f(t)

    x, v = float(x0), float(v0)
    out = np.empty_like(times)
    out[0] = x
    for i in range(times.size - 1):
        h = (times[i + 1] - times[i]) / substeps
        t = times[i]
        for _ in range(substeps):
            k1x, k1v = deriv(t, x, v)
            k2x, k2v = deriv(t + h / 2, x + h / 2 * k1x, v + h / 2 * k1v)
            k3x, k3v = deriv(t + h / 2, x + h / 2 * k2x, v + h / 2 * k2v)
            k4x, k4v = deriv(t + h, x + h * k3x, v + h * k3v)
            x += h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
            v += h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
            t += h
        out[i + 1] = x
    return out
