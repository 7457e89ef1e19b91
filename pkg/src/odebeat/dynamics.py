"""Stability and transient-response analysis of second-order linear systems.

All operations work on the homogeneous model x'' + w1 x' + w0 x = 0 whose
characteristic equation is s^2 + w1 s + w0 = 0.  Step and impulse responses
use the unit-DC-gain transfer function G(s) = w0 / (s^2 + w1 s + w0), so a
stable system settles at 1 after a unit step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import basis as basis_mod
from .errors import InvalidArgumentError, OutOfDomainError, UnsupportedPoleError

# relative threshold below which the discriminant is treated as zero
_REPEATED_ROOT_RTOL = 1e-9
_ZERO_REAL_RTOL = 1e-12


@dataclass(frozen=True)
class StabilityReport:
    """Eigenvalue-based stability summary for constant coefficients.

    ``regime`` is one of underdamped, critically-damped, overdamped,
    undamped, divergent-oscillatory, divergent-monotone, marginal.
    ``natural_frequency`` (rad/s) and ``damping_ratio`` are NaN when w0 <= 0.
    """

    w1: float
    w0: float
    roots: tuple
    regime: str
    stable: bool
    natural_frequency: float
    damping_ratio: float


@dataclass(frozen=True, eq=False)
class ResponseCurve:
    """Sampled time response; ``kind`` is step, impulse or free."""

    times: np.ndarray
    values: np.ndarray
    kind: str


def characteristic_roots(w1: float, w0: float) -> tuple:
    """Roots of s^2 + w1 s + w0 = 0, ordered by (real part, imaginary part).

    Uses the cancellation-free quadratic formula for real roots.
    """
    w1 = float(w1)
    w0 = float(w0)
    disc = w1 * w1 - 4.0 * w0
    if disc >= 0.0:
        if w0 == 0.0:
            r = sorted([0.0, -w1])
            return (complex(r[0]), complex(r[1]))
        sq = math.sqrt(disc)
        q = -0.5 * (w1 + math.copysign(sq, w1)) if w1 != 0.0 else -0.5 * sq
        r = sorted([q, w0 / q])
        return (complex(r[0]), complex(r[1]))
    im = 0.5 * math.sqrt(-disc)
    re = -0.5 * w1
    return (complex(re, -im), complex(re, im))


def stability(w1: float, w0: float) -> StabilityReport:
    """Classify the system by root locations (strict-sign stability)."""
    w1 = float(w1)
    w0 = float(w0)
    roots = characteristic_roots(w1, w0)
    scale = max(1.0, abs(w1), math.sqrt(abs(w0)))
    zero_tol = _ZERO_REAL_RTOL * scale
    disc = w1 * w1 - 4.0 * w0
    disc_tol = _REPEATED_ROOT_RTOL * max(1.0, w1 * w1, abs(w0))
    reals = (roots[0].real, roots[1].real)
    zero_real = [abs(r) <= zero_tol for r in reals]

    stable = (w1 > 0.0) and (w0 > 0.0)
    if all(zero_real) and w0 > 0.0:
        regime = "undamped"
    elif any(zero_real):
        regime = "marginal"
    elif stable:
        if disc < -disc_tol:
            regime = "underdamped"
        elif disc <= disc_tol:
            regime = "critically-damped"
        else:
            regime = "overdamped"
    else:
        regime = "divergent-oscillatory" if disc < -disc_tol else "divergent-monotone"

    if w0 > 0.0:
        wn = math.sqrt(w0)
        zeta = w1 / (2.0 * wn)
    else:
        wn = math.nan
        zeta = math.nan
    return StabilityReport(w1=w1, w0=w0, roots=roots, regime=regime,
                           stable=stable, natural_frequency=wn, damping_ratio=zeta)


def _check_times(times, require_nonnegative=True) -> np.ndarray:
    t = np.asarray(times, dtype=float).reshape(-1)
    if t.size and np.any(np.diff(t) < 0):
        raise InvalidArgumentError("times must be ascending")
    if require_nonnegative and t.size and t[0] < 0:
        raise InvalidArgumentError("times must be >= 0")
    return t


def _branch(w1: float, w0: float) -> str:
    disc = w1 * w1 - 4.0 * w0
    if abs(disc) < _REPEATED_ROOT_RTOL * max(1.0, w1 * w1, abs(w0)):
        return "repeated"
    return "complex" if disc < 0 else "real"


def step_response(w1: float, w0: float, times) -> ResponseCurve:
    """Closed-form unit-step response of G(s) = w0/(s^2 + w1 s + w0)."""
    w1 = float(w1)
    w0 = float(w0)
    if w0 == 0.0:
        raise UnsupportedPoleError(
            "w0 = 0 places a pole at s = 0; the step response is unbounded")
    t = _check_times(times)
    branch = _branch(w1, w0)
    if branch == "complex":
        alpha = -0.5 * w1
        om = 0.5 * math.sqrt(4.0 * w0 - w1 * w1)
        y = 1.0 - np.exp(alpha * t) * (np.cos(om * t) - (alpha / om) * np.sin(om * t))
    elif branch == "repeated":
        r = -0.5 * w1
        y = 1.0 - (1.0 - r * t) * np.exp(r * t)
    else:
        r1, r2 = (z.real for z in characteristic_roots(w1, w0))
        y = 1.0 + (r2 * np.exp(r1 * t) - r1 * np.exp(r2 * t)) / (r1 - r2)
    return ResponseCurve(times=t, values=y, kind="step")


def impulse_response(w1: float, w0: float, times) -> ResponseCurve:
    """Closed-form unit-impulse response of G(s) = w0/(s^2 + w1 s + w0)."""
    w1 = float(w1)
    w0 = float(w0)
    t = _check_times(times)
    if w0 == 0.0:
        # G(s) vanishes identically
        return ResponseCurve(times=t, values=np.zeros_like(t), kind="impulse")
    branch = _branch(w1, w0)
    if branch == "complex":
        alpha = -0.5 * w1
        om = 0.5 * math.sqrt(4.0 * w0 - w1 * w1)
        y = (w0 / om) * np.exp(alpha * t) * np.sin(om * t)
    elif branch == "repeated":
        r = -0.5 * w1
        y = w0 * t * np.exp(r * t)
    else:
        r1, r2 = (z.real for z in characteristic_roots(w1, w0))
        y = w0 * (np.exp(r1 * t) - np.exp(r2 * t)) / (r1 - r2)
    return ResponseCurve(times=t, values=y, kind="impulse")


def free_response(w1: float, w0: float, x0: float, v0: float, times) -> ResponseCurve:
    """Closed-form solution of x'' + w1 x' + w0 x = 0 with x(0)=x0, x'(0)=v0."""
    w1 = float(w1)
    w0 = float(w0)
    x0 = float(x0)
    v0 = float(v0)
    t = _check_times(times, require_nonnegative=False)
    branch = _branch(w1, w0)
    if branch == "complex":
        alpha = -0.5 * w1
        om = 0.5 * math.sqrt(4.0 * w0 - w1 * w1)
        y = np.exp(alpha * t) * (x0 * np.cos(om * t)
                                 + ((v0 - alpha * x0) / om) * np.sin(om * t))
    elif branch == "repeated":
        r = -0.5 * w1
        y = (x0 + (v0 - r * x0) * t) * np.exp(r * t)
    else:
        r1, r2 = (z.real for z in characteristic_roots(w1, w0))
        y = ((v0 - r2 * x0) * np.exp(r1 * t)
             - (v0 - r1 * x0) * np.exp(r2 * t)) / (r1 - r2)
    return ResponseCurve(times=t, values=y, kind="free")


def solve_trajectory(model, x0: float, v0: float, times, substeps: int = 4) -> ResponseCurve:
    """Solve the fitted model from (x0, v0) at the requested times.

    Constant mode uses the closed form.  Time-varying mode integrates with
    classical RK4 using at least ``substeps`` steps per output interval, so
    the step size is at most 1/(substeps * sample rate) for a uniform grid;
    the coefficient curves are evaluated through the model basis and must
    stay inside its domain.
    """
    t = np.asarray(times, dtype=float).reshape(-1)
    if t.size and np.any(np.diff(t) <= 0):
        raise InvalidArgumentError("times must be strictly ascending")
    if model.mode == "constant":
        return ResponseCurve(times=t,
                             values=free_response(model.w1, model.w0, x0, v0, t).values,
                             kind="free")

    bas = model.basis
    if t.size and (t[0] < bas.t_min or t[-1] > bas.t_max):
        raise OutOfDomainError("trajectory times must lie inside the basis domain")
    if t.size == 0:
        return ResponseCurve(times=t, values=np.zeros(0), kind="free")
    if substeps < 1:
        raise InvalidArgumentError("substeps must be >= 1")

    # half-step grid so RK4 midpoints share precomputed coefficient values
    fine = [np.array([t[0]])]
    for a, b in zip(t[:-1], t[1:]):
        fine.append(np.linspace(a, b, 2 * substeps + 1)[1:])
    fine = np.concatenate(fine)
    phi = basis_mod._eval_many(bas, fine, 0)
    w1v = phi @ model.h1
    w0v = phi @ model.h0

    x = float(x0)
    v = float(v0)
    out = np.empty_like(t)
    out[0] = x
    idx = 0
    for i in range(t.size - 1):
        h = (t[i + 1] - t[i]) / substeps
        for _ in range(substeps):
            a1, a2, a3 = w1v[idx], w1v[idx + 1], w1v[idx + 2]
            b1, b2, b3 = w0v[idx], w0v[idx + 1], w0v[idx + 2]
            k1x = v
            k1v = -a1 * v - b1 * x
            k2x = v + 0.5 * h * k1v
            k2v = -a2 * (v + 0.5 * h * k1v) - b2 * (x + 0.5 * h * k1x)
            k3x = v + 0.5 * h * k2v
            k3v = -a2 * (v + 0.5 * h * k2v) - b2 * (x + 0.5 * h * k2x)
            k4x = v + h * k3v
            k4v = -a3 * (v + h * k3v) - b3 * (x + h * k3x)
            x = x + (h / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
            v = v + (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
            idx += 2
        out[i + 1] = x
    return ResponseCurve(times=t, values=out, kind="free")
