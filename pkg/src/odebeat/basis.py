"""Clamped cubic B-spline bases, their derivatives, and per-span Gauss quadrature.

The basis spans a closed interval with uniform interior knots (the last span
may be shorter when the spacing does not divide the interval evenly).  Both
endpoints are clamped, so the first/last basis functions interpolate the
endpoint values.  Evaluation uses the Cox-de Boor recursion; derivatives use
the standard knot-difference formula.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import InvalidArgumentError, OutOfDomainError

DEGREE = 3
DEFAULT_POINTS_PER_SPAN = 8


@dataclass(frozen=True, eq=False)
class BasisSystem:
    """Cubic B-spline basis on [t_min, t_max] with clamped knots.

    Attributes
    ----------
    t_min, t_max : float
        Closed fitting interval, in seconds.
    interior_spacing : float
        Requested uniform spacing between interior knots, in seconds.
    knots : ndarray
        Full nondecreasing knot sequence; both endpoints repeated degree+1 times.
    K : int
        Number of basis functions (= number of spans + degree).
    """

    t_min: float
    t_max: float
    interior_spacing: float
    knots: np.ndarray
    K: int
    degree: int = DEGREE

    @property
    def breakpoints(self) -> np.ndarray:
        """Distinct span boundaries, endpoints included."""
        return self.knots[self.degree:len(self.knots) - self.degree]

    @property
    def n_spans(self) -> int:
        return len(self.breakpoints) - 1


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Gauss-Legendre nodes/weights accumulated over every knot span."""

    nodes: np.ndarray
    weights: np.ndarray
    points_per_span: int


def make_basis(domain, interior_spacing: float) -> BasisSystem:
    """Build a clamped cubic basis on ``domain`` with uniform interior knots.

    Parameters
    ----------
    domain : (float, float)
        Closed interval [t_min, t_max], t_max > t_min.
    interior_spacing : float
        Knot spacing in seconds; the final span is shortened when the spacing
        does not divide the domain length evenly.
    """
    t_min, t_max = float(domain[0]), float(domain[1])
    length = t_max - t_min
    if not np.isfinite(length) or length <= 0:
        raise InvalidArgumentError(f"domain must have positive length, got {domain!r}")
    spacing = float(interior_spacing)
    if not np.isfinite(spacing) or spacing <= 0 or spacing > length:
        raise InvalidArgumentError(
            f"interior_spacing must lie in (0, domain length], got {spacing!r}")

    n_cuts = int(np.floor(length / spacing))
    cuts = t_min + spacing * np.arange(1, n_cuts + 1)
    # drop a cut that lands (numerically) on the right endpoint
    cuts = cuts[cuts < t_max - 1e-9 * length]
    knots = np.concatenate([
        np.full(DEGREE + 1, t_min), cuts, np.full(DEGREE + 1, t_max)])
    K = len(knots) - DEGREE - 1
    return BasisSystem(t_min=t_min, t_max=t_max, interior_spacing=spacing,
                       knots=knots, K=K)


def _eval_many(basis: BasisSystem, times: np.ndarray, deriv: int) -> np.ndarray:
    """Cox-de Boor evaluation of all K functions at the given times.

    Returns an array of shape (len(times), K) holding the ``deriv``-th
    derivative values.  Times are assumed to be inside the domain.
    """
    knots = basis.knots
    g = basis.degree
    m = len(knots) - 1
    t = np.asarray(times, dtype=float).reshape(-1)
    if t.size == 0:
        return np.zeros((0, basis.K))

    # degree-0 indicators; the final positive-length span is right-closed
    N = ((t[:, None] >= knots[:-1]) & (t[:, None] < knots[1:])).astype(float)
    last_span = np.flatnonzero(knots[1:] > knots[:-1])[-1]
    at_end = t == knots[-1]
    if at_end.any():
        N[at_end] = 0.0
        N[at_end, last_span] = 1.0

    def _safe_inv(d):
        return np.where(d > 0, 1.0 / np.where(d > 0, d, 1.0), 0.0)

    # raise the degree for values, then apply the derivative recurrence
    for k in range(1, g - deriv + 1):
        cnt = m - k
        li = _safe_inv(knots[k:k + cnt] - knots[:cnt])
        ri = _safe_inv(knots[k + 1:k + 1 + cnt] - knots[1:1 + cnt])
        a = (t[:, None] - knots[:cnt]) * li
        b = (knots[k + 1:k + 1 + cnt] - t[:, None]) * ri
        N = a * N[:, :cnt] + b * N[:, 1:cnt + 1]
    for k in range(g - deriv + 1, g + 1):
        cnt = m - k
        li = _safe_inv(knots[k:k + cnt] - knots[:cnt])
        ri = _safe_inv(knots[k + 1:k + 1 + cnt] - knots[1:1 + cnt])
        N = k * (N[:, :cnt] * li - N[:, 1:cnt + 1] * ri)
    return N


def eval_basis(basis: BasisSystem, t: float, deriv: int = 0) -> np.ndarray:
    """Values (or derivatives) of all K basis functions at one time point.

    Raises
    ------
    OutOfDomainError
        If ``t`` lies outside [t_min, t_max]; no extrapolation is performed.
    """
    if deriv not in (0, 1, 2):
        raise InvalidArgumentError(f"deriv must be 0, 1 or 2, got {deriv!r}")
    t = float(t)
    if t < basis.t_min or t > basis.t_max:
        raise OutOfDomainError(
            f"t={t!r} outside basis domain [{basis.t_min}, {basis.t_max}]")
    return _eval_many(basis, np.array([t]), deriv)[0]


def design_matrix(basis: BasisSystem, times, deriv: int = 0) -> np.ndarray:
    """Stack eval_basis rows for a sequence of times; shape (len(times), K)."""
    if deriv not in (0, 1, 2):
        raise InvalidArgumentError(f"deriv must be 0, 1 or 2, got {deriv!r}")
    t = np.asarray(times, dtype=float).reshape(-1)
    bad = np.flatnonzero((t < basis.t_min) | (t > basis.t_max))
    if bad.size:
        i = int(bad[0])
        raise OutOfDomainError(
            f"times[{i}]={t[i]!r} outside basis domain "
            f"[{basis.t_min}, {basis.t_max}]")
    return _eval_many(basis, t, deriv)


def make_quadrature(basis: BasisSystem,
                    points_per_span: int = DEFAULT_POINTS_PER_SPAN) -> QuadratureRule:
    """Per-span Gauss-Legendre rule, exact for degree <= 2*points_per_span - 1."""
    p = int(points_per_span)
    if p < 1:
        raise InvalidArgumentError(f"points_per_span must be >= 1, got {points_per_span!r}")
    x, w = leggauss(p)
    lo = basis.breakpoints[:-1]
    hi = basis.breakpoints[1:]
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return QuadratureRule(nodes=nodes, weights=weights, points_per_span=p)
