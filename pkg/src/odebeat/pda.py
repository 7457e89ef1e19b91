"""Iterated principal differential analysis for second-order linear models.

Given curves sampled on a shared grid, the fit alternates two exact solves
until the ODE parameters stabilize:

* a per-curve ridge solve for the spline coefficients C, with penalty
  lambda * C' J C where J = integral of psi psi' and
  psi(t) = phi''(t) + w1(t) phi'(t) + w0(t) phi(t);
* a least-squares solve for the parameters minimizing the operator residual
  integral of (x'' + w1 x' + w0 x)^2 over the fitted curves.

``mode="constant"`` estimates scalars (w1, w0); ``mode="time-varying"``
expands both coefficient curves in the same basis as the data.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .basis import BasisSystem, QuadratureRule, design_matrix, make_quadrature
from .errors import DegenerateDataError, InvalidArgumentError, RankDeficiencyError

log = logging.getLogger(__name__)

MODES = ("constant", "time-varying")
DEFAULT_LAMBDA_GRID = np.logspace(-8, 2, 21)
DEFAULT_MAX_ITER = 50
DEFAULT_TOL = 1e-6

# Gram regularization for the time-varying parameter solve
_GRAM_COND_LIMIT = 1e12
_GRAM_RIDGE = 1e-10


@dataclass(frozen=True, eq=False)
class PenaltyMatrix:
    """Symmetric PSD matrix J = integral of psi(t) psi(t)' dt."""

    J: np.ndarray


@dataclass(eq=False)
class CoefficientSet:
    """Spline coefficients, one row per curve, plus the data-fit SSE."""

    C: np.ndarray
    residual_sse: float


@dataclass(eq=False)
class OdeModel:
    """Fitted second-order model and its fit diagnostics.

    Exactly one of (w1, w0) / (h1, h0) is populated according to ``mode``;
    ``sse_p`` is the integrated squared operator residual at the solution.
    """

    mode: str
    basis: BasisSystem
    lam: float
    iterations: int
    converged: bool
    sse_p: float
    w1: float | None = None
    w0: float | None = None
    h1: np.ndarray | None = None
    h0: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    def coefficient_curves(self, times) -> tuple[np.ndarray, np.ndarray]:
        """Evaluate (w1(t), w0(t)) on a time grid, for either mode."""
        t = np.asarray(times, dtype=float).reshape(-1)
        if self.mode == "constant":
            return (np.full_like(t, self.w1), np.full_like(t, self.w0))
        phi = design_matrix(self.basis, t, 0)
        return (phi @ self.h1, phi @ self.h0)


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise InvalidArgumentError(f"mode must be one of {MODES}, got {mode!r}")


def _coef_vector(mode: str, params) -> np.ndarray:
    if mode == "constant":
        w1, w0 = params
        return np.array([float(w1), float(w0)])
    h1, h0 = params
    return np.concatenate([np.asarray(h1, float), np.asarray(h0, float)])


def _node_coefficients(mode: str, params, phi0: np.ndarray):
    """Values of w1(t), w0(t) at quadrature nodes."""
    if mode == "constant":
        w1, w0 = params
        n = phi0.shape[0]
        return np.full(n, float(w1)), np.full(n, float(w0))
    h1, h0 = params
    h1 = np.asarray(h1, float)
    h0 = np.asarray(h0, float)
    if h1.shape != (phi0.shape[1],) or h0.shape != (phi0.shape[1],):
        raise InvalidArgumentError(
            f"parameter curves must have length K={phi0.shape[1]}, "
            f"got {h1.shape} and {h0.shape}")
    return phi0 @ h1, phi0 @ h0


def _quad_design(basis: BasisSystem, quad: QuadratureRule):
    return tuple(design_matrix(basis, quad.nodes, d) for d in (0, 1, 2))


def _penalty_from_design(phis, weights, mode, params) -> np.ndarray:
    phi0, phi1, phi2 = phis
    w1n, w0n = _node_coefficients(mode, params, phi0)
    psi = phi2 + w1n[:, None] * phi1 + w0n[:, None] * phi0
    J = psi.T @ (psi * weights[:, None])
    return 0.5 * (J + J.T)


def penalty_matrix(basis: BasisSystem, quad: QuadratureRule, mode: str,
                   params) -> PenaltyMatrix:
    """Penalty J for the linear operator defined by ``params``.

    With all-zero parameters this reduces to the classic curvature penalty
    integral of phi'' phi''.
    """
    _check_mode(mode)
    J = _penalty_from_design(_quad_design(basis, quad), quad.weights, mode, params)
    return PenaltyMatrix(J=J)


def _ridge_solve(phi: np.ndarray, J: np.ndarray, lam: float, Y: np.ndarray):
    A = phi.T @ phi
    if lam > 0:
        A = A + lam * J
    try:
        factor = cho_factor(A)
    except LinAlgError as exc:
        if lam == 0 and phi.shape[0] < phi.shape[1]:
            raise RankDeficiencyError(
                f"normal matrix is singular with {phi.shape[0]} samples and "
                f"{phi.shape[1]} basis functions at lambda=0; use lambda > 0"
            ) from exc
        raise RankDeficiencyError(
            "normal matrix is singular; use a larger lambda") from exc
    C = cho_solve(factor, phi.T @ Y.T).T
    return C, factor


def estimate_coefficients(Y, times, basis: BasisSystem, quad: QuadratureRule,
                          mode: str, params, lam: float) -> CoefficientSet:
    """Per-curve ridge solve C_i = (Phi'Phi + lambda J)^-1 Phi' Y_i.

    ``Y`` is an (n_curves, n_samples) matrix sharing the time grid ``times``.
    The penalized normal matrix is factored once and reused for every curve.
    """
    _check_mode(mode)
    if lam < 0:
        raise InvalidArgumentError(f"lambda must be >= 0, got {lam!r}")
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if Y.shape[0] < 1:
        raise InvalidArgumentError("need at least one curve")
    phi = design_matrix(basis, times, 0)
    if Y.shape[1] != phi.shape[0]:
        raise InvalidArgumentError(
            f"curves have {Y.shape[1]} samples but {phi.shape[0]} times given")
    J = (_penalty_from_design(_quad_design(basis, quad), quad.weights, mode, params)
         if lam > 0 else np.zeros((basis.K, basis.K)))
    C, _ = _ridge_solve(phi, J, lam, Y)
    resid = Y - C @ phi.T
    return CoefficientSet(C=C, residual_sse=float(np.sum(resid * resid)))


def estimate_parameters(coeffs: CoefficientSet, basis: BasisSystem,
                        quad: QuadratureRule, mode: str):
    """Least-squares ODE parameters for fixed spline coefficients.

    Solves M h = -v with M = integral of G' C'C G and
    v = integral of G' C'C phi'', where G(t) stacks [phi'(t), phi(t)]
    (constant mode) or [phi' phi', phi phi'] outer-product blocks
    (time-varying mode).  Returns (w1, w0) or (h1, h0).
    """
    _check_mode(mode)
    C = np.atleast_2d(np.asarray(coeffs.C, dtype=float))
    if not np.all(np.isfinite(C)):
        raise InvalidArgumentError("coefficient matrix contains non-finite entries")
    phi0, phi1, phi2 = _quad_design(basis, quad)
    w = quad.weights
    X0 = C @ phi0.T  # fitted curve values at nodes, (n, Q)
    X1 = C @ phi1.T
    X2 = C @ phi2.T

    if mode == "constant":
        s11 = float(np.sum(w * np.sum(X1 * X1, axis=0)))
        s10 = float(np.sum(w * np.sum(X1 * X0, axis=0)))
        s00 = float(np.sum(w * np.sum(X0 * X0, axis=0)))
        v1 = float(np.sum(w * np.sum(X1 * X2, axis=0)))
        v0 = float(np.sum(w * np.sum(X0 * X2, axis=0)))
        M = np.array([[s11, s10], [s10, s00]])
        v = np.array([v1, v0])
        try:
            factor = cho_factor(M)
        except LinAlgError as exc:
            raise DegenerateDataError(
                "Gram system of the fitted curves is singular") from exc
        h = -cho_solve(factor, v)
        return float(h[0]), float(h[1])

    a11 = w * np.sum(X1 * X1, axis=0)
    a10 = w * np.sum(X1 * X0, axis=0)
    a00 = w * np.sum(X0 * X0, axis=0)
    b1 = w * np.sum(X1 * X2, axis=0)
    b0 = w * np.sum(X0 * X2, axis=0)
    K = basis.K
    M = np.empty((2 * K, 2 * K))
    M[:K, :K] = phi0.T @ (phi0 * a11[:, None])
    M[:K, K:] = phi0.T @ (phi0 * a10[:, None])
    M[K:, :K] = M[:K, K:].T
    M[K:, K:] = phi0.T @ (phi0 * a00[:, None])
    M = 0.5 * (M + M.T)
    v = np.concatenate([phi0.T @ b1, phi0.T @ b0])
    trace = float(np.trace(M))
    if trace <= 0 or not np.isfinite(trace):
        raise DegenerateDataError("Gram system of the fitted curves is singular")
    if np.linalg.cond(M) > _GRAM_COND_LIMIT:
        M = M + (_GRAM_RIDGE * trace) * np.eye(2 * K)
    try:
        h = -np.linalg.solve(M, v)
    except np.linalg.LinAlgError as exc:
        raise DegenerateDataError(
            "Gram system of the fitted curves is singular") from exc
    return h[:K].copy(), h[K:].copy()


def _zero_params(mode: str, K: int):
    if mode == "constant":
        return (0.0, 0.0)
    return (np.zeros(K), np.zeros(K))


def _operator_sse(C: np.ndarray, phis, weights, mode, params) -> float:
    phi0, phi1, phi2 = phis
    w1n, w0n = _node_coefficients(mode, params, phi0)
    resid = C @ phi2.T + w1n * (C @ phi1.T) + w0n * (C @ phi0.T)
    return float(np.sum(weights * np.sum(resid * resid, axis=0)))


def select_lambda(records, basis: BasisSystem, mode: str, params,
                  grid=None, points_per_span: int | None = None):
    """Pick the penalty weight by generalized cross-validation.

    For each candidate the score is n_obs * SSE / (n_obs - trace(Hat))^2
    per record, averaged over records; the grid member with the smallest
    average wins (ties go to the smaller lambda).

    Returns
    -------
    (lam, scores) : (float, ndarray)
    """
    _check_mode(mode)
    grid = DEFAULT_LAMBDA_GRID if grid is None else np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise InvalidArgumentError("lambda grid must be nonempty")
    if np.any(grid <= 0):
        raise InvalidArgumentError("lambda grid members must be positive")
    records = list(records)
    if not records:
        raise InvalidArgumentError("need at least one record")
    times = records[0].times
    Y = np.vstack([np.asarray(r.values, float) for r in records])
    quad = (make_quadrature(basis) if points_per_span is None
            else make_quadrature(basis, points_per_span))
    phi = design_matrix(basis, times, 0)
    J = _penalty_from_design(_quad_design(basis, quad), quad.weights, mode, params)
    gram = phi.T @ phi
    n_obs = phi.shape[0]

    scores = np.empty(grid.size)
    for g, lam in enumerate(grid):
        try:
            factor = cho_factor(gram + lam * J)
        except LinAlgError:
            scores[g] = np.inf
            continue
        tr = float(np.trace(cho_solve(factor, gram)))
        if n_obs - tr <= 0:
            scores[g] = np.inf
            continue
        C = cho_solve(factor, phi.T @ Y.T).T
        sse = np.sum((Y - C @ phi.T) ** 2, axis=1)
        scores[g] = float(np.mean(n_obs * sse) / (n_obs - tr) ** 2)
    best = int(np.argmin(scores))
    return float(grid[best]), scores


def fit(records, basis: BasisSystem, *, mode: str = "constant",
        lam="auto", lambda_grid=None, max_iter: int = DEFAULT_MAX_ITER,
        tol: float = DEFAULT_TOL, points_per_span: int | None = None,
        _ws=None) -> tuple[OdeModel, CoefficientSet]:
    """Alternate coefficient and parameter estimation until convergence.

    Starts from all-zero parameters (so the first smooth is a plain
    curvature-penalized fit), refreshes the penalty each iteration, and stops
    when the relative sup-norm change of the parameter vector drops below
    ``tol`` or after ``max_iter`` iterations (non-convergence is flagged,
    not raised).  ``lam="auto"`` selects the penalty by GCV once, at the
    first iteration, then holds it fixed.
    """
    _check_mode(mode)
    if max_iter < 1:
        raise InvalidArgumentError(f"max_iter must be >= 1, got {max_iter!r}")
    records = list(records)
    if not records:
        raise InvalidArgumentError("need at least one record")
    times = np.asarray(records[0].times, dtype=float)
    for r in records[1:]:
        if len(r.times) != len(times) or not np.allclose(r.times, times,
                                                         rtol=0, atol=1e-12):
            raise InvalidArgumentError("all records must share one time grid")

    if _ws is None:
        quad = (make_quadrature(basis) if points_per_span is None
                else make_quadrature(basis, points_per_span))
        phis = _quad_design(basis, quad)
        phi = design_matrix(basis, times, 0)
    else:
        quad, phis, phi = _ws
    weights = quad.weights
    Y = np.vstack([np.asarray(r.values, float) for r in records])

    params = _zero_params(mode, basis.K)
    gcv_info = None
    if lam == "auto":
        lam_value, scores = select_lambda(records, basis, mode, params,
                                          grid=lambda_grid,
                                          points_per_span=points_per_span)
        grid = DEFAULT_LAMBDA_GRID if lambda_grid is None else np.asarray(lambda_grid)
        gcv_info = {"grid": [float(g) for g in grid],
                    "scores": [float(s) for s in scores],
                    "selected": lam_value}
    else:
        lam_value = float(lam)
        if lam_value < 0:
            raise InvalidArgumentError(f"lambda must be >= 0, got {lam!r}")

    gram = phi.T @ phi
    history = {"objective": [], "data_sse": [], "sse_p": [], "param_delta": []}
    converged = False
    iterations = 0
    coeffs = None
    for iterations in range(1, max_iter + 1):
        J = _penalty_from_design(phis, weights, mode, params)
        C, factor = _ridge_solve(phi, J, lam_value, Y)
        resid = Y - C @ phi.T
        data_sse = float(np.sum(resid * resid))
        coeffs = CoefficientSet(C=C, residual_sse=data_sse)
        objective = data_sse + lam_value * float(np.sum((C @ J) * C))
        new_params = estimate_parameters(coeffs, basis, quad, mode)
        old = _coef_vector(mode, params)
        new = _coef_vector(mode, new_params)
        delta = float(np.max(np.abs(new - old)) / (1.0 + np.max(np.abs(old))))
        params = new_params
        history["objective"].append(objective)
        history["data_sse"].append(data_sse)
        history["sse_p"].append(_operator_sse(C, phis, weights, mode, params))
        history["param_delta"].append(delta)
        if delta < tol:
            converged = True
            break

    sse_p = history["sse_p"][-1]
    tr_hat = float(np.trace(cho_solve(factor, gram)))
    dof = Y.shape[0] * (phi.shape[0] - tr_hat)
    diagnostics = dict(history)
    diagnostics["sigma2_hat"] = coeffs.residual_sse / dof if dof > 0 else float("nan")
    if gcv_info is not None:
        diagnostics["gcv"] = gcv_info
    if not converged:
        log.warning("fit did not converge in %d iterations (last delta %.3g)",
                    max_iter, history["param_delta"][-1])

    model = OdeModel(mode=mode, basis=basis, lam=lam_value, iterations=iterations,
                     converged=converged, sse_p=sse_p, diagnostics=diagnostics)
    if mode == "constant":
        model.w1, model.w0 = params
    else:
        model.h1, model.h0 = params
    return model, coeffs
