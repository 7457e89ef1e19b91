"""Feature assembly for beat classification.

Three feature families are supported: raw constant-mode ODE parameters plus
morphology, functional-PCA scores of the time-varying coefficient curves plus
morphology, and Fourier harmonic coefficients of the beat itself (the
16-input baseline).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import design_matrix
from .errors import InvalidArgumentError

DEFAULT_FPCA_COMPONENTS = 4
DEFAULT_FPCA_GRID_SIZE = 101
DEFAULT_FOURIER_COEFFS = 16


@dataclass(eq=False)
class FeatureVector:
    names: list
    values: np.ndarray
    label: str | None = None


@dataclass(eq=False)
class FpcaModel:
    """Mean curve and orthonormal components under the trapezoid inner product."""

    grid: np.ndarray
    mean_curve: np.ndarray
    components: np.ndarray        # (m, len(grid))
    explained_variance: np.ndarray
    m: int


@dataclass(eq=False)
class StandardizationTransform:
    """Per-feature location/scale fitted on a training set (zero-variance
    features keep scale 1)."""

    means: np.ndarray
    scales: np.ndarray


def _trapezoid_weights(grid: np.ndarray) -> np.ndarray:
    w = np.zeros(grid.size)
    d = np.diff(grid)
    w[:-1] += 0.5 * d
    w[1:] += 0.5 * d
    return w


def constant_features(model, morph) -> FeatureVector:
    """[w1, w0, r_height, qrs_width] for a constant-mode model."""
    if model.mode != "constant":
        raise InvalidArgumentError(
            f"constant_features requires a constant-mode model, got {model.mode!r}")
    values = np.array([model.w1, model.w0, morph.r_height, morph.qrs_width])
    return FeatureVector(names=["w1", "w0", "r_height", "qrs_width"], values=values)


def fpca_fit(curves, m: int) -> FpcaModel:
    """Functional PCA of curves sampled on a shared uniform-ish grid.

    Components are orthonormal under the trapezoid inner product and sorted
    by descending explained variance; each component's sign is fixed so its
    largest-magnitude entry is positive.
    """
    curves = np.atleast_2d(np.asarray(curves, dtype=float))
    n, g = curves.shape
    if n < 2:
        raise InvalidArgumentError(f"need at least 2 curves, got {n}")
    if not 1 <= m <= min(n - 1, g):
        raise InvalidArgumentError(
            f"m must lie in [1, min(n-1, grid size)] = [1, {min(n - 1, g)}], got {m}")
    grid = np.linspace(0.0, 1.0, g) if g > 1 else np.zeros(1)
    return _fpca_fit_on_grid(curves, grid, m)


def fpca_fit_grid(curves, grid, m: int) -> FpcaModel:
    """fpca_fit with an explicit time grid for the inner product."""
    curves = np.atleast_2d(np.asarray(curves, dtype=float))
    grid = np.asarray(grid, dtype=float).reshape(-1)
    if curves.shape[1] != grid.size:
        raise InvalidArgumentError("curves and grid lengths differ")
    n = curves.shape[0]
    if n < 2:
        raise InvalidArgumentError(f"need at least 2 curves, got {n}")
    if not 1 <= m <= min(n - 1, grid.size):
        raise InvalidArgumentError(
            f"m must lie in [1, {min(n - 1, grid.size)}], got {m}")
    return _fpca_fit_on_grid(curves, grid, m)


def _fpca_fit_on_grid(curves: np.ndarray, grid: np.ndarray, m: int) -> FpcaModel:
    n = curves.shape[0]
    w = _trapezoid_weights(grid)
    sqrt_w = np.sqrt(w)
    mean = curves.mean(axis=0)
    centered = curves - mean
    _, s, vt = np.linalg.svd(centered * sqrt_w, full_matrices=False)
    comp = vt[:m] / np.where(sqrt_w > 0, sqrt_w, 1.0)
    # deterministic sign: largest-|entry| coordinate positive
    for j in range(comp.shape[0]):
        k = int(np.argmax(np.abs(comp[j])))
        if comp[j, k] < 0:
            comp[j] = -comp[j]
    var = (s[:m] ** 2) / (n - 1)
    return FpcaModel(grid=grid, mean_curve=mean, components=comp,
                     explained_variance=var, m=m)


def fpca_scores(fpca: FpcaModel, curve) -> np.ndarray:
    """Inner products of the centered curve with each component."""
    curve = np.asarray(curve, dtype=float).reshape(-1)
    if curve.size != fpca.grid.size:
        raise InvalidArgumentError(
            f"curve length {curve.size} does not match grid {fpca.grid.size}")
    w = _trapezoid_weights(fpca.grid)
    return ((curve - fpca.mean_curve) * w) @ fpca.components.T


def fpca_reconstruct(fpca: FpcaModel, scores) -> np.ndarray:
    return fpca.mean_curve + np.asarray(scores, float) @ fpca.components


def coefficient_curve_grid(basis, size: int = DEFAULT_FPCA_GRID_SIZE) -> np.ndarray:
    """Uniform evaluation grid over the basis domain for FPCA."""
    return np.linspace(basis.t_min, basis.t_max, size)


def varying_features(model, fpca_w1: FpcaModel, fpca_w0: FpcaModel,
                     morph) -> FeatureVector:
    """[w1 scores, w0 scores, r_height, qrs_width] for a time-varying model."""
    if model.mode != "time-varying":
        raise InvalidArgumentError(
            f"varying_features requires a time-varying model, got {model.mode!r}")
    for f in (fpca_w1, fpca_w0):
        if f.grid[0] < model.basis.t_min - 1e-12 or f.grid[-1] > model.basis.t_max + 1e-12:
            raise InvalidArgumentError("FPCA grid extends beyond the basis domain")
    phi1 = design_matrix(model.basis, fpca_w1.grid, 0)
    phi0 = design_matrix(model.basis, fpca_w0.grid, 0)
    s1 = fpca_scores(fpca_w1, phi1 @ model.h1)
    s0 = fpca_scores(fpca_w0, phi0 @ model.h0)
    names = ([f"w1_pc{j + 1}" for j in range(fpca_w1.m)]
             + [f"w0_pc{j + 1}" for j in range(fpca_w0.m)]
             + ["r_height", "qrs_width"])
    values = np.concatenate([s1, s0, [morph.r_height, morph.qrs_width]])
    return FeatureVector(names=names, values=values)


def fourier_features(beat, n_coeffs: int = DEFAULT_FOURIER_COEFFS) -> FeatureVector:
    """Cosine/sine coefficients of harmonics 1..n_coeffs/2 over the window.

    The window length defines the fundamental; the DC term is omitted
    (baseline is filtered out upstream).  Coefficients are interleaved
    [a1, b1, a2, b2, ...].
    """
    if n_coeffs % 2 != 0 or n_coeffs < 2:
        raise InvalidArgumentError(f"n_coeffs must be even and >= 2, got {n_coeffs!r}")
    v = np.asarray(beat.values, dtype=float)
    n = v.size
    if n < n_coeffs:
        raise InvalidArgumentError(
            f"beat has {n} samples, need at least {n_coeffs}")
    ks = np.arange(1, n_coeffs // 2 + 1)
    ang = 2.0 * np.pi * ks[:, None] * np.arange(n)[None, :] / n
    a = (2.0 / n) * (np.cos(ang) @ v)
    b = (2.0 / n) * (np.sin(ang) @ v)
    values = np.empty(n_coeffs)
    values[0::2] = a
    values[1::2] = b
    names = []
    for k in ks:
        names += [f"a{k}", f"b{k}"]
    return FeatureVector(names=names, values=values, label=beat.label)


def feature_matrix(fvs) -> tuple[np.ndarray, list]:
    """Stack feature vectors into (X, labels); names must agree."""
    fvs = list(fvs)
    if not fvs:
        raise InvalidArgumentError("empty feature set")
    names = fvs[0].names
    for fv in fvs[1:]:
        if fv.names != names:
            raise InvalidArgumentError("feature vectors have mismatched names")
    X = np.vstack([fv.values for fv in fvs])
    return X, [fv.label for fv in fvs]


def standardize_fit(train) -> StandardizationTransform:
    """Zero-mean unit-variance transform fitted on the training set."""
    X, _ = feature_matrix(train)
    means = X.mean(axis=0)
    scales = X.std(axis=0)
    scales = np.where(scales > 0, scales, 1.0)
    return StandardizationTransform(means=means, scales=scales)


def standardize_apply(tf: StandardizationTransform, fv: FeatureVector) -> FeatureVector:
    values = np.asarray(fv.values, float)
    if values.size != tf.means.size:
        raise InvalidArgumentError(
            f"feature length {values.size} does not match transform {tf.means.size}")
    return FeatureVector(names=list(fv.names),
                         values=(values - tf.means) / tf.scales,
                         label=fv.label)
