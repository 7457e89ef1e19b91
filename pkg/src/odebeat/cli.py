"""Batch command-line pipeline: simulate | fit | analyze | features | train |
evaluate | pipeline.

Configuration is a flat key-value file; every key also has a command-line
flag override.  All outputs are deterministic for a fixed (inputs, config,
seed) triple.  Exit codes: 0 success, 1 internal failure, 2 input/usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__, classify, dynamics, features, io, pda, signal
from .basis import design_matrix, make_basis, make_quadrature
from .errors import InvalidArgumentError, OdebeatError
from .pda import _quad_design  # shared per-dataset fitting workspace

log = logging.getLogger(__name__)

MODE_NAMES = {"constant": "constant", "varying": "time-varying"}
PIPELINE_NAMES = {"constant": "ODE", "varying": "ODET"}


def _parse_lambda(text):
    if text == "auto":
        return "auto"
    value = float(text)
    if value < 0:
        raise ValueError("lambda must be 'auto' or a value >= 0")
    return value


def _parse_gamma(text):
    if text == "auto":
        return "auto"
    value = float(text)
    if value <= 0:
        raise ValueError("gamma must be 'auto' or a value > 0")
    return value


def _choice(*options):
    def parse(text):
        if text not in options:
            raise ValueError(f"must be one of {options}")
        return text
    return parse


def _pos(kind):
    def parse(text):
        value = kind(text)
        if value <= 0:
            raise ValueError("must be positive")
        return value
    return parse


def _nonneg(kind):
    def parse(text):
        value = kind(text)
        if value < 0:
            raise ValueError("must be >= 0")
        return value
    return parse


def _ge(kind, lo):
    def parse(text):
        value = kind(text)
        if value < lo:
            raise ValueError(f"must be >= {lo}")
        return value
    return parse


# key -> (parser, default); every key has a --flag override
CONFIG_FIELDS = {
    "knot_spacing": (_pos(float), 0.012),
    "window": (_pos(float), 0.2),
    "lambda": (_parse_lambda, "auto"),
    "mode": (_choice("constant", "varying", "both"), "constant"),
    "fpca_components": (_ge(int, 1), 4),
    "classifier": (_choice("svm", "mlp"), "svm"),
    "svm_kernel": (_choice("linear", "rbf"), "rbf"),
    "svm_c": (_pos(float), 1.0),
    "svm_gamma": (_parse_gamma, "auto"),
    "svm_tol": (_pos(float), 1e-3),
    "mlp_lr": (_pos(float), 0.5),
    "mlp_epochs": (_nonneg(int), 2000),
    "seed": (int, 0),
    "folds": (_ge(int, 2), 5),
    "sample_rate": (_pos(float), 360.0),
    "normal_count": (_nonneg(int), 200),
    "abnormal_count": (_nonneg(int), 200),
    "noise_sd": (_nonneg(float), 0.05),
    "normal_w1_min": (float, 1.5),
    "normal_w1_max": (float, 3.5),
    "normal_w0_min": (float, 8000.0),
    "normal_w0_max": (float, 11000.0),
    "abnormal_w1_min": (float, -8.0),
    "abnormal_w1_max": (float, -5.0),
    "abnormal_w0_min": (float, 3500.0),
    "abnormal_w0_max": (float, 5500.0),
    "x0": (float, 1.0),
    "v0": (float, 0.0),
    "max_iter": (_ge(int, 1), 50),
    "tol": (_pos(float), 1e-6),
    "points_per_span": (_ge(int, 1), 8),
}


@dataclass
class PipelineConfig:
    knot_spacing: float = 0.012
    window: float = 0.2
    lam: object = "auto"
    mode: str = "constant"
    fpca_components: int = 4
    classifier: str = "svm"
    svm_kernel: str = "rbf"
    svm_c: float = 1.0
    svm_gamma: object = "auto"
    svm_tol: float = 1e-3
    mlp_lr: float = 0.5
    mlp_epochs: int = 2000
    seed: int = 0
    folds: int = 5
    sample_rate: float = 360.0
    normal_count: int = 200
    abnormal_count: int = 200
    noise_sd: float = 0.05
    normal_w1_min: float = 1.5
    normal_w1_max: float = 3.5
    normal_w0_min: float = 8000.0
    normal_w0_max: float = 11000.0
    abnormal_w1_min: float = -8.0
    abnormal_w1_max: float = -5.0
    abnormal_w0_min: float = 3500.0
    abnormal_w0_max: float = 5500.0
    x0: float = 1.0
    v0: float = 0.0
    max_iter: int = 50
    tol: float = 1e-6
    points_per_span: int = 8

    def validate(self) -> None:
        if self.knot_spacing > self.window:
            raise InvalidArgumentError("knot_spacing cannot exceed window")

    def as_dict(self) -> dict:
        out = {}
        for f in fields(self):
            key = "lambda" if f.name == "lam" else f.name
            out[key] = getattr(self, f.name)
        return out

    def sha256(self) -> str:
        return hashlib.sha256(io.canonical_dumps(self.as_dict()).encode()).hexdigest()


def _key_to_attr(key: str) -> str:
    return "lam" if key == "lambda" else key


def load_config(path) -> PipelineConfig:
    """Parse a flat 'key = value' file; unknown keys are rejected."""
    cfg = PipelineConfig()
    with open(path, "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            if "=" not in body:
                raise InvalidArgumentError(f"{path}: line {ln}: expected 'key = value'")
            key, value = (s.strip() for s in body.split("=", 1))
            if key not in CONFIG_FIELDS:
                raise InvalidArgumentError(f"{path}: line {ln}: unknown key {key!r}")
            parser = CONFIG_FIELDS[key][0]
            try:
                setattr(cfg, _key_to_attr(key), parser(value))
            except ValueError as exc:
                raise InvalidArgumentError(f"{path}: line {ln}: {key}: {exc}") from exc
    cfg.validate()
    return cfg


def _config_from_args(args) -> PipelineConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else PipelineConfig()
    for key in CONFIG_FIELDS:
        value = getattr(args, f"cfg_{key}", None)
        if value is not None:
            setattr(cfg, _key_to_attr(key), value)
    cfg.validate()
    return cfg


# -- shared pipeline machinery -----------------------------------------------

def _class_specs(cfg: PipelineConfig) -> dict:
    return {
        "normal": {"w1_range": (cfg.normal_w1_min, cfg.normal_w1_max),
                   "w0_range": (cfg.normal_w0_min, cfg.normal_w0_max),
                   "count": cfg.normal_count, "noise_sd": cfg.noise_sd},
        "abnormal": {"w1_range": (cfg.abnormal_w1_min, cfg.abnormal_w1_max),
                     "w0_range": (cfg.abnormal_w0_min, cfg.abnormal_w0_max),
                     "count": cfg.abnormal_count, "noise_sd": cfg.noise_sd},
    }


def _dataset_basis(beats, cfg: PipelineConfig):
    n = len(beats[0].values)
    fs = beats[0].sample_rate
    for b in beats:
        if len(b.values) != n or b.sample_rate != fs:
            raise InvalidArgumentError(
                "all beats must share one sample rate and window length")
    return make_basis((0.0, n / fs), cfg.knot_spacing)


def _fit_modes(cfg: PipelineConfig) -> list:
    return ["constant", "varying"] if cfg.mode == "both" else [cfg.mode]


def fit_beats(beats, cfg: PipelineConfig, modes=None) -> dict:
    """Fit every beat in every requested mode; returns mode -> model list."""
    modes = modes or _fit_modes(cfg)
    out = {}
    if not beats:
        return {m: [] for m in modes}
    bas = _dataset_basis(beats, cfg)
    times = beats[0].times
    quad = make_quadrature(bas, cfg.points_per_span)
    ws = (quad, _quad_design(bas, quad), pda.design_matrix(bas, times, 0))
    for mode in modes:
        pda_mode = MODE_NAMES[mode]
        models = []
        for b in beats:
            model, _ = pda.fit([b], bas, mode=pda_mode, lam=cfg.lam,
                               max_iter=cfg.max_iter, tol=cfg.tol, _ws=ws)
            models.append(model)
        n_bad = sum(1 for m in models if not m.converged)
        if n_bad:
            log.warning("%d/%d %s fits did not converge (flagged, not fatal)",
                        n_bad, len(models), pda_mode)
        out[mode] = models
    return out


def _ode_matrix(models, morphs) -> np.ndarray:
    return np.array([[m.w1, m.w0, mo.r_height, mo.qrs_width]
                     for m, mo in zip(models, morphs)])


def _tv_curve_matrices(models, grid):
    W1 = np.vstack([design_matrix(m.basis, grid, 0) @ m.h1 for m in models])
    W0 = np.vstack([design_matrix(m.basis, grid, 0) @ m.h0 for m in models])
    return W1, W0


def _svm_fold_pipeline(X, labels, cfg: PipelineConfig):
    gamma = None if cfg.svm_gamma == "auto" else cfg.svm_gamma

    def run(train_idx, test_idx):
        model = classify.svm_train(X[train_idx], [labels[i] for i in train_idx],
                                   kernel=cfg.svm_kernel, C=cfg.svm_c,
                                   tol=cfg.svm_tol, seed=cfg.seed, gamma=gamma)
        d = classify.svm_decision(model, X[test_idx])
        return [classify.POSITIVE_LABEL if v > 0 else classify.NEGATIVE_LABEL
                for v in d]
    return run


def _odet_fold_pipeline(W1, W0, morphs, labels, cfg: PipelineConfig):
    gamma = None if cfg.svm_gamma == "auto" else cfg.svm_gamma
    morph_cols = np.array([[mo.r_height, mo.qrs_width] for mo in morphs])

    def run(train_idx, test_idx):
        m = cfg.fpca_components
        m = min(m, len(train_idx) - 1)
        f1 = features.fpca_fit(W1[train_idx], m)
        f0 = features.fpca_fit(W0[train_idx], m)

        def score(idx):
            s1 = np.vstack([features.fpca_scores(f1, W1[i]) for i in idx])
            s0 = np.vstack([features.fpca_scores(f0, W0[i]) for i in idx])
            return np.hstack([s1, s0, morph_cols[idx]])

        model = classify.svm_train(score(train_idx),
                                   [labels[i] for i in train_idx],
                                   kernel=cfg.svm_kernel, C=cfg.svm_c,
                                   tol=cfg.svm_tol, seed=cfg.seed, gamma=gamma)
        d = classify.svm_decision(model, score(test_idx))
        return [classify.POSITIVE_LABEL if v > 0 else classify.NEGATIVE_LABEL
                for v in d]
    return run


def _nn_fold_pipeline(X, labels, cfg: PipelineConfig):
    names = [f"x{j}" for j in range(X.shape[1])]

    def run(train_idx, test_idx):
        train_fvs = [features.FeatureVector(names=names, values=X[i])
                     for i in train_idx]
        tf = features.standardize_fit(train_fvs)
        Ztr = (X[train_idx] - tf.means) / tf.scales
        Zte = (X[test_idx] - tf.means) / tf.scales
        model = classify.mlp_train(Ztr, [labels[i] for i in train_idx],
                                   lr=cfg.mlp_lr, epochs=cfg.mlp_epochs,
                                   seed=cfg.seed)
        scores = classify.mlp_score(model, Zte)
        return [classify.POSITIVE_LABEL if s > 0.5 else classify.NEGATIVE_LABEL
                for s in scores]
    return run


def evaluate_pipelines(beats, fitted, cfg: PipelineConfig, file_id: str) -> list:
    """Cross-validated metrics rows, one per requested pipeline."""
    labels = [b.label for b in beats]
    n_normal = sum(1 for l in labels if l == "normal")
    n_abnormal = sum(1 for l in labels if l == "abnormal")
    rows = []
    if n_normal == 0 or n_abnormal == 0:
        raise InvalidArgumentError(
            "evaluation needs both classes present in the dataset")
    morphs = [signal.morphology(b) for b in beats]

    def add_row(name, metrics):
        rows.append({"file_id": file_id, "n_normal": n_normal,
                     "n_abnormal": n_abnormal, "pipeline": name,
                     "sensitivity": metrics.sensitivity,
                     "specificity": metrics.specificity,
                     "accuracy": metrics.accuracy})

    if cfg.classifier == "mlp":
        X = np.vstack([features.fourier_features(b).values for b in beats])
        met = classify.kfold_cv(labels, _nn_fold_pipeline(X, labels, cfg),
                                cfg.folds, cfg.seed)
        add_row("NN", met)
        return rows

    for mode in _fit_modes(cfg):
        models = fitted[mode]
        if mode == "constant":
            X = _ode_matrix(models, morphs)
            pipeline = _svm_fold_pipeline(X, labels, cfg)
        else:
            grid = features.coefficient_curve_grid(models[0].basis)
            W1, W0 = _tv_curve_matrices(models, grid)
            pipeline = _odet_fold_pipeline(W1, W0, morphs, labels, cfg)
        met = classify.kfold_cv(labels, pipeline, cfg.folds, cfg.seed)
        add_row(PIPELINE_NAMES[mode], met)
    return rows


def _stability_rows(models_with_ids) -> list:
    rows = []
    for model, source_id in models_with_ids:
        if model.mode != "constant":
            continue
        rep = dynamics.stability(model.w1, model.w0)
        rows.append({
            "source_id": source_id, "w1": model.w1, "w0": model.w0,
            "root1_re": rep.roots[0].real, "root1_im": rep.roots[0].imag,
            "root2_re": rep.roots[1].real, "root2_im": rep.roots[1].imag,
            "regime": rep.regime, "stable": rep.stable,
            "step": "unsupported" if model.w0 == 0 else "ok",
        })
    return rows


def _response_grid(w1: float, w0: float) -> np.ndarray:
    rep = dynamics.stability(w1, w0)
    slowest = max(r.real for r in rep.roots)
    if rep.stable:
        t_end = min(max(10.0 / abs(slowest), 0.5), 10.0)
    else:
        t_end = 2.0
    return np.linspace(0.0, t_end, 1201)


# -- commands ------------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = _config_from_args(args)
    beats = signal.synth_dataset(_class_specs(cfg), cfg.sample_rate, cfg.window,
                                 cfg.seed, x0=cfg.x0, v0=cfg.v0)
    io.save_document(args.out, io.dataset_document(beats))
    print(f"wrote {len(beats)} beats -> {args.out}")
    return 0


def cmd_fit(args) -> int:
    cfg = _config_from_args(args)
    beats = io.dataset_from_document(io.load_document(args.data), args.data)
    entries = []
    if beats and args.pooled:
        bas = _dataset_basis(beats, cfg)
        for mode in _fit_modes(cfg):
            model, _ = pda.fit(beats, bas, mode=MODE_NAMES[mode], lam=cfg.lam,
                               max_iter=cfg.max_iter, tol=cfg.tol)
            entries.append(io.model_entry(model, "pooled"))
    elif beats:
        fitted = fit_beats(beats, cfg)
        for mode in _fit_modes(cfg):
            for beat, model in zip(beats, fitted[mode]):
                entries.append(io.model_entry(model, beat.source_id))
    io.save_document(args.out, io.models_document(entries))
    print(f"wrote {len(entries)} model(s) -> {args.out}")
    return 0


def cmd_analyze(args) -> int:
    models = io.models_from_document(io.load_document(args.models), args.models)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    rows = _stability_rows(models)
    if not rows:
        log.warning("no constant-mode models; stability table is empty")
    cols = ["source_id", "w1", "w0", "root1_re", "root1_im",
            "root2_re", "root2_im", "regime", "stable", "step"]
    with open(outdir / "stability.csv", "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(",".join(str(row[c]) for c in cols) + "\n")
    for model, source_id in models:
        if model.mode != "constant":
            continue
        t = _response_grid(model.w1, model.w0)
        io.save_response_csv(outdir / f"{source_id}_impulse.csv",
                             dynamics.impulse_response(model.w1, model.w0, t))
        if model.w0 != 0:
            io.save_response_csv(outdir / f"{source_id}_step.csv",
                                 dynamics.step_response(model.w1, model.w0, t))
        else:
            log.warning("%s: w0=0, step response unsupported (impulse emitted)",
                        source_id)
    print(f"wrote stability table ({len(rows)} row(s)) -> {outdir}")
    return 0


def _feature_vectors(beats, fitted, cfg: PipelineConfig) -> list:
    """Whole-set feature export (FPCA pooled over the full input)."""
    morphs = [signal.morphology(b) for b in beats]
    if cfg.classifier == "mlp":
        return [features.fourier_features(b) for b in beats]
    if cfg.mode == "both":
        raise InvalidArgumentError(
            "feature export needs a single mode (constant or varying)")
    models = fitted[cfg.mode]
    out = []
    if cfg.mode == "constant":
        for b, m, mo in zip(beats, models, morphs):
            fv = features.constant_features(m, mo)
            fv.label = b.label
            out.append(fv)
        return out
    grid = features.coefficient_curve_grid(models[0].basis)
    W1, W0 = _tv_curve_matrices(models, grid)
    m_comp = min(cfg.fpca_components, len(beats) - 1)
    f1 = features.fpca_fit_grid(W1, grid, m_comp)
    f0 = features.fpca_fit_grid(W0, grid, m_comp)
    for b, model, mo in zip(beats, models, morphs):
        fv = features.varying_features(model, f1, f0, mo)
        fv.label = b.label
        out.append(fv)
    return out


def cmd_features(args) -> int:
    cfg = _config_from_args(args)
    beats = io.dataset_from_document(io.load_document(args.data), args.data)
    if not beats:
        raise InvalidArgumentError("dataset is empty; nothing to featurize")
    fitted = {}
    if cfg.classifier != "mlp":
        if cfg.mode == "both":
            raise InvalidArgumentError(
                "feature export needs a single mode (constant or varying)")
        fitted = fit_beats(beats, cfg, modes=[cfg.mode])
    io.save_features_csv(args.out, _feature_vectors(beats, fitted, cfg))
    print(f"wrote features for {len(beats)} beats -> {args.out}")
    return 0


def cmd_train(args) -> int:
    cfg = _config_from_args(args)
    fvs = io.load_features_csv(args.features)
    X, labels = features.feature_matrix(fvs)
    if cfg.classifier == "mlp":
        tf = features.standardize_fit(fvs)
        Z = (X - tf.means) / tf.scales
        model = classify.mlp_train(Z, labels, lr=cfg.mlp_lr,
                                   epochs=cfg.mlp_epochs, seed=cfg.seed)
        model.transform = tf
        doc = io.classifier_document(model)
    else:
        gamma = None if cfg.svm_gamma == "auto" else cfg.svm_gamma
        model = classify.svm_train(X, labels, kernel=cfg.svm_kernel, C=cfg.svm_c,
                                   tol=cfg.svm_tol, seed=cfg.seed, gamma=gamma)
        doc = io.classifier_document(model)
    io.save_document(args.out, doc)
    print(f"trained {cfg.classifier} on {len(fvs)} rows -> {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _config_from_args(args)
    beats = io.dataset_from_document(io.load_document(args.data), args.data)
    if not beats:
        raise InvalidArgumentError("dataset is empty; nothing to evaluate")
    fitted = _load_or_fit(args, beats, cfg)
    file_id = Path(args.data).stem
    rows = evaluate_pipelines(beats, fitted, cfg, file_id)
    io.save_metrics_csv(args.out, rows)
    for row in rows:
        print(f"{row['pipeline']}: sensitivity={row['sensitivity']:.3f} "
              f"specificity={row['specificity']:.3f} accuracy={row['accuracy']:.3f}")
    return 0


def _load_or_fit(args, beats, cfg) -> dict:
    if getattr(args, "models", None):
        loaded = io.models_from_document(io.load_document(args.models), args.models)
        by_mode = {"constant": {}, "varying": {}}
        for model, source_id in loaded:
            key = "constant" if model.mode == "constant" else "varying"
            by_mode[key][source_id] = model
        fitted = {}
        for mode in _fit_modes(cfg):
            if cfg.classifier == "mlp":
                continue
            table = by_mode[mode]
            missing = [b.source_id for b in beats if b.source_id not in table]
            if missing:
                raise InvalidArgumentError(
                    f"{args.models}: no {MODE_NAMES[mode]} model for beat "
                    f"{missing[0]!r} (and {len(missing) - 1} more)")
            fitted[mode] = [table[b.source_id] for b in beats]
        return fitted
    if cfg.classifier == "mlp":
        return {}
    return fit_beats(beats, cfg)


def cmd_pipeline(args) -> int:
    cfg = _config_from_args(args)
    report = {"schema": io.REPORT_SCHEMA,
              "provenance": {"version": __version__, "seed": cfg.seed,
                             "config_sha256": cfg.sha256()},
              "config": cfg.as_dict()}
    if args.recording:
        if not args.annotations:
            raise InvalidArgumentError("--recording requires --annotations")
        recording = io.load_recording_csv(args.recording)
        recording.annotations = io.load_annotations_csv(args.annotations)
        filtered = signal.bandpass(recording)
        beats = signal.segment_beats(filtered, cfg.window)
        source = args.recording
    else:
        beats = io.dataset_from_document(io.load_document(args.data), args.data)
        source = args.data
    labels = [b.label for b in beats]
    report["dataset"] = {"source": source, "n_beats": len(beats),
                         "n_normal": labels.count("normal"),
                         "n_abnormal": labels.count("abnormal")}
    if not beats:
        report["fit"] = {}
        report["stability"] = []
        report["metrics"] = []
        io.save_document(args.out, report)
        print(f"empty input; wrote report -> {args.out}")
        return 0

    fitted = fit_beats(beats, cfg)
    fit_section = {}
    for mode, models in fitted.items():
        entry = {"n_models": len(models),
                 "n_converged": sum(1 for m in models if m.converged)}
        if mode == "constant":
            entry["parameters"] = [
                {"source_id": b.source_id, "w1": m.w1, "w0": m.w0,
                 "lambda": m.lam, "converged": m.converged}
                for b, m in zip(beats, models)]
        fit_section[MODE_NAMES[mode]] = entry
    report["fit"] = fit_section
    report["stability"] = _stability_rows(
        [(m, b.source_id) for b, m in zip(beats, fitted.get("constant", []))])

    both_classes = 0 < labels.count("normal") and 0 < labels.count("abnormal")
    if both_classes:
        rows = evaluate_pipelines(beats, fitted, cfg, Path(source).stem)
    else:
        log.warning("dataset lacks a class; skipping cross-validated metrics")
        rows = []
    report["metrics"] = rows
    io.save_document(args.out, report)
    print(f"wrote report -> {args.out}")
    return 0


# -- argument parsing ----------------------------------------------------------

def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    group = parser.add_argument_group("config overrides")
    for key, (parser_fn, default) in CONFIG_FIELDS.items():
        group.add_argument(f"--{key.replace('_', '-')}", dest=f"cfg_{key}",
                           type=parser_fn, default=None, metavar="V",
                           help=f"override {key} (default {default})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="odebeat",
        description="Fit second-order ODE models to beat waveforms, analyze "
                    "their dynamics, and classify beats from ODE features.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a labeled synthetic dataset")
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit ODE models to every beat")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--pooled", action="store_true",
                   help="fit one model over all beats instead of one per beat")
    _add_config_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("analyze", help="stability table and response curves")
    p.add_argument("--models", required=True)
    p.add_argument("--outdir", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("features", help="export a feature table")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="train a classifier from a feature table")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="cross-validated metrics table")
    p.add_argument("--data", required=True)
    p.add_argument("--models", help="reuse models from a fit run")
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("pipeline", help="end-to-end run producing one report")
    p.add_argument("--data", help="beat dataset JSON")
    p.add_argument("--recording", help="recording CSV (needs --annotations)")
    p.add_argument("--annotations", help="annotation CSV")
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "pipeline" and bool(args.data) == bool(args.recording):
        parser.error("pipeline needs exactly one of --data or --recording")
    try:
        return args.func(args)
    except OdebeatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - internal failure path
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
