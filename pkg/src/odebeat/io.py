"""Document formats used by the command-line pipeline.

Every JSON document is self-describing via a ``schema`` field and is written
through one canonical serializer (sorted keys, two-space indent, NaN mapped
to null), so serialize -> deserialize -> serialize is byte-identical.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .basis import make_basis
from .classify import MlpModel, SvmModel
from .errors import InvalidArgumentError
from .features import FeatureVector, StandardizationTransform
from .pda import OdeModel
from .signal import BeatRecord, ContinuousRecording

DATASET_SCHEMA = "beat-dataset/1"
MODELS_SCHEMA = "ode-model-set/1"
CLASSIFIER_SCHEMA = "classifier/1"
REPORT_SCHEMA = "run-report/1"

_LABEL_TO_LETTER = {"normal": "N", "abnormal": "A"}
_LETTER_TO_LABEL = {"N": "normal", "A": "abnormal"}


def _sanitize(obj):
    """Make an object JSON-safe: arrays to lists, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def canonical_dumps(obj) -> str:
    return json.dumps(_sanitize(obj), sort_keys=True, indent=2,
                      allow_nan=False) + "\n"


def save_document(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_dumps(obj))


def load_document(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidArgumentError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict) or "schema" not in doc:
        raise InvalidArgumentError(f"{path}: missing schema field")
    return doc


def _require_schema(doc, schema, path):
    if doc.get("schema") != schema:
        raise InvalidArgumentError(
            f"{path}: expected schema {schema!r}, got {doc.get('schema')!r}")


# -- beat datasets -----------------------------------------------------------

def dataset_document(beats) -> dict:
    entries = []
    for b in beats:
        entries.append({
            "source_id": b.source_id,
            "sample_rate": float(b.sample_rate),
            "label": b.label,
            "values": np.asarray(b.values, float),
        })
    return {"schema": DATASET_SCHEMA, "beats": entries}


def dataset_from_document(doc, path="<dataset>") -> list:
    _require_schema(doc, DATASET_SCHEMA, path)
    beats = []
    for i, entry in enumerate(doc.get("beats", [])):
        try:
            fs = float(entry["sample_rate"])
            values = np.asarray(entry["values"], dtype=float)
            label = entry.get("label")
            if label is not None and label not in _LABEL_TO_LETTER:
                raise KeyError(f"bad label {label!r}")
            beats.append(BeatRecord(
                sample_rate=fs, times=np.arange(values.size) / fs,
                values=values, label=label,
                source_id=str(entry.get("source_id", f"beat-{i:04d}"))))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidArgumentError(f"{path}: beat row {i}: {exc}") from exc
    return beats


# -- fitted models -----------------------------------------------------------

def model_entry(model: OdeModel, source_id: str) -> dict:
    entry = {
        "source_id": source_id,
        "mode": model.mode,
        "lambda": float(model.lam),
        "iterations": int(model.iterations),
        "converged": bool(model.converged),
        "sse_p": float(model.sse_p),
        "basis": {"t_min": model.basis.t_min, "t_max": model.basis.t_max,
                  "interior_spacing": model.basis.interior_spacing},
    }
    if model.mode == "constant":
        entry["w1"] = float(model.w1)
        entry["w0"] = float(model.w0)
    else:
        entry["h1"] = np.asarray(model.h1, float)
        entry["h0"] = np.asarray(model.h0, float)
    return entry


def models_document(entries) -> dict:
    return {"schema": MODELS_SCHEMA, "models": list(entries)}


def model_from_entry(entry, path="<models>", row=0) -> tuple[OdeModel, str]:
    try:
        b = entry["basis"]
        bas = make_basis((float(b["t_min"]), float(b["t_max"])),
                         float(b["interior_spacing"]))
        model = OdeModel(mode=entry["mode"], basis=bas,
                         lam=float(entry["lambda"]),
                         iterations=int(entry["iterations"]),
                         converged=bool(entry["converged"]),
                         sse_p=float(entry["sse_p"]))
        if model.mode == "constant":
            model.w1 = float(entry["w1"])
            model.w0 = float(entry["w0"])
        elif model.mode == "time-varying":
            model.h1 = np.asarray(entry["h1"], dtype=float)
            model.h0 = np.asarray(entry["h0"], dtype=float)
            if model.h1.size != bas.K or model.h0.size != bas.K:
                raise ValueError("parameter curve length does not match basis")
        else:
            raise ValueError(f"bad mode {entry['mode']!r}")
        return model, str(entry.get("source_id", f"model-{row:04d}"))
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidArgumentError(f"{path}: model row {row}: {exc}") from exc


def models_from_document(doc, path="<models>") -> list:
    _require_schema(doc, MODELS_SCHEMA, path)
    return [model_from_entry(e, path, i) for i, e in enumerate(doc.get("models", []))]


# -- classifiers -------------------------------------------------------------

def _transform_doc(tf: StandardizationTransform) -> dict:
    return {"means": tf.means, "scales": tf.scales}


def _transform_from(doc) -> StandardizationTransform:
    return StandardizationTransform(means=np.asarray(doc["means"], float),
                                    scales=np.asarray(doc["scales"], float))


def classifier_document(model) -> dict:
    if isinstance(model, SvmModel):
        return {"schema": CLASSIFIER_SCHEMA, "kind": "svm",
                "kernel": model.kernel,
                "gamma": None if model.gamma is None else float(model.gamma),
                "C": float(model.C), "bias": float(model.bias),
                "support_vectors": model.support_vectors,
                "dual_coeffs": model.dual_coeffs,
                "transform": _transform_doc(model.transform)}
    if isinstance(model, MlpModel):
        return {"schema": CLASSIFIER_SCHEMA, "kind": "mlp",
                "seed": int(model.seed),
                "w_hidden": model.w_hidden, "b_hidden": model.b_hidden,
                "w_out": model.w_out, "b_out": model.b_out,
                "transform": (None if model.transform is None
                              else _transform_doc(model.transform))}
    raise InvalidArgumentError(f"cannot serialize classifier {type(model)!r}")


def classifier_from_document(doc, path="<classifier>"):
    _require_schema(doc, CLASSIFIER_SCHEMA, path)
    try:
        if doc["kind"] == "svm":
            return SvmModel(
                kernel=doc["kernel"],
                gamma=None if doc["gamma"] is None else float(doc["gamma"]),
                C=float(doc["C"]), bias=float(doc["bias"]),
                support_vectors=np.asarray(doc["support_vectors"], float),
                dual_coeffs=np.asarray(doc["dual_coeffs"], float),
                transform=_transform_from(doc["transform"]))
        if doc["kind"] == "mlp":
            tf = doc.get("transform")
            return MlpModel(w_hidden=np.asarray(doc["w_hidden"], float),
                            b_hidden=np.asarray(doc["b_hidden"], float),
                            w_out=np.asarray(doc["w_out"], float),
                            b_out=np.asarray(doc["b_out"], float),
                            seed=int(doc["seed"]),
                            transform=None if tf is None else _transform_from(tf))
        raise ValueError(f"bad classifier kind {doc['kind']!r}")
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidArgumentError(f"{path}: {exc}") from exc


# -- CSV formats -------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def save_recording_csv(path, recording: ContinuousRecording) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# sample_rate={_fmt(float(recording.sample_rate))}\n")
        for v in recording.values:
            fh.write(_fmt(float(v)) + "\n")


def load_recording_csv(path) -> ContinuousRecording:
    values = []
    fs = None
    with open(path, "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line.lstrip("#").strip()
                if body.startswith("sample_rate="):
                    fs = float(body.split("=", 1)[1])
                continue
            try:
                values.append(float(line))
            except ValueError as exc:
                raise InvalidArgumentError(f"{path}: line {ln}: {exc}") from exc
    if fs is None:
        raise InvalidArgumentError(f"{path}: missing '# sample_rate=<Hz>' header")
    return ContinuousRecording(sample_rate=fs, values=np.asarray(values),
                               annotations=[])


def save_annotations_csv(path, annotations) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for idx, label in annotations:
            fh.write(f"{int(idx)},{_LABEL_TO_LETTER[label]}\n")


def load_annotations_csv(path) -> list:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise InvalidArgumentError(f"{path}: line {ln}: expected 'index,label'")
            idx_s, letter = parts[0].strip(), parts[1].strip()
            if not idx_s.isdigit():
                if ln == 1:   # tolerate a header row
                    continue
                raise InvalidArgumentError(f"{path}: line {ln}: bad sample index {idx_s!r}")
            if letter not in _LETTER_TO_LABEL:
                raise InvalidArgumentError(f"{path}: line {ln}: bad label {letter!r}")
            out.append((int(idx_s), _LETTER_TO_LABEL[letter]))
    if any(b <= a for (a, _), (b, _) in zip(out, out[1:])):
        raise InvalidArgumentError(f"{path}: annotation indices must be strictly increasing")
    return out


def save_features_csv(path, fvs) -> None:
    fvs = list(fvs)
    if not fvs:
        raise InvalidArgumentError("no feature vectors to write")
    names = fvs[0].names
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(list(names) + ["label"]) + "\n")
        for fv in fvs:
            if list(fv.names) != list(names):
                raise InvalidArgumentError("feature vectors have mismatched names")
            row = [_fmt(float(v)) for v in fv.values]
            row.append("" if fv.label is None else _LABEL_TO_LETTER[fv.label])
            fh.write(",".join(row) + "\n")


def load_features_csv(path):
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines:
        raise InvalidArgumentError(f"{path}: empty feature file")
    header = lines[0].split(",")
    if header[-1] != "label":
        raise InvalidArgumentError(f"{path}: last column must be 'label'")
    names = header[:-1]
    fvs = []
    for ln, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != len(header):
            raise InvalidArgumentError(f"{path}: line {ln}: expected {len(header)} columns")
        try:
            values = np.array([float(p) for p in parts[:-1]])
        except ValueError as exc:
            raise InvalidArgumentError(f"{path}: line {ln}: {exc}") from exc
        letter = parts[-1].strip()
        label = _LETTER_TO_LABEL.get(letter) if letter else None
        if letter and label is None:
            raise InvalidArgumentError(f"{path}: line {ln}: bad label {letter!r}")
        fvs.append(FeatureVector(names=names, values=values, label=label))
    return fvs


def save_metrics_csv(path, rows) -> None:
    """Rows: dicts with file_id, n_normal, n_abnormal, pipeline and the
    three rates (NaN written as 'nan')."""
    cols = ["file_id", "n_normal", "n_abnormal", "pipeline",
            "sensitivity", "specificity", "accuracy"]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            out = []
            for c in cols:
                v = row[c]
                if isinstance(v, float) and math.isnan(v):
                    out.append("nan")
                elif isinstance(v, float):
                    out.append(f"{v:.6f}")
                else:
                    out.append(str(v))
            fh.write(",".join(out) + "\n")


def save_response_csv(path, curve) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,value\n")
        for t, v in zip(curve.times, curve.values):
            fh.write(f"{_fmt(float(t))},{_fmt(float(v))}\n")
