"""Beat-oriented signal handling: band-pass filtering, segmentation around
annotations, morphology measures, and the seeded synthetic generator used as
the test oracle for the whole fitting pipeline."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import butter, filtfilt, lfilter

from . import dynamics
from .errors import InvalidArgumentError

log = logging.getLogger(__name__)

LABELS = ("normal", "abnormal")

# integer-coefficient cascade (comb low-pass + moving-average high-pass),
# delays scaled for 360 Hz so the passband stays near 5-12 Hz
_FS_INTEGER_PATH = 360.0
_LP_COMB_DELAY = 11           # low-pass first null at fs/11 ~ 33 Hz
_HP_WINDOW = 57               # high-pass corner near fs/57 ~ 6 Hz
_HP_LEAD = 28                 # (window-1)/2, keeps the high-pass linear phase
_BAND_LO_HZ = 5.0
_BAND_HI_HZ = 12.0

DEFAULT_NORMAL_RANGES = {"w1": (1.5, 3.5), "w0": (8000.0, 11000.0)}
DEFAULT_ABNORMAL_RANGES = {"w1": (-8.0, -5.0), "w0": (3500.0, 5500.0)}


@dataclass(eq=False)
class BeatRecord:
    """One sampled curve segment on a uniform grid starting at t=0."""

    sample_rate: float
    times: np.ndarray
    values: np.ndarray
    label: str | None = None
    source_id: str = ""


@dataclass(eq=False)
class ContinuousRecording:
    """A raw sampled channel plus (sample_index, label) annotations."""

    sample_rate: float
    values: np.ndarray
    annotations: list = field(default_factory=list)


@dataclass(frozen=True)
class Morphology:
    """Peak height (mV) and width (s) of the dominant deflection."""

    r_height: float
    qrs_width: float


def make_beat(sample_rate: float, values, label: str | None = None,
              source_id: str = "") -> BeatRecord:
    """BeatRecord with the implied uniform time grid."""
    values = np.asarray(values, dtype=float)
    times = np.arange(values.size) / float(sample_rate)
    return BeatRecord(sample_rate=float(sample_rate), times=times,
                      values=values, label=label, source_id=source_id)


def _integer_bandpass(x: np.ndarray) -> tuple[np.ndarray, int]:
    """Cascaded comb low-pass and moving-average high-pass; returns the
    filtered signal and its group delay in samples."""
    d = _LP_COMB_DELAY
    b_lp = np.zeros(2 * d + 1)
    b_lp[0], b_lp[d], b_lp[2 * d] = 1.0, -2.0, 1.0
    lp = lfilter(b_lp / (d * d), [1.0, -2.0, 1.0], x)

    n = _HP_WINDOW
    b_hp = np.full(n, -1.0 / n)
    b_hp[_HP_LEAD] += 1.0
    hp = lfilter(b_hp, [1.0], lp)
    return hp, (d - 1) + _HP_LEAD


def bandpass(recording: ContinuousRecording) -> ContinuousRecording:
    """Band-pass the recording near 5-12 Hz, preserving annotation alignment.

    At 360 Hz this runs the integer-coefficient cascade and compensates its
    group delay (the output is shifted left and edge-padded so the length and
    the annotation indices are unchanged).  Other rates use a 2nd-order
    Butterworth band-pass applied forward-backward, which is zero-phase.
    """
    fs = float(recording.sample_rate)
    if fs <= 0:
        raise InvalidArgumentError(f"sample_rate must be positive, got {fs!r}")
    x = np.asarray(recording.values, dtype=float)
    if x.size == 0:
        return ContinuousRecording(fs, x.copy(), list(recording.annotations))
    if fs == _FS_INTEGER_PATH:
        delay = (_LP_COMB_DELAY - 1) + _HP_LEAD
        padded = np.concatenate([x, np.full(delay, x[-1])])
        y, _ = _integer_bandpass(padded)
        y = y[delay:]
    else:
        if fs <= 2 * _BAND_HI_HZ:
            raise InvalidArgumentError(
                f"sample_rate {fs} Hz too low for a {_BAND_HI_HZ} Hz band edge")
        b, a = butter(2, [_BAND_LO_HZ, _BAND_HI_HZ], btype="bandpass", fs=fs)
        y = filtfilt(b, a, x)
    return ContinuousRecording(fs, y, list(recording.annotations))


def segment_beats(recording: ContinuousRecording, window: float) -> list[BeatRecord]:
    """Cut one window per annotation, centered on the annotated sample.

    Annotations whose window would cross a recording boundary are dropped
    (the count is logged).
    """
    if window <= 0:
        raise InvalidArgumentError(f"window must be positive, got {window!r}")
    fs = float(recording.sample_rate)
    n_w = int(round(window * fs))
    half = n_w // 2
    values = np.asarray(recording.values, dtype=float)
    beats = []
    dropped = 0
    for k, (idx, label) in enumerate(recording.annotations):
        start = int(idx) - half
        end = start + n_w
        if start < 0 or end > values.size:
            dropped += 1
            continue
        beats.append(BeatRecord(
            sample_rate=fs,
            times=np.arange(n_w) / fs,
            values=values[start:end].copy(),
            label=label,
            source_id=f"ann{k:05d}@{int(idx)}"))
    if dropped:
        log.warning("segment_beats: dropped %d annotation(s) at recording boundaries",
                    dropped)
    return beats


def morphology(beat: BeatRecord) -> Morphology:
    """Peak height and 10%-of-peak width of the deflection around the peak.

    Height is the maximum absolute amplitude (inverted complexes included);
    width spans the contiguous region around the peak where |value| stays
    above 10% of the height.  An all-zero beat maps to (0, 0).
    """
    v = np.abs(np.asarray(beat.values, dtype=float))
    if v.size == 0:
        raise InvalidArgumentError("beat is empty")
    peak = int(np.argmax(v))
    height = float(v[peak])
    if height == 0.0:
        return Morphology(r_height=0.0, qrs_width=0.0)
    thr = 0.1 * height
    lo = peak
    while lo > 0 and v[lo - 1] >= thr:
        lo -= 1
    hi = peak
    while hi < v.size - 1 and v[hi + 1] >= thr:
        hi += 1
    # hi - lo + 1 samples sit above threshold; their span approximates the
    # crossing-to-crossing duration to within one sample period
    return Morphology(r_height=height,
                      qrs_width=float((hi - lo + 1) / beat.sample_rate))


def synth_beat(w1: float, w0: float, x0: float, v0: float, sample_rate: float,
               duration: float, noise_sd: float, seed: int) -> BeatRecord:
    """Sampled free response of x'' + w1 x' + w0 x = 0 plus Gaussian noise.

    The noise stream comes from a counter-based Philox generator, so a given
    seed reproduces the same record on any platform.
    """
    if duration <= 0:
        raise InvalidArgumentError(f"duration must be positive, got {duration!r}")
    if noise_sd < 0:
        raise InvalidArgumentError(f"noise_sd must be >= 0, got {noise_sd!r}")
    fs = float(sample_rate)
    n = int(round(duration * fs))
    times = np.arange(n) / fs
    x = dynamics.free_response(w1, w0, x0, v0, times).values
    rng = np.random.Generator(np.random.Philox(seed))
    y = x + noise_sd * rng.standard_normal(n)
    return BeatRecord(sample_rate=fs, times=times, values=y)


def synth_dataset(class_specs: dict, sample_rate: float, duration: float,
                  seed: int, x0: float = 1.0, v0: float = 0.0) -> list[BeatRecord]:
    """Labeled synthetic beats with class-wise parameter ranges.

    ``class_specs`` maps a label to a dict with keys ``w1_range``,
    ``w0_range``, ``count`` and ``noise_sd``.  Normal beats must use
    strictly positive (w1, w0) ranges (stable systems), abnormal beats a
    strictly negative w1 range (unstable); anything else is rejected.
    """
    for label in class_specs:
        if label not in LABELS:
            raise InvalidArgumentError(f"unknown class label {label!r}")
    rng = np.random.Generator(np.random.Philox(seed))
    n_samples = int(round(duration * float(sample_rate)))
    times = np.arange(n_samples) / float(sample_rate)
    beats: list[BeatRecord] = []
    for label in LABELS:
        if label not in class_specs:
            continue
        spec = class_specs[label]
        count = int(spec["count"])
        if count < 0:
            raise InvalidArgumentError(f"count must be >= 0, got {count!r}")
        if count == 0:
            continue
        w1_lo, w1_hi = (float(x) for x in spec["w1_range"])
        w0_lo, w0_hi = (float(x) for x in spec["w0_range"])
        if w1_lo > w1_hi or w0_lo > w0_hi:
            raise InvalidArgumentError(f"{label}: ranges must be (low, high)")
        if w0_lo <= 0:
            raise InvalidArgumentError(f"{label}: w0 range must be positive")
        if label == "normal" and w1_lo <= 0:
            raise InvalidArgumentError(
                "normal class requires w1 > 0 (stable systems)")
        if label == "abnormal" and w1_hi >= 0:
            raise InvalidArgumentError(
                "abnormal class requires w1 < 0 (unstable systems)")
        noise_sd = float(spec.get("noise_sd", 0.0))
        if noise_sd < 0:
            raise InvalidArgumentError(f"noise_sd must be >= 0, got {noise_sd!r}")
        w1s = rng.uniform(w1_lo, w1_hi, size=count)
        w0s = rng.uniform(w0_lo, w0_hi, size=count)
        for i in range(count):
            x = dynamics.free_response(w1s[i], w0s[i], x0, v0, times).values
            y = x + noise_sd * rng.standard_normal(n_samples)
            beats.append(BeatRecord(
                sample_rate=float(sample_rate), times=times.copy(), values=y,
                label=label, source_id=f"synth-{label}-{i:04d}"))
    return beats
