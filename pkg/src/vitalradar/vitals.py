"""Vital-sign analysis of recovered waveforms.

Classification follows a rate-variability workflow: estimate the dominant
rate, measure the fractional spread of inter-peak intervals, and label the
waveform respiration (6-30 bpm), heartbeat (40-180 bpm) or noise.  Steady
rhythms have low variability; noise either lacks enough peaks or spreads
its intervals widely.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

__all__ = [
    "RESP_BAND_BPM",
    "HEART_BAND_BPM",
    "VARIABILITY_THRESHOLD",
    "PEAK_PROMINENCE_STD",
    "VitalEstimate",
    "EvalRecord",
    "NoRateError",
    "estimate_rate",
    "rate_variability",
    "classify_component",
    "cosine_similarity",
    "aligned_cosine",
    "bpm_error",
    "best_assignment",
    "match_components",
]

RESP_BAND_BPM = (6.0, 30.0)
HEART_BAND_BPM = (40.0, 180.0)

# Classification thresholds fixed by pilot runs on the simulator.
VARIABILITY_THRESHOLD = 0.25
PEAK_PROMINENCE_STD = 0.5
SPECTRAL_FLOOR_RATIO = 3.0


class NoRateError(ValueError):
    """No in-band spectral peak rises above the noise floor."""


@dataclass(frozen=True)
class VitalEstimate:
    """One classified component."""

    kind: str  # "respiration" | "heartbeat" | "noise"
    rate_bpm: float
    waveform: np.ndarray
    fs: float
    variability: float

    def __post_init__(self) -> None:
        if self.kind not in ("respiration", "heartbeat", "noise"):
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.kind == "respiration" and not RESP_BAND_BPM[0] <= self.rate_bpm <= RESP_BAND_BPM[1]:
            raise ValueError("respiration rate outside its band")
        if self.kind == "heartbeat" and not HEART_BAND_BPM[0] <= self.rate_bpm <= HEART_BAND_BPM[1]:
            raise ValueError("heart rate outside its band")


@dataclass(frozen=True)
class EvalRecord:
    """Per-waveform evaluation metrics."""

    abs_error_bpm: float
    rel_error: float
    cosine: float

    def __post_init__(self) -> None:
        if not -1.0 - 1e-9 <= self.cosine <= 1.0 + 1e-9:
            raise ValueError("cosine outside [-1, 1]")


def estimate_rate(waveform, fs: float, band_bpm: tuple[float, float]) -> float:
    """Dominant rate in bpm: periodogram peak in band, parabolic refinement.

    Raises NoRateError when no in-band peak exceeds three times the median
    spectral floor.  Invariant to amplitude scaling and DC offset.
    """
    x = np.asarray(waveform, dtype=float)
    lo_bpm, hi_bpm = band_bpm
    min_len = 4.0 * 60.0 / lo_bpm
    if x.size / fs < min_len:
        raise ValueError(
            f"need at least {min_len:.1f} s (4 cycles at {lo_bpm} bpm), got {x.size / fs:.1f} s"
        )
    x = x - x.mean()
    spec = np.abs(np.fft.rfft(x)) ** 2
    freqs = np.fft.rfftfreq(x.size, d=1.0 / fs) * 60.0  # bpm
    in_band = (freqs >= lo_bpm) & (freqs <= hi_bpm)
    if not np.any(in_band):
        raise NoRateError("band contains no spectral bins")
    floor = float(np.median(spec[1:]))  # exclude DC
    band_idx = np.nonzero(in_band)[0]
    peak = band_idx[int(np.argmax(spec[band_idx]))]
    if floor > 0 and spec[peak] < SPECTRAL_FLOOR_RATIO * floor:
        raise NoRateError("no rate: in-band peak below 3x the spectral floor")

    # Parabolic interpolation around the peak bin.
    if 1 <= peak < spec.size - 1:
        y0, y1, y2 = spec[peak - 1], spec[peak], spec[peak + 1]
        denom = y0 - 2.0 * y1 + y2
        shift = 0.5 * (y0 - y2) / denom if denom != 0 else 0.0
        shift = float(np.clip(shift, -0.5, 0.5))
    else:
        shift = 0.0
    df = freqs[1] - freqs[0]
    rate = float(freqs[peak] + shift * df)
    return float(np.clip(rate, lo_bpm, hi_bpm))


def _peak_intervals(waveform, fs: float) -> np.ndarray:
    x = np.asarray(waveform, dtype=float)
    x = x - x.mean()
    prominence = PEAK_PROMINENCE_STD * x.std()
    peaks, _ = find_peaks(x, prominence=prominence)
    return np.diff(peaks) / fs


def rate_variability(waveform, fs: float) -> float:
    """Fractional std of inter-peak intervals; needs >= 5 detected peaks."""
    intervals = _peak_intervals(waveform, fs)
    if intervals.size < 4:  # 5 peaks give 4 intervals
        raise ValueError("fewer than 5 peaks with sufficient prominence")
    return float(np.std(intervals) / np.mean(intervals))


def classify_component(waveform, fs: float) -> VitalEstimate:
    """Label a component respiration, heartbeat or noise.

    Needs >= 30 s of signal.  Noise is the fallback whenever no stable
    in-band rhythm is found; this function never raises on messy input.
    """
    x = np.asarray(waveform, dtype=float)
    if x.size / fs < 30.0:
        raise ValueError("need at least 30 s of signal to classify")

    def stable(band):
        try:
            rate = estimate_rate(x, fs, band)
            var = rate_variability(x, fs)
        except (NoRateError, ValueError):
            return None
        return (rate, var) if var < VARIABILITY_THRESHOLD else None

    resp = stable(RESP_BAND_BPM)
    if resp is not None:
        return VitalEstimate("respiration", resp[0], x, fs, resp[1])
    heart = stable(HEART_BAND_BPM)
    if heart is not None:
        return VitalEstimate("heartbeat", heart[0], x, fs, heart[1])
    try:
        var = rate_variability(x, fs)
    except ValueError:
        var = float("inf")
    return VitalEstimate("noise", 0.0, x, fs, var)


def cosine_similarity(a, b, max_lag: int = 0) -> float:
    """Max over lags in [-max_lag, max_lag] of the mean-removed cosine.

    Both series must have equal length; one is shifted against the other
    and the overlapping segments are compared.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("inputs must be equal-length 1-D series")
    a = a - a.mean()
    b = b - b.mean()
    if np.linalg.norm(a) == 0 or np.linalg.norm(b) == 0:
        raise ValueError("zero-norm input")
    best = -1.0
    n = a.size
    for lag in range(-max_lag, max_lag + 1):
        if lag >= 0:
            sa, sb = a[lag:], b[: n - lag]
        else:
            sa, sb = a[: n + lag], b[-lag:]
        na, nb = np.linalg.norm(sa), np.linalg.norm(sb)
        if na == 0 or nb == 0:
            continue
        best = max(best, float(np.dot(sa, sb) / (na * nb)))
    return best


def aligned_cosine(estimate, reference, max_lag: int = 0) -> float:
    """Polarity-aligned cosine: separation leaves the sign unidentified,
    so evaluation scores the better of the waveform and its negation."""
    return max(
        cosine_similarity(estimate, reference, max_lag),
        cosine_similarity(-np.asarray(estimate, dtype=float), reference, max_lag),
    )


def bpm_error(measured_bpm: float, gt_bpm: float, cosine: float = 1.0) -> EvalRecord:
    """Absolute and signed relative rate error against ground truth."""
    if gt_bpm <= 0:
        raise ValueError("ground-truth rate must be positive")
    return EvalRecord(
        abs_error_bpm=abs(measured_bpm - gt_bpm),
        rel_error=(measured_bpm - gt_bpm) / gt_bpm,
        cosine=cosine,
    )


def best_assignment(similarity: np.ndarray) -> tuple[int, ...]:
    """Best injective assignment ground-truth -> estimate.

    ``similarity[i, j]`` scores ground truth i against estimate j; returns
    the estimate index for each ground truth, maximizing the summed score by
    exhaustive search (intended for <= 3 ground truths).
    """
    sim = np.asarray(similarity, dtype=float)
    n_gt, n_est = sim.shape
    if n_est < n_gt:
        raise ValueError("need at least as many estimates as ground truths")
    best, best_sum = None, -np.inf
    for perm in itertools.permutations(range(n_est), n_gt):
        total = sum(sim[i, j] for i, j in enumerate(perm))
        if total > best_sum:
            best, best_sum = perm, total
    assert best is not None
    return best


def match_components(estimates, gt_waveforms, max_lag: int = 0) -> tuple[int, ...]:
    """Assign each ground-truth waveform its best estimate.

    ``estimates`` holds recovered waveforms (arrays or VitalEstimate);
    ``gt_waveforms`` the references.  Scores are polarity-aligned cosines;
    the summed score is maximized exhaustively.
    """
    est_series = [
        e.waveform if isinstance(e, VitalEstimate) else np.asarray(e, float)
        for e in estimates
    ]
    if len(est_series) < len(gt_waveforms):
        raise ValueError("fewer estimates than ground truths")
    sim = np.array(
        [[aligned_cosine(e, gt, max_lag) for e in est_series] for gt in gt_waveforms]
    )
    return best_assignment(sim)
