"""Range-bin window selection: keep the strongest contiguous bin section.

Human reflections concentrate in a handful of neighboring range bins, so
the pipeline feeds the model only the contiguous window with the highest
time-averaged reflected power (summed over every element), 30 bins wide by
default.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .frontend import N_BINS, as_record

__all__ = ["WindowedSignal", "bin_power_profile", "select_window", "build_windowed"]


@dataclass
class WindowedSignal:
    """Windowed complex series: ``series[t, receiver, bin]`` with N bins."""

    start_bin: int
    series: np.ndarray  # (T, M, N) complex
    fps: float

    def __post_init__(self) -> None:
        n = self.series.shape[2]
        if not 1 <= n <= N_BINS:
            raise ValueError(f"window width {n} outside [1, {N_BINS}]")
        if self.start_bin < 0 or self.start_bin + n > N_BINS:
            raise ValueError("window exceeds the frame's bin range")

    @property
    def width(self) -> int:
        return self.series.shape[2]

    @property
    def n_receivers(self) -> int:
        return self.series.shape[1]


def bin_power_profile(frames) -> np.ndarray:
    """Time-averaged power per range bin, summed over all elements."""
    rec = as_record(frames)
    power = rec.bins.real.astype(np.float64) ** 2 + rec.bins.imag.astype(np.float64) ** 2
    return power.mean(axis=0).sum(axis=0)


def select_window(frames, n_bins: int = 30) -> int:
    """Start index of the length-``n_bins`` window with maximal total power.

    Ties break toward the lowest start index.  Accepts a FrameRecord, a
    sequence of CirFrame, or a precomputed per-bin power profile.
    """
    if isinstance(frames, np.ndarray) and frames.ndim == 1:
        profile = np.asarray(frames, dtype=float)
    else:
        profile = bin_power_profile(frames)
    if not 1 <= n_bins <= profile.size:
        raise ValueError(f"window width {n_bins} outside [1, {profile.size}]")
    windows = np.lib.stride_tricks.sliding_window_view(profile, n_bins)
    sums = windows.sum(axis=1)
    return int(np.argmax(sums))


def build_windowed(frames, n_bins: int = 30) -> WindowedSignal:
    """Select the strongest window and slice the record down to it."""
    rec = as_record(frames)
    start = select_window(rec, n_bins)
    series = rec.bins[:, :, start : start + n_bins].astype(np.complex128)
    return WindowedSignal(start, series, rec.fps)
