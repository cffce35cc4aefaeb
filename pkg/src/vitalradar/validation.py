"""Input validation helpers for frame data entering the pipeline."""

from __future__ import annotations

import numpy as np

from .frontend import N_BINS, FrameRecord, as_record

__all__ = ["validate_frames"]


def validate_frames(X, fps: float | None = None) -> FrameRecord:
    """Coerce X into a finite, well-shaped FrameRecord.

    Accepts a FrameRecord, an iterable of CirFrame, or a complex ndarray of
    shape (frames, elements, bins).  Raw arrays default to 50 frames/s when
    ``fps`` is not given.
    """
    if isinstance(X, np.ndarray):
        if X.ndim != 3:
            raise ValueError(
                f"frame array must be (frames, elements, bins); got shape {X.shape}"
            )
        if X.shape[2] != N_BINS:
            raise ValueError(f"expected {N_BINS} range bins, got {X.shape[2]}")
        if not np.iscomplexobj(X):
            raise ValueError("frame array must be complex valued")
        rate = 50.0 if fps is None else float(fps)
        rec = FrameRecord(np.arange(X.shape[0]) / rate, X, rate)
    elif isinstance(X, (FrameRecord, list, tuple)) or hasattr(X, "__iter__"):
        rec = as_record(X, fps=fps)
    else:
        raise TypeError(f"cannot interpret {type(X).__name__} as frames")
    if len(rec) < 2:
        raise ValueError("need at least 2 frames")
    if not np.all(np.isfinite(rec.bins)):
        raise ValueError("frames contain non-finite values")
    return rec
