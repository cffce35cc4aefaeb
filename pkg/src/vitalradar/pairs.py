"""Contrastive pair construction from windowed receiver signals.

A positive sample stacks a time slice with the slice a fixed lag T earlier;
a negative sample stacks it with a slice a random lag delta earlier, where
delta is drawn away from T by a guard band.  Discriminating the two teaches
the model temporally structured features.

Each model input vector concatenates the real and imaginary parts of both
slices: for an N-bin window the per-receiver feature has 4N entries
(re/im of the anchor slice, then re/im of the lagged slice).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .windowing import WindowedSignal

__all__ = ["PairBatch", "make_pairs", "pair_features", "stack_features"]


@dataclass
class PairBatch:
    """Balanced contrastive batch.

    positives, negatives: (B, M, 4N) float feature tensors.
    anchor_idx: (2, B) frame indices of positive / negative anchors.
    neg_lag_idx: (B,) the sampled delta in frames for each negative.
    lag_idx: the fixed positive lag T in frames.
    """

    positives: np.ndarray
    negatives: np.ndarray
    anchor_idx: np.ndarray
    neg_lag_idx: np.ndarray
    lag_idx: int

    def __post_init__(self) -> None:
        if self.positives.shape != self.negatives.shape:
            raise ValueError("positive and negative counts must balance")
        if np.any(self.neg_lag_idx == self.lag_idx):
            raise ValueError("negative lag collides with the positive lag")

    @property
    def n_pairs(self) -> int:
        return self.positives.shape[0]

    def inputs_and_labels(self) -> tuple[np.ndarray, np.ndarray]:
        """Concatenate into one batch: positives labeled 1, negatives 0."""
        x = np.concatenate([self.positives, self.negatives], axis=0)
        y = np.concatenate(
            [np.ones(self.n_pairs), np.zeros(self.n_pairs)]
        )
        return x, y


def stack_features(now: np.ndarray, then: np.ndarray) -> np.ndarray:
    """Channel-split feature vector(s) for slice pairs.

    now/then: (..., M, N) complex -> (..., M, 4N) float
    """
    return np.concatenate(
        [now.real, now.imag, then.real, then.imag], axis=-1
    ).astype(np.float64)


def pair_features(series: np.ndarray, anchors: np.ndarray, lags: np.ndarray) -> np.ndarray:
    """Features for (anchor, anchor - lag) slice pairs of a (T, M, N) series."""
    return stack_features(series[anchors], series[anchors - lags])


def _sample_deltas(
    rng: np.random.Generator,
    anchors_s: np.ndarray,
    lag_s: float,
    delta_range_s: tuple[float, float],
    guard_s: float,
) -> np.ndarray:
    """Uniform deltas over [lo, min(hi, anchor)] minus the guard around T."""
    lo, hi = delta_range_s
    out = np.empty(anchors_s.size)
    for i, cap in enumerate(np.minimum(hi, anchors_s)):
        left = (lo, min(cap, lag_s - guard_s))
        right = (min(lag_s + guard_s, cap), cap)
        len_left = max(0.0, left[1] - left[0])
        len_right = max(0.0, right[1] - right[0])
        if len_left + len_right <= 0:
            raise ValueError("no admissible negative lag; record too short")
        u = rng.uniform(0.0, len_left + len_right)
        out[i] = left[0] + u if u < len_left else right[0] + (u - len_left)
    return out


def make_pairs(
    windowed: WindowedSignal,
    n_pairs: int,
    lag_s: float,
    delta_range_s: tuple[float, float] = (0.1, 5.0),
    guard_s: float = 0.2,
    rng: np.random.Generator | None = None,
) -> PairBatch:
    """Draw a balanced batch of positive and negative samples.

    Anchors are uniform over frames at least T after the record start, so
    every positive's two halves are exactly ``round(lag_s * fps)`` frames
    apart.  Negative lags are uniform over ``delta_range_s`` excluding
    ``lag_s +- guard_s`` and capped by the anchor index.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    fps = windowed.fps
    series = windowed.series
    n_frames = series.shape[0]
    lag_idx = int(round(lag_s * fps))
    if lag_idx < 1:
        raise ValueError("lag must span at least one frame")
    if lag_idx >= n_frames:
        raise ValueError(
            f"lag of {lag_idx} frames is not shorter than the {n_frames}-frame record"
        )

    pos_anchors = rng.integers(lag_idx, n_frames, size=n_pairs)
    neg_anchors = rng.integers(lag_idx, n_frames, size=n_pairs)
    deltas_s = _sample_deltas(rng, neg_anchors / fps, lag_s, delta_range_s, guard_s)
    neg_lags = np.clip(np.round(deltas_s * fps).astype(int), 1, neg_anchors)
    # The guard band keeps rounded deltas clear of the positive lag.
    if np.any(neg_lags == lag_idx):
        raise ValueError("guard band too narrow for the frame rate")

    return PairBatch(
        positives=pair_features(series, pos_anchors, np.full(n_pairs, lag_idx)),
        negatives=pair_features(series, neg_anchors, neg_lags),
        anchor_idx=np.stack([pos_anchors, neg_anchors]),
        neg_lag_idx=neg_lags,
        lag_idx=lag_idx,
    )
