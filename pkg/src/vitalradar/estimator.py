"""Scikit-learn style front door to the separation pipeline.

``VitalSourceSeparator`` is fit on an unlabeled CIR frame record and
transforms records into candidate source waveforms; ``predict`` classifies
them into respiration / heartbeat / noise estimates.  It follows estimator
conventions (constructor stores hyper-parameters verbatim, ``fit`` returns
``self``, learned state carries a trailing underscore, ``get_params`` /
``set_params`` work) so it composes with the usual tooling.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .frontend import ArrayLayout
from .training import TrainConfig, attention_weights, extract_components, train
from .validation import validate_frames
from .vitals import VitalEstimate, classify_component

__all__ = ["VitalSourceSeparator"]


class VitalSourceSeparator(TransformerMixin, BaseEstimator):
    """Unsupervised separation of vital-sign waveforms from CIR frames.

    Parameters mirror :class:`~vitalradar.training.TrainConfig`; see there
    for semantics.  ``random_state`` seeds initialization and batch
    sampling, making fits bit-reproducible.

    Attributes (after ``fit``)
    --------------------------
    model_ : SeparatorModel
        Trained attention + encoder + discriminator parameters.
    loss_trace_ : ndarray, (iterations + 1,)
        Training-loss trajectory.
    n_receivers_ : int
        Virtual element count the model was fit for.
    """

    def __init__(
        self,
        window_bins: int = 30,
        heads: int = 8,
        attn_dim: int = 8,
        enc_hidden: tuple[int, int] = (64, 32),
        feat_dim: int = 8,
        iterations: int = 200,
        batch_pairs: int = 64,
        learning_rate: float = 0.1,
        momentum: float = 0.9,
        lag_s: float = 1.0,
        delta_range_s: tuple[float, float] = (0.1, 5.0),
        delta_guard_s: float = 0.2,
        band_hz: tuple[float, float] = (0.05, 3.5),
        random_state: int = 0,
    ):
        self.window_bins = window_bins
        self.heads = heads
        self.attn_dim = attn_dim
        self.enc_hidden = enc_hidden
        self.feat_dim = feat_dim
        self.iterations = iterations
        self.batch_pairs = batch_pairs
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.lag_s = lag_s
        self.delta_range_s = delta_range_s
        self.delta_guard_s = delta_guard_s
        self.band_hz = band_hz
        self.random_state = random_state

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            iterations=self.iterations,
            batch_pairs=self.batch_pairs,
            learning_rate=self.learning_rate,
            momentum=self.momentum,
            seed=self.random_state,
            lag_s=self.lag_s,
            delta_range_s=tuple(self.delta_range_s),
            delta_guard_s=self.delta_guard_s,
            window_bins=self.window_bins,
            heads=self.heads,
            attn_dim=self.attn_dim,
            enc_hidden=tuple(self.enc_hidden),
            feat_dim=self.feat_dim,
            band_hz=tuple(self.band_hz),
        )

    def fit(self, X, y=None):
        """Train on a frame record (FrameRecord, CirFrame sequence, or a
        complex array of shape (frames, elements, bins) plus default fps)."""
        rec = validate_frames(X)
        self.model_, self.loss_trace_ = train(rec, None, self._train_config())
        self.n_receivers_ = rec.n_elements
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "model_"):
            raise NotFittedError(
                "This VitalSourceSeparator instance is not fitted yet; call fit first."
            )

    def transform(self, X) -> np.ndarray:
        """Candidate source waveforms, shape (time_steps, heads)."""
        self._check_fitted()
        rec = validate_frames(X)
        comp = extract_components(self.model_, rec, band_hz=tuple(self.band_hz))
        return comp.series.T

    def components(self, X):
        """Like ``transform`` but returns the full Components bundle."""
        self._check_fitted()
        return extract_components(self.model_, validate_frames(X), band_hz=tuple(self.band_hz))

    def predict(self, X) -> list[VitalEstimate]:
        """Classify every extracted component."""
        comp = self.components(X)
        return [classify_component(comp.series[w], comp.fs) for w in range(comp.n)]

    def attention_profile(self, X, layout: ArrayLayout | None = None) -> np.ndarray:
        """Normalized receiver (or per-sub-array) attention weights."""
        self._check_fitted()
        return attention_weights(self.model_, validate_frames(X), layout)
