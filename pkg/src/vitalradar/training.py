"""Training loop and inference for the source-separation model.

Training is plain momentum SGD on the contrastive binary cross-entropy,
single threaded and fully determined by the config seed.  Inference turns a
trained model into candidate source waveforms: one scalar series per
attention head, band-passed to the physiological band and normalized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .frontend import ArrayLayout, as_record
from .model import ModelDims, SeparatorModel
from .pairs import make_pairs, stack_features
from .windowing import WindowedSignal, build_windowed

__all__ = [
    "TrainConfig",
    "TrainingDivergenceError",
    "Components",
    "train",
    "extract_components",
    "attention_weights",
    "preprocess_windowed",
]

MIN_RECOMMENDED_DURATION_S = 30.0


class TrainingDivergenceError(RuntimeError):
    """Raised when the training loss turns non-finite."""

    def __init__(self, iteration: int):
        super().__init__(f"training diverged (non-finite loss) at iteration {iteration}")
        self.iteration = iteration


@dataclass(frozen=True)
class TrainConfig:
    """Hyper-parameters of one training run."""

    iterations: int = 200
    batch_pairs: int = 128
    learning_rate: float = 0.3
    momentum: float = 0.9
    seed: int = 0
    lag_s: float = 1.0
    delta_range_s: tuple[float, float] = (0.1, 5.0)
    delta_guard_s: float = 0.2
    window_bins: int = 30
    heads: int = 8
    attn_dim: int = 8
    enc_hidden: tuple[int, int] = (64, 32)
    feat_dim: int = 8
    band_hz: tuple[float, float] = (0.05, 3.5)

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.batch_pairs < 1:
            raise ValueError("batch_pairs must be >= 1")
        if self.lag_s <= 0:
            raise ValueError("lag_s must be positive")
        lo, hi = self.delta_range_s
        if not 0 < lo < hi:
            raise ValueError("delta_range_s must be increasing and positive")


def preprocess_windowed(windowed: WindowedSignal) -> WindowedSignal:
    """Remove static clutter and normalize the overall scale.

    Subtracts each (receiver, bin) series' temporal mean, then divides by
    the global RMS so receivers keep their relative strengths (the attention
    layer relies on them) while the absolute scale suits the encoder.
    """
    series = windowed.series - windowed.series.mean(axis=0, keepdims=True)
    rms = float(np.sqrt(np.mean(np.abs(series) ** 2)))
    if rms > 0:
        series = series / rms
    return WindowedSignal(windowed.start_bin, series, windowed.fps)


def train(
    frames,
    layout: ArrayLayout | None,
    cfg: TrainConfig,
) -> tuple[SeparatorModel, np.ndarray]:
    """Train a separator on a frame record.

    Returns the model and the loss trace: the loss measured at each of the
    ``cfg.iterations`` steps (before that step's update) plus one final
    evaluation, hence ``iterations + 1`` entries.  Records shorter than 30 s
    train but recover poorly; that minimum is a recommendation, not a check.
    ``layout`` is unused during training (attention learns its own receiver
    weighting) but kept so callers can pass one bundle around.
    """
    rec = as_record(frames)
    if len(rec) / rec.fps <= cfg.lag_s:
        raise ValueError("record shorter than one contrastive lag")
    windowed = preprocess_windowed(build_windowed(rec, cfg.window_bins))

    dims = ModelDims(
        n_receivers=windowed.n_receivers,
        window_bins=cfg.window_bins,
        heads=cfg.heads,
        attn_dim=cfg.attn_dim,
        enc_hidden=cfg.enc_hidden,
        feat_dim=cfg.feat_dim,
    )
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed & 0xFFFFFFFF, 0x7121)))
    lag_idx = int(round(cfg.lag_s * windowed.fps))
    model = SeparatorModel.initialize(dims, rng, lag_frames=max(1, lag_idx))

    velocity = {n: np.zeros_like(p) for n, p in model.params.items()}
    trace = np.empty(cfg.iterations + 1)

    def sample_batch():
        batch = make_pairs(
            windowed,
            cfg.batch_pairs,
            cfg.lag_s,
            cfg.delta_range_s,
            cfg.delta_guard_s,
            rng,
        )
        return batch.inputs_and_labels()

    for it in range(cfg.iterations):
        x, y = sample_batch()
        loss, grads = model.loss_and_gradients(x, y)
        if not np.isfinite(loss):
            raise TrainingDivergenceError(it)
        trace[it] = loss
        for name, g in grads.items():
            velocity[name] = cfg.momentum * velocity[name] - cfg.learning_rate * g
            model.params[name] = model.params[name] + velocity[name]

    x, y = sample_batch()
    final = model.loss(x, y)
    if not np.isfinite(final):
        raise TrainingDivergenceError(cfg.iterations)
    trace[cfg.iterations] = final
    return model, trace


@dataclass
class Components:
    """Candidate source waveforms: one per attention head."""

    series: np.ndarray  # (heads, T')
    t_start_s: float    # offset of series[..., 0] from the record start
    fs: float

    @property
    def n(self) -> int:
        return self.series.shape[0]


def _band_pass(x: np.ndarray, fs: float, band: tuple[float, float]) -> np.ndarray:
    """Zero-phase FFT brick-wall band-pass along the last axis."""
    n = x.shape[-1]
    spec = np.fft.rfft(x, axis=-1)
    freqs = np.fft.rfftfreq(n, d=1.0 / fs)
    mask = (freqs >= band[0]) & (freqs <= band[1])
    spec = spec * mask
    return np.fft.irfft(spec, n=n, axis=-1)


def _leading_component(series: np.ndarray) -> np.ndarray:
    """First principal component of (T, F) features, deterministic sign."""
    centered = series - series.mean(axis=0, keepdims=True)
    if not np.any(centered):
        return np.zeros(series.shape[0])
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    v = vt[0]
    pivot = int(np.argmax(np.abs(v)))
    if v[pivot] < 0:
        v = -v
    return centered @ v


def _forward_in_chunks(model: SeparatorModel, windowed: WindowedSignal, chunk: int = 256):
    """Encoder features and attention weights over all valid time steps."""
    series = windowed.series
    lag = model.lag_frames
    n = series.shape[0]
    if n <= lag:
        raise ValueError("record shorter than the model's pair lag")
    anchors = np.arange(lag, n)
    feats, alphas = [], []
    for s in range(0, anchors.size, chunk):
        idx = anchors[s : s + chunk]
        x = stack_features(series[idx], series[idx - lag])
        fw = model.forward(x)
        feats.append(fw.feats.reshape(idx.size, model.dims.heads, model.dims.feat_dim))
        alphas.append(fw.alpha)
    return np.concatenate(feats), np.concatenate(alphas), anchors


def extract_components(
    model: SeparatorModel,
    frames,
    band_hz: tuple[float, float] = (0.05, 3.5),
    window_bins: int | None = None,
) -> Components:
    """Recover candidate source waveforms from a trained model.

    Per head: leading principal component of the encoder feature series,
    band-passed to ``band_hz`` and normalized to unit variance.  Heads whose
    features carry no variance (constant input) yield all-zero series.
    """
    rec = as_record(frames)
    nbins = window_bins if window_bins is not None else model.dims.window_bins
    windowed = preprocess_windowed(build_windowed(rec, nbins))
    if windowed.n_receivers != model.dims.n_receivers:
        raise ValueError(
            f"record has {windowed.n_receivers} receivers, model expects "
            f"{model.dims.n_receivers}"
        )
    feats, _, anchors = _forward_in_chunks(model, windowed)
    out = np.empty((model.dims.heads, anchors.size))
    for w in range(model.dims.heads):
        comp = _leading_component(feats[:, w, :])
        comp = _band_pass(comp, windowed.fps, band_hz)
        std = comp.std()
        out[w] = comp / std if std > 1e-12 else 0.0
    return Components(out, t_start_s=float(anchors[0]) / windowed.fps, fs=windowed.fps)


def attention_weights(
    model: SeparatorModel,
    frames,
    layout: ArrayLayout | None = None,
) -> np.ndarray:
    """Receiver attention averaged over time and heads, normalized to 1.

    With a layout, weights are summed per sub-array and renormalized, giving
    one weight per board.
    """
    rec = as_record(frames)
    windowed = preprocess_windowed(build_windowed(rec, model.dims.window_bins))
    if windowed.n_receivers != model.dims.n_receivers:
        raise ValueError("receiver count mismatch between record and model")
    _, alphas, _ = _forward_in_chunks(model, windowed)
    per_receiver = alphas.mean(axis=(0, 1))
    per_receiver = per_receiver / per_receiver.sum()
    if layout is None:
        return per_receiver
    if layout.total_virtual != per_receiver.size:
        raise ValueError("layout does not match the record's receiver count")
    board = np.array([per_receiver[sl].sum() for sl in layout.board_slices()])
    return board / board.sum()
