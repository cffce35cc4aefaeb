"""Distributed UWB MIMO radar vital-sign sensing, end to end in software.

The package simulates per-element channel-impulse-response frames for
subjects in a room, models the wireless clock-synchronization chain between
boards, and recovers respiration/heartbeat waveforms with an unsupervised
attention + contrastive-encoder model.  An experiment harness reproduces
configuration-tradeoff and robustness studies at desk scale.
"""

from .estimator import VitalSourceSeparator
from .frontend import (
    ArrayLayout,
    CirFrame,
    FrameRecord,
    RadarParams,
    SubArray,
    aoa_estimate,
    as_record,
    ideal_clocks,
    make_layout,
    snr_estimate,
    synthesize_frame,
    synthesize_record,
)
from .frameio import load_frames, load_model, save_frames, save_model
from .model import ModelDims, SeparatorModel
from .pairs import PairBatch, make_pairs
from .scene import (
    ChestModel,
    Obstacle,
    Scene,
    Subject,
    Trajectory,
    chest_displacement,
    occlusion_loss,
    subject_pose,
)
from .sync import (
    ClockState,
    SyncNoiseProfile,
    SYNC_PROFILES,
    TonePair,
    coherence_report,
    derive_reference,
    phase_offset_correct,
    pll_cleanup,
    received_tones,
)
from .training import (
    Components,
    TrainConfig,
    attention_weights,
    extract_components,
    train,
)
from .vitals import (
    EvalRecord,
    VitalEstimate,
    bpm_error,
    classify_component,
    cosine_similarity,
    estimate_rate,
    match_components,
    rate_variability,
)
from .windowing import WindowedSignal, select_window

__version__ = "0.1.0"
