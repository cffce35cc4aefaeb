"""Wireless clock distribution between a server board and client boards.

The server broadcasts two tones; each client receives both shifted by its
carrier frequency offset and recovers the reference as the tone difference,
which cancels the offset exactly.  A PLL (modeled as a first-order phase
low-pass) cleans the recovered clock, and a two-way exchange estimates the
propagation-induced phase offset: the client echoes its derived clock, the
server measures the round-trip phase, and half of it is applied as the
one-way correction.

Tones and phases are tracked symbolically with additive measurement noise;
there is no RF waveform simulation here.  Noise profiles ("los", "nlos")
hold the calibrated per-tone frequency-estimate error and phase-estimate
error used by the coherence report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.constants import speed_of_light as C_M_PER_S

__all__ = [
    "ClockState",
    "TonePair",
    "SyncNoiseProfile",
    "SYNC_PROFILES",
    "received_tones",
    "derive_reference",
    "pll_cleanup",
    "phase_offset_correct",
    "estimate_offset_round_trip",
    "sample_clocks",
    "coherence_report",
    "CoherenceStats",
]

# Median of |N(0, 1)| is Phi^-1(0.75); used to calibrate tone-error sigmas so
# the reported median residual CFO lands on the target value.
_HALF_NORMAL_MEDIAN = 0.6744897501960817


@dataclass(frozen=True)
class ClockState:
    """Clock of one board relative to the server."""

    board_id: int
    delta_f_hz: float = 0.0
    phase_offset_rad: float = 0.0
    jitter_std_rad: float = 0.0
    corrected: bool = False

    def __post_init__(self) -> None:
        if self.jitter_std_rad < 0:
            raise ValueError("jitter_std_rad must be >= 0")


@dataclass(frozen=True)
class TonePair:
    """Server-side tone frequencies; the reference clock is f1 - f2."""

    f1_hz: float = 343e6
    f2_hz: float = 100e6

    def __post_init__(self) -> None:
        if not self.f1_hz > self.f2_hz > 0:
            raise ValueError("need f1 > f2 > 0")

    @property
    def reference_hz(self) -> float:
        return self.f1_hz - self.f2_hz


@dataclass(frozen=True)
class SyncNoiseProfile:
    """Calibrated measurement-noise levels for the sync chain.

    tone_error_std_hz: std of each tone's frequency-estimate error, chosen
    so the median |residual CFO| matches the target (the residual is the
    difference of two independent errors).
    phase_error_std_rad: std of the round-trip phase-estimate error.
    """

    name: str
    tone_error_std_hz: float
    phase_error_std_rad: float
    jitter_std_rad: float = 0.0

    @staticmethod
    def for_median_cfo(name: str, median_cfo_hz: float, phase_error_std_rad: float,
                       jitter_std_rad: float = 0.0) -> "SyncNoiseProfile":
        sigma = median_cfo_hz / (_HALF_NORMAL_MEDIAN * math.sqrt(2.0))
        return SyncNoiseProfile(name, sigma, phase_error_std_rad, jitter_std_rad)


SYNC_PROFILES = {
    "ideal": SyncNoiseProfile("ideal", 0.0, 0.0, 0.0),
    "los": SyncNoiseProfile.for_median_cfo("los", 0.25, 0.02, 0.01),
    "nlos": SyncNoiseProfile.for_median_cfo("nlos", 0.30, 0.03, 0.02),
}


def received_tones(tones: TonePair, clock: ClockState) -> tuple[float, float]:
    """Tone frequencies as seen at the client: both shifted by the CFO."""
    return (tones.f1_hz + clock.delta_f_hz, tones.f2_hz + clock.delta_f_hz)


def derive_reference(f1_hat: float, f2_hat: float) -> float:
    """Reference clock from the received tone difference; the CFO cancels."""
    if f1_hat <= f2_hat:
        raise ValueError("received tones must satisfy f1_hat > f2_hat")
    return f1_hat - f2_hat


def pll_cleanup(phase_series: Sequence[float], fs_hz: float, loop_bandwidth_hz: float) -> np.ndarray:
    """First-order phase low-pass: tracks slow drift, suppresses jitter.

    One-pole IIR y[n] = (1-a) y[n-1] + a x[n] with a = 1 - exp(-2 pi bw / fs),
    initialized at the first sample so a constant input passes unchanged.
    For white input the output variance is a / (2 - a) times the input's.
    """
    x = np.asarray(phase_series, dtype=float)
    if x.size == 0:
        raise ValueError("empty phase series")
    if not fs_hz > 2.0 * loop_bandwidth_hz:
        raise ValueError("need fs > 2 * loop_bandwidth")
    a = 1.0 - math.exp(-2.0 * math.pi * loop_bandwidth_hz / fs_hz)
    y = np.empty_like(x)
    y[0] = x[0]
    for n in range(1, x.size):
        y[n] = (1.0 - a) * y[n - 1] + a * x[n]
    return y


def phase_offset_correct(clock: ClockState, estimated_offset_rad: float) -> ClockState:
    """Apply a one-shot phase correction; re-correcting is rejected."""
    if clock.corrected:
        raise ValueError(f"board {clock.board_id} already phase-corrected")
    return replace(
        clock,
        phase_offset_rad=clock.phase_offset_rad - estimated_offset_rad,
        corrected=True,
    )


def estimate_offset_round_trip(
    true_offset_rad: float,
    profile: SyncNoiseProfile,
    rng: np.random.Generator,
) -> float:
    """Two-way offset estimate: half the measured round-trip phase.

    The echoed clock accumulates the one-way offset twice; the server's
    round-trip phase measurement is continuous (unwrapped), perturbed by the
    profile's phase-measurement noise.
    """
    round_trip = 2.0 * true_offset_rad + profile.phase_error_std_rad * rng.standard_normal()
    return round_trip / 2.0


def propagation_phase_offset(distance_m: float, reference_hz: float) -> float:
    """Phase accumulated by the reference clock over a propagation path."""
    return 2.0 * math.pi * reference_hz * distance_m / C_M_PER_S


def sample_clocks(
    n_boards: int,
    profile: SyncNoiseProfile,
    seed: int = 0,
    cfo_range_hz: tuple[float, float] = (-500.0, 500.0),
    distance_range_m: tuple[float, float] = (1.0, 6.0),
    reference_hz: float = 243e6,
) -> list[ClockState]:
    """Draw uncorrected client clock states: random CFO and path-induced phase."""
    rng = np.random.default_rng(np.random.SeedSequence((seed & 0xFFFFFFFF, 0x5C1C)))
    clocks = []
    for b in range(n_boards):
        delta_f = rng.uniform(*cfo_range_hz)
        dist = rng.uniform(*distance_range_m)
        clocks.append(
            ClockState(
                board_id=b,
                delta_f_hz=delta_f,
                phase_offset_rad=propagation_phase_offset(dist, reference_hz),
                jitter_std_rad=profile.jitter_std_rad,
            )
        )
    return clocks


@dataclass(frozen=True)
class CoherenceStats:
    median_residual_cfo_hz: float
    median_abs_phase_offset_rad: float
    residual_cfo_hz: tuple[float, ...]
    phase_offset_rad: tuple[float, ...]


def coherence_report(
    clocks: Sequence[ClockState],
    tones: TonePair,
    duration_s: float = 1.0,
    profile: SyncNoiseProfile = SYNC_PROFILES["ideal"],
    seed: int = 0,
) -> CoherenceStats:
    """Run the full sync chain per board and report coherence statistics.

    Per board: receive the tones (plus per-tone frequency-estimate errors),
    derive the reference, then estimate and apply the round-trip phase
    correction.  Residual CFO is the derived reference minus the true tone
    difference; the reported medians are |residual CFO| and |phase offset|
    across boards.  ``duration_s`` is the observation span; it does not
    change the error model.
    """
    if len(clocks) < 2:
        raise ValueError("coherence report needs at least 2 boards")
    if duration_s <= 0:
        raise ValueError("duration must be positive")
    rng = np.random.default_rng(np.random.SeedSequence((seed & 0xFFFFFFFF, 0xC0FE)))
    residuals, phases = [], []
    for clock in clocks:
        f1_hat, f2_hat = received_tones(tones, clock)
        e1, e2 = profile.tone_error_std_hz * rng.standard_normal(2)
        ref = derive_reference(f1_hat + e1, f2_hat + e2)
        residuals.append(ref - tones.reference_hz)
        estimate = estimate_offset_round_trip(clock.phase_offset_rad, profile, rng)
        corrected = phase_offset_correct(clock, estimate)
        phases.append(corrected.phase_offset_rad)
    residuals_abs = np.abs(residuals)
    return CoherenceStats(
        median_residual_cfo_hz=float(np.median(residuals_abs)),
        median_abs_phase_offset_rad=float(np.median(np.abs(phases))),
        residual_cfo_hz=tuple(float(r) for r in residuals),
        phase_offset_rad=tuple(float(p) for p in phases),
    )
