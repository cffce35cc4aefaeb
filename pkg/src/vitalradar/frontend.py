"""Radar front end: per-element channel-impulse-response frame synthesis.

Each board carries E colocated Tx/Rx antenna pairs.  Operating them as a
MIMO set yields E*E virtual elements per board (every Tx/Rx combination),
and one frame row per virtual element.  A frame is a complex matrix
[virtual elements x 186 range bins]: reflection amplitude and phase per bin.

Rendering model, per virtual pair and per scatterer:

* round-trip path d_tx + d_rx + 2 * displacement * facet_coupling,
* a Gaussian pulse of width ``pulse_sigma_bins`` centered at the path's bin,
* amplitude tx_gain * reflectivity / (d_tx * d_rx), attenuated by
  10^(-occlusion/20) per one-way traversal of each obstacle,
* phase -2*pi*carrier*tau plus the board's clock phase error,
* additive complex white noise per bin.

Targets beyond the unambiguous range (186 * bin_spacing_m) simply deposit
no energy in the frame; that is not an error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.constants import speed_of_light as C_M_PER_S

from .scene import Scene, facet_scatterers, occlusion_loss
from .sync import ClockState

__all__ = [
    "SubArray",
    "ArrayLayout",
    "RadarParams",
    "CirFrame",
    "FrameRecord",
    "LAYOUT_NAMES",
    "make_layout",
    "ideal_clocks",
    "synthesize_frame",
    "synthesize_record",
    "snr_estimate",
    "aoa_estimate",
    "as_record",
]

N_BINS = 186
LAYOUT_NAMES = ("one16x16", "two8x8", "four4x4", "sixteen1x1")

# dB value reported for a noise-free target (infinite SNR sentinel).
SNR_CAP_DB = 120.0


@dataclass
class SubArray:
    """One radar board: E physical colocated Tx/Rx pairs on a line."""

    board_id: int
    element_positions_m: np.ndarray  # (E, 2)
    boresight: np.ndarray  # unit vector (2,)

    def __post_init__(self) -> None:
        self.element_positions_m = np.atleast_2d(np.asarray(self.element_positions_m, float))
        self.boresight = np.asarray(self.boresight, float)
        norm = float(np.hypot(*self.boresight))
        if norm == 0:
            raise ValueError("boresight must be a nonzero vector")
        self.boresight = self.boresight / norm
        if self.element_positions_m.shape[0] >= 2:
            diffs = np.diff(self.element_positions_m, axis=0)
            if np.any(np.hypot(diffs[:, 0], diffs[:, 1]) <= 0):
                raise ValueError("element spacing must be positive")

    @property
    def n_physical(self) -> int:
        return self.element_positions_m.shape[0]

    @property
    def n_virtual(self) -> int:
        return self.n_physical ** 2


@dataclass
class ArrayLayout:
    """Collection of sub-arrays; defines the frame's virtual-element rows.

    Rows are ordered board by board; within a board, row i*E + j is the
    virtual pair (Tx element i, Rx element j).
    """

    name: str
    sub_arrays: list[SubArray]

    @property
    def n_boards(self) -> int:
        return len(self.sub_arrays)

    @property
    def total_virtual(self) -> int:
        return sum(sa.n_virtual for sa in self.sub_arrays)

    def board_slices(self) -> list[slice]:
        """Frame-row slice covered by each board, in board order."""
        slices, start = [], 0
        for sa in self.sub_arrays:
            slices.append(slice(start, start + sa.n_virtual))
            start += sa.n_virtual
        return slices


def _corner_positions(room: tuple[float, float], inset: float) -> list[np.ndarray]:
    w, h = room
    return [
        np.array([inset, inset]),
        np.array([w - inset, inset]),
        np.array([w - inset, h - inset]),
        np.array([inset, h - inset]),
    ]


def _line_elements(center: np.ndarray, boresight: np.ndarray, n: int, spacing: float) -> np.ndarray:
    """n element positions on a line through ``center`` perpendicular to boresight."""
    perp = np.array([-boresight[1], boresight[0]])
    offsets = (np.arange(n) - (n - 1) / 2.0) * spacing
    return center[None, :] + offsets[:, None] * perp[None, :]


def make_layout(
    name: str,
    room_m: tuple[float, float] = (4.0, 5.5),
    carrier_hz: float = 7.28e9,
    inset_m: float = 0.15,
) -> ArrayLayout:
    """Build one of the named deployments inside a rectangular room.

    one16x16   one board with 16 pairs (256 virtual elements) at corner 1.
    two8x8     two 8-pair boards at adjacent corners, 90 degrees apart.
    four4x4    four 4-pair boards, one per corner (the default deployment).
    sixteen1x1 sixteen single-pair boards spread along the walls.

    Boards aim at the room center; element lines sit perpendicular to the
    boresight with half-wavelength spacing.
    """
    lam = C_M_PER_S / carrier_hz
    spacing = lam / 2.0
    w, h = room_m
    center = np.array([w / 2.0, h / 2.0])
    corners = _corner_positions(room_m, inset_m)

    def board(bid: int, pos: np.ndarray, n: int, aim: np.ndarray | None = None) -> SubArray:
        bs = (aim if aim is not None else center) - pos
        return SubArray(bid, _line_elements(pos, bs / np.linalg.norm(bs), n, spacing), bs)

    if name == "one16x16":
        subs = [board(0, corners[0], 16)]
    elif name == "two8x8":
        subs = [board(i, corners[i], 8) for i in range(2)]
    elif name == "four4x4":
        subs = [board(i, corners[i], 4) for i in range(4)]
    elif name == "sixteen1x1":
        # Four single-pair boards per wall, aimed inward.
        subs = []
        bid = 0
        for wall in range(4):
            for k in range(4):
                frac = (k + 1) / 5.0
                if wall == 0:
                    pos, aim = np.array([w * frac, inset_m]), np.array([w * frac, h / 2])
                elif wall == 1:
                    pos, aim = np.array([w - inset_m, h * frac]), np.array([w / 2, h * frac])
                elif wall == 2:
                    pos, aim = np.array([w * frac, h - inset_m]), np.array([w * frac, h / 2])
                else:
                    pos, aim = np.array([inset_m, h * frac]), np.array([w / 2, h * frac])
                subs.append(board(bid, pos, 1, aim))
                bid += 1
    else:
        raise ValueError(f"unknown layout {name!r}; expected one of {LAYOUT_NAMES}")
    return ArrayLayout(name, subs)


@dataclass(frozen=True)
class RadarParams:
    """Operating parameters of the UWB impulse radar chain."""

    carrier_hz: float = 7.28e9
    bin_spacing_m: float = 0.052
    n_bins: int = N_BINS
    fps: float = 50.0
    pulse_sigma_bins: float = 1.2
    noise_std: float = 1.6
    tx_gain: float = 1.0

    def __post_init__(self) -> None:
        if self.n_bins != N_BINS:
            raise ValueError(f"n_bins is fixed at {N_BINS}")
        if not 50.0 <= self.fps <= 200.0:
            raise ValueError("fps must lie in [50, 200]")
        if self.bin_spacing_m <= 0 or self.pulse_sigma_bins <= 0:
            raise ValueError("bin_spacing_m and pulse_sigma_bins must be positive")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")

    @property
    def wavelength_m(self) -> float:
        return C_M_PER_S / self.carrier_hz

    @property
    def max_range_m(self) -> float:
        return self.n_bins * self.bin_spacing_m


@dataclass
class CirFrame:
    """One timestamped CIR snapshot: [virtual elements x n_bins] complex."""

    t: float
    bins: np.ndarray

    def __post_init__(self) -> None:
        self.bins = np.asarray(self.bins)
        if self.bins.ndim != 2 or self.bins.shape[1] != N_BINS:
            raise ValueError(f"frame must be [elements x {N_BINS}]")
        if not np.all(np.isfinite(self.bins)):
            raise ValueError("frame contains non-finite entries")


@dataclass
class FrameRecord:
    """Stack of frames sharing one layout: times (T,), bins (T, M, n_bins)."""

    times: np.ndarray
    bins: np.ndarray
    fps: float

    def __len__(self) -> int:
        return self.bins.shape[0]

    @property
    def n_elements(self) -> int:
        return self.bins.shape[1]

    def frame(self, i: int) -> CirFrame:
        return CirFrame(float(self.times[i]), self.bins[i])

    def __iter__(self):
        return (self.frame(i) for i in range(len(self)))


def as_record(frames, fps: float | None = None) -> FrameRecord:
    """Normalize a FrameRecord or an iterable of CirFrame to a FrameRecord."""
    if isinstance(frames, FrameRecord):
        return frames
    frames = list(frames)
    if not frames:
        raise ValueError("empty frame sequence")
    times = np.array([f.t for f in frames])
    bins = np.stack([f.bins for f in frames])
    if fps is None:
        fps = 1.0 / float(np.median(np.diff(times))) if len(frames) > 1 else 50.0
    return FrameRecord(times, bins, fps)


def ideal_clocks(layout: ArrayLayout) -> list[ClockState]:
    """Perfectly synchronized clocks, one per board."""
    return [
        ClockState(board_id=sa.board_id, delta_f_hz=0.0, phase_offset_rad=0.0, jitter_std_rad=0.0)
        for sa in layout.sub_arrays
    ]


# ---------------------------------------------------------------------------
# Frame synthesis
# ---------------------------------------------------------------------------

def _t_key(t: float) -> int:
    """Stable integer key for a timestamp (bit pattern of the float64)."""
    return int(np.float64(t).view(np.uint64))


def _board_phase_error(clock: ClockState, seed: int, t: float) -> float:
    phase = clock.phase_offset_rad
    if clock.jitter_std_rad > 0:
        ss = np.random.SeedSequence((seed & 0xFFFFFFFF, 0x4A17, clock.board_id, _t_key(t)))
        phase += clock.jitter_std_rad * float(
            np.random.Generator(np.random.PCG64(ss)).standard_normal()
        )
    return phase


def _deposit_rows(
    acc: np.ndarray, rows: np.ndarray, centers: np.ndarray, amps: np.ndarray, sigma: float
) -> None:
    """Accumulate Gaussian pulses (complex amplitudes) into acc[rows]."""
    half = int(math.ceil(6.0 * sigma))
    offs = np.arange(-half, half + 1)
    base = np.rint(centers).astype(int)
    idx = base[:, None] + offs[None, :]
    weight = np.exp(-0.5 * ((idx - centers[:, None]) / sigma) ** 2)
    valid = (idx >= 0) & (idx < acc.shape[1])
    row_grid = np.broadcast_to(rows[:, None], idx.shape)
    vals = amps[:, None] * weight
    np.add.at(acc, (row_grid[valid], idx[valid]), vals[valid])


def _signal_matrix(
    scene: Scene,
    layout: ArrayLayout,
    clocks: Sequence[ClockState],
    params: RadarParams,
    t: float,
    seed: int,
) -> np.ndarray:
    """Noise-free frame signal, complex128 [total virtual elements x n_bins]."""
    out = np.zeros((layout.total_virtual, params.n_bins), dtype=np.complex128)
    two_pi_fc = 2.0 * np.pi * params.carrier_hz
    max_center = params.n_bins - 1 + 6.0 * params.pulse_sigma_bins

    for sl, sa, clock in zip(layout.board_slices(), layout.sub_arrays, clocks):
        phase_err = _board_phase_error(clock, seed, t)
        pos = sa.element_positions_m  # (E, 2)
        board = np.zeros((sa.n_virtual, params.n_bins), dtype=np.complex128)
        for s_idx, subj in enumerate(scene.subjects):
            fpos, fnorm, coup, disp = facet_scatterers(subj, t, seed=scene.seed, subject_id=s_idx)
            for f in range(fpos.shape[0]):
                dvec = pos - fpos[f]  # (E, 2)
                dist = np.hypot(dvec[:, 0], dvec[:, 1])
                if subj.scatter == "point":
                    gain = np.ones_like(dist)
                else:
                    gain = np.maximum(0.0, (dvec @ fnorm[f]) / dist)
                if not np.any(gain > 0):
                    continue
                occl = np.array(
                    [occlusion_loss(scene, p, fpos[f]) if g > 0 else 0.0
                     for p, g in zip(pos, gain)]
                )
                att = 10.0 ** (-occl / 20.0)
                per_elem = gain * att / dist  # one-way amplitude factor per antenna
                # Virtual pair (i, j): path d_i + d_j + 2*disp*coupling.
                path = dist[:, None] + dist[None, :] + 2.0 * disp * coup[f]
                amp = params.tx_gain * subj.reflectivity * np.outer(per_elem, per_elem)
                centers = path / (2.0 * params.bin_spacing_m)
                phases = -two_pi_fc * path / C_M_PER_S + phase_err
                keep = centers.ravel() <= max_center
                if not np.any(keep):
                    continue
                rows_keep = np.nonzero(keep)[0]
                _deposit_rows(
                    board,
                    rows_keep,
                    centers.ravel()[keep],
                    (amp * np.exp(1j * phases)).ravel()[keep],
                    params.pulse_sigma_bins,
                )
        out[sl] = board
    return out


def _frame_noise(params: RadarParams, n_rows: int, t: float, seed: int) -> np.ndarray:
    if params.noise_std == 0:
        return np.zeros((n_rows, params.n_bins), dtype=np.complex128)
    ss = np.random.SeedSequence((seed & 0xFFFFFFFF, 0xA03E, _t_key(t)))
    g = np.random.Generator(np.random.PCG64(ss))
    scale = params.noise_std / math.sqrt(2.0)
    re_im = g.standard_normal((2, n_rows, params.n_bins))
    return scale * (re_im[0] + 1j * re_im[1])


def synthesize_frame(
    scene: Scene,
    layout: ArrayLayout,
    clocks: Sequence[ClockState],
    params: RadarParams,
    t: float,
    seed: int | None = None,
) -> CirFrame:
    """Render one CIR frame at time ``t``.

    Pure function of its arguments: frames for distinct times can be
    produced concurrently and in any order with bit-identical results.
    """
    if len(clocks) != layout.n_boards:
        raise ValueError(
            f"got {len(clocks)} clocks for {layout.n_boards} boards"
        )
    s = scene.seed if seed is None else seed
    sig = _signal_matrix(scene, layout, clocks, params, t, s)
    sig += _frame_noise(params, layout.total_virtual, t, s)
    return CirFrame(t, sig.astype(np.complex64))


def synthesize_record(
    scene: Scene,
    layout: ArrayLayout,
    clocks: Sequence[ClockState],
    params: RadarParams,
    duration_s: float,
    seed: int | None = None,
) -> FrameRecord:
    """Render duration_s * fps frames starting at t = 0."""
    n = int(round(duration_s * params.fps))
    if n <= 0:
        raise ValueError("duration too short for one frame")
    times = np.arange(n) / params.fps
    rows = layout.total_virtual
    bins = np.empty((n, rows, params.n_bins), dtype=np.complex64)
    for i, t in enumerate(times):
        bins[i] = synthesize_frame(scene, layout, clocks, params, float(t), seed).bins
    return FrameRecord(times, bins, params.fps)


# ---------------------------------------------------------------------------
# Micro-benchmarks
# ---------------------------------------------------------------------------

def snr_estimate(
    frames,
    target_bin: int,
    guard: int,
    layout: ArrayLayout | None = None,
) -> float:
    """SNR in dB at ``target_bin``: coherent within each sub-array.

    Element series are phase-aligned on the target bin (per-element mean
    phasor) and summed coherently inside each sub-array; sub-array powers
    add.  The noise floor is the median time-averaged per-element bin power
    outside the +-guard band, so doubling the coherent element count raises
    the estimate by 20*log10(2) = 6 dB.  A noise-free target saturates to
    the +120 dB sentinel.
    """
    rec = as_record(frames)
    if len(rec) < 16:
        raise ValueError("need at least 16 frames")
    if not 0 <= target_bin < rec.bins.shape[2]:
        raise ValueError(f"target_bin {target_bin} out of range")
    x = rec.bins.astype(np.complex128)
    slices = layout.board_slices() if layout is not None else [slice(0, rec.n_elements)]

    signal_power = 0.0
    for sl in slices:
        col = x[:, sl, target_bin]  # (T, E)
        mean_ph = col.mean(axis=0)
        mags = np.abs(mean_ph)
        align = np.where(mags > 0, np.conj(mean_ph) / np.where(mags > 0, mags, 1.0), 1.0)
        summed = (col * align[None, :]).sum(axis=1)
        signal_power += float(np.mean(np.abs(summed) ** 2))

    mask = np.ones(rec.bins.shape[2], dtype=bool)
    lo, hi = max(0, target_bin - guard), min(rec.bins.shape[2], target_bin + guard + 1)
    mask[lo:hi] = False
    floor = float(np.median(np.mean(np.abs(x[:, :, mask]) ** 2, axis=0)))
    if floor <= 0 or signal_power / floor > 10 ** (SNR_CAP_DB / 10.0):
        return SNR_CAP_DB
    return 10.0 * math.log10(signal_power / floor)


def aoa_estimate(
    frame: CirFrame,
    sub_array: SubArray,
    params: RadarParams,
    scan_deg: float = 60.0,
    step_deg: float = 0.25,
) -> float:
    """Angle of arrival in degrees from boresight via delay-and-sum scan.

    Scans +-scan_deg in step_deg steps at the strongest range bin of the
    sub-array's virtual rows and returns the argmax beam angle.  A linear
    array cannot tell front from back; the scan range covers the frontal
    sector only.
    """
    if sub_array.n_physical < 2:
        raise ValueError("AoA needs at least 2 elements")
    bins = np.asarray(frame.bins, dtype=np.complex128)
    if not np.any(bins):
        raise ValueError("all-zero frame")
    E = sub_array.n_physical
    rows = bins[: E * E]
    power = np.abs(rows) ** 2
    best_bin = int(np.argmax(power.sum(axis=0)))
    snap = rows[:, best_bin]

    pos = sub_array.element_positions_m
    centroid = pos.mean(axis=0)
    rel = pos - centroid
    bs = sub_array.boresight
    perp = np.array([-bs[1], bs[0]])
    u = rel @ perp  # signed abscissa along the array line, (E,)
    # Virtual pair (i, j) sits at the midpoint abscissa.
    v_abscissa = (u[:, None] + u[None, :]).ravel() / 2.0

    angles = np.deg2rad(np.arange(-scan_deg, scan_deg + step_deg / 2, step_deg))
    lam = params.wavelength_m
    # Round-trip steering: phase advance 4*pi/lambda per meter of projected offset.
    steering = np.exp(-1j * (4.0 * np.pi / lam) * np.outer(np.sin(angles), v_abscissa))
    beam = np.abs(steering @ snap) ** 2
    return float(np.rad2deg(angles[int(np.argmax(beam))]))
