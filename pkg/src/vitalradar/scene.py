"""Ground-truth scene model: physiology, kinematics and obstacle geometry.

A :class:`Scene` holds everything the radar front end needs to render
reflections: human subjects (chest displacement model + planar trajectory)
and attenuating obstacles inside a rectangular room.  All quantities are SI
(meters, seconds, radians) except rates, which are per-minute.

Chest motion is synthesized, not recorded: respiration is a sinusoid whose
cycle periods jitter around the nominal period, and the heartbeat is a
raised-cosine pulse train riding on top of it.  Cycle jitter is drawn from a
counter-based RNG keyed by (seed, subject, stream, cycle index), so any time
point can be evaluated independently and in any order with identical results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

__all__ = [
    "ChestModel",
    "Trajectory",
    "Obstacle",
    "Subject",
    "Scene",
    "chest_displacement",
    "respiration_displacement",
    "heartbeat_displacement",
    "realized_rate_bpm",
    "subject_pose",
    "occlusion_loss",
    "segments_cross",
    "TORSO_RADIUS_M",
    "FACET_COUPLINGS",
]

# Torso facet geometry: four point scatterers (front/back/left/right) offset
# from the body center, with the chest displacement coupled fully into the
# front facet, 60% into the back and 30% into the sides.
TORSO_RADIUS_M = 0.15
FACET_COUPLINGS = (1.0, 0.6, 0.3, 0.3)
_FACET_BEARINGS = (0.0, math.pi, 0.5 * math.pi, -0.5 * math.pi)

_STREAM_RESP = 0
_STREAM_HEART = 1

# Cycle periods are clamped so extreme jitter draws can never produce a
# non-positive period.
_MIN_PERIOD_SCALE = 0.2


@dataclass(frozen=True)
class ChestModel:
    """Parametric chest-displacement model for one subject.

    Parameters
    ----------
    resp_rate_bpm : float
        Nominal respiration rate, breaths per minute, in [6, 30].
    resp_amp_m : float
        Respiration displacement amplitude in meters (< 0.02 m).
    resp_variability : float
        Fractional standard deviation of the respiration cycle period.
    heart_rate_bpm : float
        Nominal heart rate, beats per minute, in [40, 180].
    heart_amp_m : float
        Heartbeat displacement amplitude in meters.  Must be smaller than
        ``resp_amp_m``; zero disables the heartbeat component.
    heart_variability : float
        Fractional standard deviation of the beat period.
    resp_phase_rad, heart_phase_rad : float
        Phase offsets of the two components at t = 0.
    """

    resp_rate_bpm: float = 15.0
    resp_amp_m: float = 0.005
    resp_variability: float = 0.0
    heart_rate_bpm: float = 72.0
    heart_amp_m: float = 3.0e-4
    heart_variability: float = 0.0
    resp_phase_rad: float = 0.0
    heart_phase_rad: float = 0.0

    def __post_init__(self) -> None:
        if not 6.0 <= self.resp_rate_bpm <= 30.0:
            raise ValueError(f"resp_rate_bpm {self.resp_rate_bpm} outside [6, 30]")
        if not 40.0 <= self.heart_rate_bpm <= 180.0:
            raise ValueError(f"heart_rate_bpm {self.heart_rate_bpm} outside [40, 180]")
        if not 0.0 < self.resp_amp_m < 0.02:
            raise ValueError("resp_amp_m must be in (0, 0.02) m")
        # heart_amp_m == 0 is allowed so the heartbeat can be switched off.
        if not 0.0 <= self.heart_amp_m < self.resp_amp_m:
            raise ValueError("heart_amp_m must satisfy 0 <= heart_amp_m < resp_amp_m")
        if self.heart_amp_m >= 0.02:
            raise ValueError("heart_amp_m must be below 0.02 m")
        if self.resp_variability < 0 or self.heart_variability < 0:
            raise ValueError("variability must be non-negative")


@dataclass(frozen=True)
class Trajectory:
    """Piecewise-linear planar trajectory.

    ``waypoints`` is a sequence of (time_s, x_m, y_m, facing_rad) with
    strictly increasing times.  Positions interpolate linearly; the facing
    angle interpolates along the shortest arc.  Times outside the waypoint
    span clamp to the endpoints.
    """

    waypoints: tuple[tuple[float, float, float, float], ...]

    def __post_init__(self) -> None:
        wps = tuple(tuple(float(v) for v in w) for w in self.waypoints)
        if len(wps) == 0:
            raise ValueError("trajectory needs at least one waypoint")
        if any(len(w) != 4 for w in wps):
            raise ValueError("each waypoint must be (time, x, y, facing)")
        times = [w[0] for w in wps]
        if any(t1 <= t0 for t0, t1 in zip(times, times[1:])):
            raise ValueError("waypoint times must be strictly increasing")
        object.__setattr__(self, "waypoints", wps)

    @staticmethod
    def static(x_m: float, y_m: float, facing_rad: float, duration_s: float) -> "Trajectory":
        """Stationary subject standing at one spot for ``duration_s``."""
        if duration_s <= 0:
            raise ValueError("duration_s must be positive")
        return Trajectory(((0.0, x_m, y_m, facing_rad), (duration_s, x_m, y_m, facing_rad)))

    @property
    def duration_s(self) -> float:
        return self.waypoints[-1][0] - self.waypoints[0][0]


@dataclass(frozen=True)
class Obstacle:
    """Attenuating panel, a straight wall segment between two points.

    ``attenuation_db`` applies once per one-way traversal of the segment.
    """

    x1_m: float
    y1_m: float
    x2_m: float
    y2_m: float
    attenuation_db: float

    def __post_init__(self) -> None:
        if self.attenuation_db < 0:
            raise ValueError("attenuation_db must be >= 0")

    @property
    def p1(self) -> tuple[float, float]:
        return (self.x1_m, self.y1_m)

    @property
    def p2(self) -> tuple[float, float]:
        return (self.x2_m, self.y2_m)


@dataclass(frozen=True)
class Subject:
    """One monitored person: chest model plus trajectory.

    scatter
        "facets" models the torso as four orientation-dependent point
        scatterers; "point" collapses it to a single isotropic scatterer with
        full displacement coupling (useful for calibration benchmarks).
    """

    chest: ChestModel
    trajectory: Trajectory
    scatter: str = "facets"
    reflectivity: float = 1.0

    def __post_init__(self) -> None:
        if self.scatter not in ("facets", "point"):
            raise ValueError(f"unknown scatter mode {self.scatter!r}")
        if self.reflectivity <= 0:
            raise ValueError("reflectivity must be positive")


@dataclass(frozen=True)
class Scene:
    """Room with subjects and obstacles.

    room_m
        (width, height); the room spans [0, width] x [0, height].
    """

    room_m: tuple[float, float]
    subjects: tuple[Subject, ...]
    obstacles: tuple[Obstacle, ...] = ()
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "room_m", (float(self.room_m[0]), float(self.room_m[1])))
        object.__setattr__(self, "subjects", tuple(self.subjects))
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        w, h = self.room_m
        if w <= 0 or h <= 0:
            raise ValueError("room dimensions must be positive")
        if len(self.subjects) == 0:
            raise ValueError("scene needs at least one subject")
        for i, subj in enumerate(self.subjects):
            if subj.trajectory.duration_s <= 0:
                raise ValueError(f"subject {i}: zero-duration trajectory")
            for t, x, y, _ in subj.trajectory.waypoints:
                if not (0.0 <= x <= w and 0.0 <= y <= h):
                    raise ValueError(
                        f"subject {i}: waypoint at t={t} lies outside the room"
                    )


# ---------------------------------------------------------------------------
# Chest displacement
# ---------------------------------------------------------------------------

def _counter_normal(seed: int, subject_id: int, stream: int, index: int) -> float:
    """One standard-normal draw keyed by its full address, order independent."""
    ss = np.random.SeedSequence((int(seed) & 0xFFFFFFFF, subject_id, stream, index))
    return float(np.random.Generator(np.random.PCG64(ss)).standard_normal())


@lru_cache(maxsize=512)
def _cycle_periods(
    nominal_period_s: float,
    variability: float,
    seed: int,
    subject_id: int,
    stream: int,
    count: int,
) -> np.ndarray:
    """Jittered cycle periods P_k = P0 * max(0.2, 1 + v * z_k), cached."""
    if variability == 0.0:
        periods = np.full(count, nominal_period_s)
    else:
        z = np.array([_counter_normal(seed, subject_id, stream, k) for k in range(count)])
        periods = nominal_period_s * np.maximum(_MIN_PERIOD_SCALE, 1.0 + variability * z)
    periods.flags.writeable = False  # cached; callers must not mutate
    return periods


def _cumulative_phase(
    t: np.ndarray,
    nominal_period_s: float,
    variability: float,
    seed: int,
    subject_id: int,
    stream: int,
) -> np.ndarray:
    """Cycle phase Phi(t) in cycles: k + fraction elapsed of cycle k."""
    if variability == 0.0:
        return t / nominal_period_s
    t_max = float(np.max(t, initial=0.0))
    count = int(t_max / (nominal_period_s * _MIN_PERIOD_SCALE)) + 2
    periods = _cycle_periods(nominal_period_s, variability, seed, subject_id, stream, count)
    bounds = np.concatenate(([0.0], np.cumsum(periods)))
    k = np.clip(np.searchsorted(bounds, t, side="right") - 1, 0, count - 1)
    return k + (t - bounds[k]) / periods[k]


def respiration_displacement(
    model: ChestModel, t, *, seed: int = 0, subject_id: int = 0
):
    """Respiration chest displacement in meters at time(s) ``t`` (s)."""
    t_arr = np.asarray(t, dtype=float)
    phase = _cumulative_phase(
        t_arr, 60.0 / model.resp_rate_bpm, model.resp_variability, seed, subject_id, _STREAM_RESP
    )
    out = model.resp_amp_m * np.sin(2.0 * np.pi * phase + model.resp_phase_rad)
    return out if out.ndim else float(out)


# Fraction of the beat period occupied by the raised-cosine pulse.
_HEART_PULSE_WIDTH = 0.35


def heartbeat_displacement(
    model: ChestModel, t, *, seed: int = 0, subject_id: int = 0
):
    """Heartbeat chest displacement in meters: a raised-cosine pulse train."""
    t_arr = np.asarray(t, dtype=float)
    if model.heart_amp_m == 0.0:
        out = np.zeros_like(t_arr)
        return out if out.ndim else 0.0
    phase = _cumulative_phase(
        t_arr, 60.0 / model.heart_rate_bpm, model.heart_variability, seed, subject_id, _STREAM_HEART
    )
    # Pulse centered at integer cycle phase, width _HEART_PULSE_WIDTH cycles.
    u = phase + model.heart_phase_rad / (2.0 * np.pi)
    frac = u - np.round(u)
    inside = np.abs(frac) <= _HEART_PULSE_WIDTH / 2.0
    pulse = np.where(
        inside, 0.5 * (1.0 + np.cos(2.0 * np.pi * frac / _HEART_PULSE_WIDTH)), 0.0
    )
    out = model.heart_amp_m * pulse
    return out if out.ndim else float(out)


def chest_displacement(model: ChestModel, t, *, seed: int = 0, subject_id: int = 0):
    """Total chest displacement: respiration plus heartbeat components."""
    r = respiration_displacement(model, t, seed=seed, subject_id=subject_id)
    h = heartbeat_displacement(model, t, seed=seed, subject_id=subject_id)
    return r + h


def realized_rate_bpm(
    model: ChestModel,
    duration_s: float,
    *,
    seed: int = 0,
    subject_id: int = 0,
    which: str = "resp",
) -> float:
    """Mean rate actually realized over [0, duration] given the cycle jitter.

    Computed from the generated cycle periods that complete within the
    record; equals the nominal rate when variability is zero.
    """
    if which == "resp":
        nominal, var, stream = 60.0 / model.resp_rate_bpm, model.resp_variability, _STREAM_RESP
    elif which == "heart":
        nominal, var, stream = 60.0 / model.heart_rate_bpm, model.heart_variability, _STREAM_HEART
    else:
        raise ValueError("which must be 'resp' or 'heart'")
    if var == 0.0:
        return 60.0 / nominal
    count = int(duration_s / (nominal * _MIN_PERIOD_SCALE)) + 2
    periods = _cycle_periods(nominal, var, seed, subject_id, stream, count)
    bounds = np.cumsum(periods)
    complete = periods[bounds <= duration_s]
    if complete.size == 0:
        return 60.0 / nominal
    return 60.0 * complete.size / float(np.sum(complete))


# ---------------------------------------------------------------------------
# Kinematics
# ---------------------------------------------------------------------------

def subject_pose(traj: Trajectory, t):
    """Pose (x_m, y_m, facing_rad) at time(s) ``t``, clamped to the endpoints."""
    wps = np.asarray(traj.waypoints, dtype=float)
    times, xs, ys = wps[:, 0], wps[:, 1], wps[:, 2]
    angles = np.unwrap(wps[:, 3])
    t_arr = np.asarray(t, dtype=float)
    tc = np.clip(t_arr, times[0], times[-1])
    x = np.interp(tc, times, xs)
    y = np.interp(tc, times, ys)
    a = np.mod(np.interp(tc, times, angles) + np.pi, 2.0 * np.pi) - np.pi
    if t_arr.ndim:
        return x, y, a
    return float(x), float(y), float(a)


def facet_scatterers(subject: Subject, t: float, *, seed: int = 0, subject_id: int = 0):
    """Scatterer positions, normals, couplings and displacement at time ``t``.

    Returns (positions (F, 2), normals (F, 2), couplings (F,), displacement_m).
    A "point" subject has a single scatterer at the body center with unit
    coupling and an all-directions normal (treated as unity gain).
    """
    x, y, facing = subject_pose(subject.trajectory, t)
    disp = chest_displacement(subject.chest, t, seed=seed, subject_id=subject_id)
    if subject.scatter == "point":
        return (
            np.array([[x, y]]),
            np.zeros((1, 2)),
            np.array([1.0]),
            disp,
        )
    bearings = np.array(_FACET_BEARINGS) + facing
    normals = np.column_stack([np.cos(bearings), np.sin(bearings)])
    positions = np.array([x, y]) + TORSO_RADIUS_M * normals
    return positions, normals, np.array(FACET_COUPLINGS), disp


# ---------------------------------------------------------------------------
# Occlusion
# ---------------------------------------------------------------------------

def _cross(ox: float, oy: float, ax: float, ay: float, bx: float, by: float) -> float:
    return (ax - ox) * (by - oy) - (ay - oy) * (bx - ox)


def segments_cross(p1, p2, q1, q2) -> bool:
    """True when segments p1-p2 and q1-q2 properly intersect.

    Grazing contacts (an endpoint lying on the other segment, or collinear
    overlap) count as non-blocking.
    """
    d1 = _cross(q1[0], q1[1], q2[0], q2[1], p1[0], p1[1])
    d2 = _cross(q1[0], q1[1], q2[0], q2[1], p2[0], p2[1])
    d3 = _cross(p1[0], p1[1], p2[0], p2[1], q1[0], q1[1])
    d4 = _cross(p1[0], p1[1], p2[0], p2[1], q2[0], q2[1])
    return (d1 * d2 < 0.0) and (d3 * d4 < 0.0)


def occlusion_loss(scene: Scene, a, b) -> float:
    """Total one-way attenuation in dB along the straight path a-b."""
    ax, ay = float(a[0]), float(a[1])
    bx, by = float(b[0]), float(b[1])
    if ax == bx and ay == by:
        raise ValueError("occlusion path endpoints must differ")
    loss = 0.0
    for obs in scene.obstacles:
        if segments_cross((ax, ay), (bx, by), obs.p1, obs.p2):
            loss += obs.attenuation_db
    return loss
