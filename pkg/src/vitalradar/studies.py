"""Scripted experiment suite: simulation, evaluation, and the named studies.

Every study is deterministic per seed: scenes are fixed, clocks and frame
noise derive from the seed, and result rows are sorted before writing, so a
study rerun with the same seeds reproduces its CSV byte for byte.

Available studies: config_sweep, nlos, mobility, attention_block,
multi_subject, generalization, sync_bench, heart_distance.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .frontend import (
    ArrayLayout,
    FrameRecord,
    RadarParams,
    make_layout,
    synthesize_record,
)
from .scene import (
    ChestModel,
    Obstacle,
    Scene,
    Subject,
    Trajectory,
    chest_displacement,
    heartbeat_displacement,
    realized_rate_bpm,
)
from .sync import (
    SYNC_PROFILES,
    SyncNoiseProfile,
    TonePair,
    coherence_report,
    estimate_offset_round_trip,
    phase_offset_correct,
    sample_clocks,
)
from .training import TrainConfig, extract_components, train, attention_weights
from .vitals import (
    HEART_BAND_BPM,
    RESP_BAND_BPM,
    NoRateError,
    aligned_cosine,
    best_assignment,
    estimate_rate,
)

__all__ = [
    "STUDY_NAMES",
    "UnknownStudyError",
    "simulate",
    "ground_truth",
    "run_study",
    "synced_clocks",
    "default_room_scene",
]

ROOM_M = (4.0, 5.5)
STUDY_NAMES = (
    "config_sweep",
    "nlos",
    "mobility",
    "attention_block",
    "multi_subject",
    "generalization",
    "sync_bench",
    "heart_distance",
)
# Lag tolerance when scoring recovered waveforms against ground truth.
EVAL_MAX_LAG_S = 2.0


class UnknownStudyError(ValueError):
    def __init__(self, name: str):
        super().__init__(f"unknown study {name!r}; available: {', '.join(STUDY_NAMES)}")


# ---------------------------------------------------------------------------
# Scene helpers
# ---------------------------------------------------------------------------

def _board_anchor(room: tuple[float, float], corner: int, inset: float = 0.15) -> np.ndarray:
    w, h = room
    corners = [
        np.array([inset, inset]),
        np.array([w - inset, inset]),
        np.array([w - inset, h - inset]),
        np.array([inset, h - inset]),
    ]
    return corners[corner]


def _spot_near_corner(room: tuple[float, float], corner: int, distance_m: float):
    """Position ``distance_m`` from a corner along its boresight, plus facing
    angle looking back at the corner."""
    anchor = _board_anchor(room, corner)
    center = np.array([room[0] / 2.0, room[1] / 2.0])
    direction = (center - anchor) / np.linalg.norm(center - anchor)
    pos = anchor + distance_m * direction
    facing = math.atan2(*(anchor - pos)[::-1])
    return float(pos[0]), float(pos[1]), facing


def _blocking_panel(
    room: tuple[float, float],
    corner: int,
    target_xy: tuple[float, float],
    attenuation_db: float,
    offset_m: float = 0.6,
    half_width_m: float = 0.45,
) -> Obstacle:
    """Panel perpendicular to the corner-to-target path, near the corner."""
    anchor = _board_anchor(room, corner)
    target = np.asarray(target_xy)
    direction = (target - anchor) / np.linalg.norm(target - anchor)
    center = anchor + offset_m * direction
    perp = np.array([-direction[1], direction[0]])
    p1 = center + half_width_m * perp
    p2 = center - half_width_m * perp
    return Obstacle(float(p1[0]), float(p1[1]), float(p2[0]), float(p2[1]), attenuation_db)


def default_room_scene(
    distance_m: float = 1.0,
    corner: int = 0,
    resp_rate_bpm: float = 15.0,
    heart_rate_bpm: float = 72.0,
    resp_variability: float = 0.03,
    seed: int = 0,
    duration_s: float = 60.0,
    obstacles: tuple[Obstacle, ...] = (),
    room: tuple[float, float] = ROOM_M,
) -> Scene:
    """Single static subject at a given distance from one corner board."""
    x, y, facing = _spot_near_corner(room, corner, distance_m)
    chest = ChestModel(
        resp_rate_bpm=resp_rate_bpm,
        resp_variability=resp_variability,
        heart_rate_bpm=heart_rate_bpm,
    )
    subject = Subject(chest=chest, trajectory=Trajectory.static(x, y, facing, duration_s))
    return Scene(room_m=room, subjects=(subject,), obstacles=obstacles, seed=seed)


# ---------------------------------------------------------------------------
# Simulation with ground truth
# ---------------------------------------------------------------------------

def synced_clocks(layout: ArrayLayout, profile: SyncNoiseProfile, seed: int):
    """Client clocks after the sync chain: residual phase plus jitter."""
    raw = sample_clocks(layout.n_boards, profile, seed=seed)
    rng = np.random.default_rng(np.random.SeedSequence((seed & 0xFFFFFFFF, 0x0FF5)))
    corrected = []
    for clock in raw:
        estimate = estimate_offset_round_trip(clock.phase_offset_rad, profile, rng)
        corrected.append(phase_offset_correct(clock, estimate))
    return corrected


def ground_truth(scene: Scene, duration_s: float, fps: float) -> dict:
    """Ground-truth sidecar: per-subject displacement series and rates."""
    n = int(round(duration_s * fps))
    t = np.arange(n) / fps
    subjects = []
    for i, subj in enumerate(scene.subjects):
        resp = chest_displacement(
            replace(subj.chest, heart_amp_m=0.0), t, seed=scene.seed, subject_id=i
        )
        heart = heartbeat_displacement(subj.chest, t, seed=scene.seed, subject_id=i)
        subjects.append(
            {
                "resp_rate_bpm_nominal": subj.chest.resp_rate_bpm,
                "heart_rate_bpm_nominal": subj.chest.heart_rate_bpm,
                "resp_rate_bpm": realized_rate_bpm(
                    subj.chest, duration_s, seed=scene.seed, subject_id=i, which="resp"
                ),
                "heart_rate_bpm": realized_rate_bpm(
                    subj.chest, duration_s, seed=scene.seed, subject_id=i, which="heart"
                ),
                "displacement_m": (resp + heart).tolist(),
                "respiration_m": np.asarray(resp).tolist(),
                "heartbeat_m": np.asarray(heart).tolist(),
            }
        )
    return {"fps": fps, "duration_s": duration_s, "seed": scene.seed, "subjects": subjects}


def simulate(config: ExperimentConfig, seed: int | None = None):
    """Synthesize one record per the experiment config.

    Returns (record, ground-truth dict).  ``seed`` overrides the scene seed
    (clocks and noise follow it), defaulting to the first config seed.
    """
    run_seed = config.seeds[0] if seed is None else seed
    scene = replace(config.scene, seed=run_seed)
    layout = make_layout(config.layout_name, scene.room_m, config.radar.carrier_hz)
    clocks = synced_clocks(layout, SYNC_PROFILES[config.sync_profile], run_seed)
    record = synthesize_record(scene, layout, clocks, config.radar, config.duration_s)
    gt = ground_truth(scene, config.duration_s, config.radar.fps)
    gt["layout"] = config.layout_name
    return record, gt


# ---------------------------------------------------------------------------
# Evaluation helpers
# ---------------------------------------------------------------------------

def _gt_on_component_grid(gt: dict, t_start_s: float, n_steps: int, key: str) -> np.ndarray:
    fps = gt["fps"]
    offset = int(round(t_start_s * fps))
    out = []
    for subj in gt["subjects"]:
        series = np.asarray(subj[key])
        out.append(series[offset : offset + n_steps])
    return np.asarray(out)


def evaluate_record(model, record: FrameRecord, gt: dict, band=RESP_BAND_BPM):
    """Match components to each subject and score waveform + rate recovery.

    Returns one dict per subject: cosine (polarity-aligned, lag-tolerant),
    measured rate, ground-truth rate and absolute/relative errors.
    """
    comps = extract_components(model, record)
    refs = _gt_on_component_grid(gt, comps.t_start_s, comps.series.shape[1], "displacement_m")
    max_lag = int(EVAL_MAX_LAG_S * comps.fs)
    sim = np.array(
        [[aligned_cosine(c, ref, max_lag) for c in comps.series] for ref in refs]
    )
    assignment = best_assignment(sim)
    results = []
    for i, j in enumerate(assignment):
        gt_rate = gt["subjects"][i]["resp_rate_bpm"]
        try:
            rate = estimate_rate(comps.series[j], comps.fs, band)
        except (NoRateError, ValueError):
            rate = float("nan")
        err = abs(rate - gt_rate) if np.isfinite(rate) else float("nan")
        results.append(
            {
                "subject": i,
                "component": int(j),
                "cosine": float(sim[i, j]),
                "rate_bpm": float(rate),
                "gt_bpm": float(gt_rate),
                "abs_err_bpm": float(err),
                "rel_err": float((rate - gt_rate) / gt_rate) if np.isfinite(rate) else float("nan"),
            }
        )
    return results, comps


def run_end_to_end(
    scene: Scene,
    layout_name: str,
    radar: RadarParams,
    train_cfg: TrainConfig,
    duration_s: float,
    seed: int,
    sync_profile: str = "los",
):
    """Simulate, train and evaluate one run; the workhorse of the studies."""
    scene = replace(scene, seed=seed)
    layout = make_layout(layout_name, scene.room_m, radar.carrier_hz)
    clocks = synced_clocks(layout, SYNC_PROFILES[sync_profile], seed)
    record = synthesize_record(scene, layout, clocks, radar, duration_s)
    gt = ground_truth(scene, duration_s, radar.fps)
    model, trace = train(record, layout, replace(train_cfg, seed=seed))
    results, comps = evaluate_record(model, record, gt)
    return {
        "layout": layout,
        "record": record,
        "gt": gt,
        "model": model,
        "trace": trace,
        "results": results,
        "components": comps,
    }


# ---------------------------------------------------------------------------
# Studies
# ---------------------------------------------------------------------------

def _study_config_sweep(seeds, params):
    duration = params.get("duration_s", 60.0)
    radar = RadarParams()
    cfg = TrainConfig(**params.get("train", {}))
    rows = []
    for distance in (1.0, 5.0):
        scene = default_room_scene(distance_m=distance, duration_s=duration)
        for layout_name in ("one16x16", "two8x8", "four4x4", "sixteen1x1"):
            for seed in seeds:
                out = run_end_to_end(scene, layout_name, radar, cfg, duration, seed)
                r = out["results"][0]
                rows.append(
                    {
                        "point": f"{distance:g}m_los",
                        "layout": layout_name,
                        "seed": seed,
                        "cosine": r["cosine"],
                        "rate_bpm": r["rate_bpm"],
                        "gt_bpm": r["gt_bpm"],
                        "abs_err_bpm": r["abs_err_bpm"],
                    }
                )
    summary = _grouped_summary(rows, ("point", "layout"), ("abs_err_bpm", "cosine"))
    return rows, summary


def _study_nlos(seeds, params):
    """Five meters from the reference corner with two paths blocked 20 dB."""
    duration = params.get("duration_s", 60.0)
    blocked_db = params.get("blocked_db", 20.0)
    radar = RadarParams()
    cfg = TrainConfig(**params.get("train", {}))
    base = default_room_scene(distance_m=5.0, duration_s=duration)
    target = base.subjects[0].trajectory.waypoints[0][1:3]
    obstacles = (
        _blocking_panel(ROOM_M, 0, target, blocked_db),
        _blocking_panel(ROOM_M, 1, target, blocked_db),
    )
    scene = replace(base, obstacles=obstacles)
    rows = []
    for layout_name in ("one16x16", "two8x8", "four4x4", "sixteen1x1"):
        for seed in seeds:
            out = run_end_to_end(scene, layout_name, radar, cfg, duration, seed)
            r = out["results"][0]
            rows.append(
                {
                    "point": "5m_blocked",
                    "layout": layout_name,
                    "seed": seed,
                    "blocked_boards": "0+1",
                    "cosine": r["cosine"],
                    "rate_bpm": r["rate_bpm"],
                    "gt_bpm": r["gt_bpm"],
                    "abs_err_bpm": r["abs_err_bpm"],
                }
            )
    summary = _grouped_summary(rows, ("layout",), ("abs_err_bpm", "cosine"))
    return rows, summary


def _study_mobility(seeds, params):
    duration = params.get("duration_s", 60.0)
    radar = RadarParams()
    cfg = TrainConfig(**params.get("train", {}))
    path = (
        (0.0, 1.0, 1.2, 0.0),
        (20.0, 2.6, 1.2, 0.0),
        (30.0, 2.6, 2.2, math.pi / 2),
        (50.0, 1.0, 2.2, math.pi),
        (60.0, 1.0, 1.2, -math.pi / 2),
    )
    chest = ChestModel(resp_rate_bpm=16.0, resp_variability=0.03)
    scene = Scene(
        room_m=ROOM_M,
        subjects=(Subject(chest=chest, trajectory=Trajectory(path)),),
        seed=0,
    )
    rows = []
    for seed in seeds:
        out = run_end_to_end(scene, "four4x4", radar, cfg, duration, seed)
        r = out["results"][0]
        rows.append(
            {
                "layout": "four4x4",
                "seed": seed,
                "cosine": r["cosine"],
                "rate_bpm": r["rate_bpm"],
                "gt_bpm": r["gt_bpm"],
                "abs_err_bpm": r["abs_err_bpm"],
            }
        )
    summary = _grouped_summary(rows, ("layout",), ("abs_err_bpm", "cosine"))
    return rows, summary


def _study_attention_block(seeds, params):
    duration = params.get("duration_s", 60.0)
    blocked_db = params.get("blocked_db", 30.0)
    radar = RadarParams(tx_gain=params.get("tx_gain", 4.0))
    cfg = TrainConfig(**params.get("train", {}))
    base = default_room_scene(distance_m=2.6, duration_s=duration)
    target = base.subjects[0].trajectory.waypoints[0][1:3]
    rows = []
    for blocked in range(4):
        scene = replace(
            base, obstacles=(_blocking_panel(ROOM_M, blocked, target, blocked_db),)
        )
        for seed in seeds:
            scene_seeded = replace(scene, seed=seed)
            layout = make_layout("four4x4", ROOM_M, radar.carrier_hz)
            clocks = synced_clocks(layout, SYNC_PROFILES["los"], seed)
            record = synthesize_record(scene_seeded, layout, clocks, radar, duration)
            model, _ = train(record, layout, replace(cfg, seed=seed))
            weights = attention_weights(model, record, layout)
            row = {
                "blocked_board": blocked,
                "seed": seed,
                "blocked_is_min": bool(int(np.argmin(weights)) == blocked),
            }
            row.update({f"w{i}": float(weights[i]) for i in range(4)})
            rows.append(row)
    summary = _grouped_summary(rows, ("blocked_board",), ("w0", "w1", "w2", "w3"))
    for key, group in summary.items():
        group["blocked_min_fraction"] = float(
            np.mean([r["blocked_is_min"] for r in rows if str(r["blocked_board"]) == key])
        )
    return rows, summary


def _multi_subject_scene(n_subjects: int, duration_s: float) -> Scene:
    rates = (12.0, 17.0, 22.0)
    hearts = (60.0, 80.0, 100.0)
    corners = (0, 1, 2)
    subjects = []
    for i in range(n_subjects):
        x, y, facing = _spot_near_corner(ROOM_M, corners[i], 1.2)
        chest = ChestModel(
            resp_rate_bpm=rates[i],
            heart_rate_bpm=hearts[i],
            resp_variability=0.03,
            resp_phase_rad=0.7 * i,
        )
        subjects.append(
            Subject(chest=chest, trajectory=Trajectory.static(x, y, facing, duration_s))
        )
    return Scene(room_m=ROOM_M, subjects=tuple(subjects), seed=0)


def _study_multi_subject(seeds, params):
    duration = params.get("duration_s", 60.0)
    n_subjects = int(params.get("subjects", 2))
    if not 2 <= n_subjects <= 3:
        raise ValueError("multi_subject supports 2 or 3 subjects")
    radar = RadarParams()
    cfg = TrainConfig(**params.get("train", {}))
    scene = _multi_subject_scene(n_subjects, duration)
    rows = []
    for seed in seeds:
        out = run_end_to_end(scene, "four4x4", radar, cfg, duration, seed)
        for r in out["results"]:
            rows.append(
                {
                    "seed": seed,
                    "subject": r["subject"],
                    "component": r["component"],
                    "cosine": r["cosine"],
                    "rate_bpm": r["rate_bpm"],
                    "gt_bpm": r["gt_bpm"],
                    "abs_err_bpm": r["abs_err_bpm"],
                }
            )
    summary = _grouped_summary(rows, ("subject",), ("cosine", "abs_err_bpm"))
    return rows, summary


def _study_generalization(seeds, params):
    """Train in one room, evaluate the frozen model in another."""
    duration = params.get("duration_s", 60.0)
    radar = RadarParams()
    cfg = TrainConfig(**params.get("train", {}))
    scene_train = default_room_scene(
        distance_m=1.2, resp_rate_bpm=14.0, duration_s=duration
    )
    room_b = (4.5, 5.0)
    x, y, facing = _spot_near_corner(room_b, 0, 1.4)
    chest_b = ChestModel(resp_rate_bpm=17.0, resp_variability=0.03, heart_rate_bpm=80.0)
    scene_eval = Scene(
        room_m=room_b,
        subjects=(Subject(chest=chest_b, trajectory=Trajectory.static(x, y, facing, duration)),),
        obstacles=(Obstacle(2.2, 1.0, 2.2, 2.2, 6.5),),
        seed=0,
    )
    rows = []
    for seed in seeds:
        out = run_end_to_end(scene_train, "four4x4", radar, cfg, duration, seed)
        r_train = out["results"][0]
        scene_b = replace(scene_eval, seed=seed + 1000)
        layout_b = make_layout("four4x4", room_b, radar.carrier_hz)
        clocks_b = synced_clocks(layout_b, SYNC_PROFILES["los"], seed + 1000)
        record_b = synthesize_record(scene_b, layout_b, clocks_b, radar, duration)
        gt_b = ground_truth(scene_b, duration, radar.fps)
        results_b, _ = evaluate_record(out["model"], record_b, gt_b)
        r_b = results_b[0]
        rows.append(
            {
                "seed": seed,
                "cosine_trained_scene": r_train["cosine"],
                "cosine_unseen_scene": r_b["cosine"],
                "abs_err_trained_scene": r_train["abs_err_bpm"],
                "abs_err_unseen_scene": r_b["abs_err_bpm"],
            }
        )
    summary = _grouped_summary(
        rows,
        (),
        (
            "cosine_trained_scene",
            "cosine_unseen_scene",
            "abs_err_trained_scene",
            "abs_err_unseen_scene",
        ),
    )
    return rows, summary


def _study_sync_bench(seeds, params):
    boards = int(params.get("boards", 100))
    tones = TonePair()
    rows = []
    summary = {}
    for profile_name in ("los", "nlos"):
        profile = SYNC_PROFILES[profile_name]
        for seed in seeds:
            clocks = sample_clocks(boards, profile, seed=seed)
            stats = coherence_report(clocks, tones, profile=profile, seed=seed)
            for clock, cfo, phase in zip(
                clocks, stats.residual_cfo_hz, stats.phase_offset_rad
            ):
                rows.append(
                    {
                        "profile": profile_name,
                        "seed": seed,
                        "board_id": clock.board_id,
                        "residual_cfo_hz": cfo,
                        "phase_offset_rad": phase,
                    }
                )
            summary[f"{profile_name}_seed{seed}"] = {
                "median_residual_cfo_hz": stats.median_residual_cfo_hz,
                "median_abs_phase_offset_rad": stats.median_abs_phase_offset_rad,
            }
    return rows, summary


def _study_heart_distance(seeds, params):
    duration = params.get("duration_s", 60.0)
    radar = RadarParams()
    cfg = TrainConfig(**params.get("train", {}))
    rows = []
    for distance in (0.5, 1.0, 2.0, 3.0):
        scene = default_room_scene(
            distance_m=distance, duration_s=duration, resp_rate_bpm=14.0
        )
        for seed in seeds:
            out = run_end_to_end(scene, "four4x4", radar, cfg, duration, seed)
            comps = out["components"]
            gt = out["gt"]
            heart_refs = _gt_on_component_grid(
                gt, comps.t_start_s, comps.series.shape[1], "heartbeat_m"
            )
            max_lag = int(EVAL_MAX_LAG_S * comps.fs)
            sims = [aligned_cosine(c, heart_refs[0], max_lag) for c in comps.series]
            best = int(np.argmax(sims))
            gt_hr = gt["subjects"][0]["heart_rate_bpm"]
            try:
                rate = estimate_rate(comps.series[best], comps.fs, HEART_BAND_BPM)
                err = abs(rate - gt_hr)
            except (NoRateError, ValueError):
                rate, err = float("nan"), float("nan")
            rows.append(
                {
                    "distance_m": distance,
                    "seed": seed,
                    "heart_cosine": float(sims[best]),
                    "heart_rate_bpm": float(rate),
                    "gt_heart_bpm": float(gt_hr),
                    "heart_abs_err_bpm": float(err),
                }
            )
    summary = _grouped_summary(rows, ("distance_m",), ("heart_abs_err_bpm", "heart_cosine"))
    return rows, summary


_STUDIES = {
    "config_sweep": _study_config_sweep,
    "nlos": _study_nlos,
    "mobility": _study_mobility,
    "attention_block": _study_attention_block,
    "multi_subject": _study_multi_subject,
    "generalization": _study_generalization,
    "sync_bench": _study_sync_bench,
    "heart_distance": _study_heart_distance,
}


# ---------------------------------------------------------------------------
# Aggregation and persistence
# ---------------------------------------------------------------------------

def _grouped_summary(rows, group_cols, metric_cols) -> dict:
    """Median and IQR of each metric per group of rows."""
    groups: dict[str, list[dict]] = {}
    for row in rows:
        key = "|".join(str(row[c]) for c in group_cols) if group_cols else "all"
        groups.setdefault(key, []).append(row)
    out = {}
    for key, members in sorted(groups.items()):
        stats = {"n": len(members)}
        for metric in metric_cols:
            vals = np.array([m[metric] for m in members], dtype=float)
            finite = vals[np.isfinite(vals)]
            if finite.size:
                q1, med, q3 = np.percentile(finite, [25, 50, 75])
                stats[f"median_{metric}"] = float(med)
                stats[f"iqr_{metric}"] = float(q3 - q1)
            else:
                stats[f"median_{metric}"] = float("nan")
                stats[f"iqr_{metric}"] = float("nan")
            stats[f"failures_{metric}"] = int(vals.size - finite.size)
        out[key] = stats
    return out


def _format_cell(value) -> str:
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def write_rows_csv(path, rows) -> None:
    if not rows:
        raise ValueError("no rows to write")
    fields = list(rows[0].keys())
    ordered = sorted(rows, key=lambda r: tuple(_format_cell(r[f]) for f in fields))
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(fields)
        for row in ordered:
            writer.writerow([_format_cell(row[f]) for f in fields])


def run_study(name: str, seeds, out_dir=None, **params):
    """Run a named study; optionally persist results.csv + summary.json.

    Returns (rows, summary).  Rows are plain dicts; the summary carries
    medians and IQRs per group.
    """
    if name not in _STUDIES:
        raise UnknownStudyError(name)
    seeds = tuple(int(s) for s in seeds)
    if not seeds:
        raise ValueError("need at least one seed")
    rows, summary = _STUDIES[name](seeds, params)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_rows_csv(out / f"{name}.csv", rows)
        with open(out / f"{name}_summary.json", "w") as f:
            json.dump({"study": name, "seeds": list(seeds), "groups": summary}, f, indent=2)
            f.write("\n")
    return rows, summary
