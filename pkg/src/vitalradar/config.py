"""JSON configuration: scene files and experiment descriptions.

Scene schema (all lengths meters, angles radians, rates per minute):

    {
      "room": [width, height],
      "seed": 0,
      "subjects": [
        {
          "chest": {"resp_rate_bpm": 15.0, "resp_amp_m": 0.005,
                    "resp_variability": 0.0, "heart_rate_bpm": 72.0,
                    "heart_amp_m": 0.0003, "heart_variability": 0.0,
                    "resp_phase_rad": 0.0, "heart_phase_rad": 0.0},
          "trajectory": [[t, x, y, facing], ...],
          "scatter": "facets",
          "reflectivity": 1.0
        }
      ],
      "obstacles": [
        {"x1": 0.0, "y1": 1.0, "x2": 1.0, "y2": 1.0, "attenuation_db": 6.5}
      ]
    }

Experiment schema:

    {
      "scene": {...} | "path/to/scene.json",
      "layout": "four4x4",
      "duration_s": 60.0,
      "seeds": [1, 2, 3, 4, 5],
      "radar": {"fps": 50.0, "noise_std": 1.6, ...},       # optional overrides
      "sync_profile": "los",                                # ideal | los | nlos
      "train": {"iterations": 200, ...}                     # optional overrides
    }

Validation errors name the offending key.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from .frontend import LAYOUT_NAMES, RadarParams
from .scene import ChestModel, Obstacle, Scene, Subject, Trajectory
from .sync import SYNC_PROFILES
from .training import TrainConfig

__all__ = [
    "ConfigError",
    "scene_from_dict",
    "scene_to_dict",
    "load_scene",
    "save_scene",
    "ExperimentConfig",
    "load_experiment",
    "experiment_from_dict",
]


class ConfigError(ValueError):
    """A configuration document violates the schema."""


def _require(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise ConfigError(f"{where}: missing required key {key!r}")
    return mapping[key]


def _only_keys(mapping: dict, allowed: set[str], where: str) -> None:
    extra = set(mapping) - allowed
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {sorted(extra)}")


def _build(cls, payload: dict, where: str):
    """Instantiate a dataclass from a dict, mapping errors to ConfigError."""
    fields = {f.name for f in dataclasses.fields(cls)}
    _only_keys(payload, fields, where)
    try:
        return cls(**payload)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def scene_from_dict(doc: dict) -> Scene:
    if not isinstance(doc, dict):
        raise ConfigError("scene: document must be a JSON object")
    _only_keys(doc, {"room", "seed", "subjects", "obstacles"}, "scene")
    room = _require(doc, "room", "scene")
    if not (isinstance(room, (list, tuple)) and len(room) == 2):
        raise ConfigError("scene.room: expected [width, height]")
    subjects_doc = _require(doc, "subjects", "scene")
    if not isinstance(subjects_doc, list) or not subjects_doc:
        raise ConfigError("scene.subjects: expected a non-empty list")

    subjects = []
    for i, s in enumerate(subjects_doc):
        where = f"scene.subjects[{i}]"
        if not isinstance(s, dict):
            raise ConfigError(f"{where}: expected an object")
        _only_keys(s, {"chest", "trajectory", "scatter", "reflectivity"}, where)
        chest = _build(ChestModel, _require(s, "chest", where), f"{where}.chest")
        wps = _require(s, "trajectory", where)
        try:
            traj = Trajectory(tuple(tuple(w) for w in wps))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{where}.trajectory: {exc}") from None
        subjects.append(
            Subject(
                chest=chest,
                trajectory=traj,
                scatter=s.get("scatter", "facets"),
                reflectivity=float(s.get("reflectivity", 1.0)),
            )
        )

    obstacles = []
    for i, o in enumerate(doc.get("obstacles", [])):
        where = f"scene.obstacles[{i}]"
        if not isinstance(o, dict):
            raise ConfigError(f"{where}: expected an object")
        _only_keys(o, {"x1", "y1", "x2", "y2", "attenuation_db"}, where)
        try:
            obstacles.append(
                Obstacle(
                    _require(o, "x1", where), _require(o, "y1", where),
                    _require(o, "x2", where), _require(o, "y2", where),
                    _require(o, "attenuation_db", where),
                )
            )
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from None

    try:
        return Scene(
            room_m=(float(room[0]), float(room[1])),
            subjects=tuple(subjects),
            obstacles=tuple(obstacles),
            seed=int(doc.get("seed", 0)),
        )
    except ValueError as exc:
        raise ConfigError(f"scene: {exc}") from None


def scene_to_dict(scene: Scene) -> dict:
    return {
        "room": list(scene.room_m),
        "seed": scene.seed,
        "subjects": [
            {
                "chest": dataclasses.asdict(s.chest),
                "trajectory": [list(w) for w in s.trajectory.waypoints],
                "scatter": s.scatter,
                "reflectivity": s.reflectivity,
            }
            for s in scene.subjects
        ],
        "obstacles": [
            {
                "x1": o.x1_m, "y1": o.y1_m, "x2": o.x2_m, "y2": o.y2_m,
                "attenuation_db": o.attenuation_db,
            }
            for o in scene.obstacles
        ],
    }


def load_scene(path) -> Scene:
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"scene file {path}: invalid JSON ({exc})") from None
    return scene_from_dict(doc)


def save_scene(path, scene: Scene) -> None:
    with open(path, "w") as f:
        json.dump(scene_to_dict(scene), f, indent=2)
        f.write("\n")


@dataclass
class ExperimentConfig:
    """Everything one simulation-plus-training run needs."""

    scene: Scene
    layout_name: str = "four4x4"
    duration_s: float = 60.0
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    radar: RadarParams = RadarParams()
    sync_profile: str = "los"
    train: TrainConfig = TrainConfig()

    def __post_init__(self) -> None:
        if self.layout_name not in LAYOUT_NAMES:
            raise ConfigError(
                f"layout: unknown name {self.layout_name!r}; expected one of {LAYOUT_NAMES}"
            )
        if self.sync_profile not in SYNC_PROFILES:
            raise ConfigError(
                f"sync_profile: unknown profile {self.sync_profile!r}"
            )
        if self.duration_s <= 0:
            raise ConfigError("duration_s: must be positive")
        if not self.seeds:
            raise ConfigError("seeds: must not be empty")


def experiment_from_dict(doc: dict, base_dir: Path | None = None) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("experiment: document must be a JSON object")
    _only_keys(
        doc,
        {"scene", "layout", "duration_s", "seeds", "radar", "sync_profile", "train"},
        "experiment",
    )
    scene_doc = _require(doc, "scene", "experiment")
    if isinstance(scene_doc, str):
        path = Path(scene_doc)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        scene = load_scene(path)
    else:
        scene = scene_from_dict(scene_doc)

    radar_doc = dict(doc.get("radar", {}))
    radar = _build(RadarParams, radar_doc, "experiment.radar")
    train_doc = dict(doc.get("train", {}))
    for key in ("delta_range_s", "enc_hidden", "band_hz"):
        if key in train_doc:
            train_doc[key] = tuple(train_doc[key])
    train = _build(TrainConfig, train_doc, "experiment.train")

    seeds = doc.get("seeds", [1, 2, 3, 4, 5])
    if not isinstance(seeds, list) or not all(isinstance(s, int) for s in seeds):
        raise ConfigError("experiment.seeds: expected a list of integers")

    return ExperimentConfig(
        scene=scene,
        layout_name=doc.get("layout", "four4x4"),
        duration_s=float(doc.get("duration_s", 60.0)),
        seeds=tuple(seeds),
        radar=radar,
        sync_profile=doc.get("sync_profile", "los"),
        train=train,
    )


def load_experiment(path) -> ExperimentConfig:
    p = Path(path)
    with open(p) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"experiment file {path}: invalid JSON ({exc})") from None
    return experiment_from_dict(doc, base_dir=p.parent)
