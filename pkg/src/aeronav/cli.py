"""Command-line entry point.

Commands: gen-scenes, run, eval, train, render-debug, replay. Settings come
from an optional TOML file (``--config``) and are overridden by flags.
Exit codes: 0 ok, 1 replay mismatch, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import AeronavError, ConfigError
from .evaluation.artifacts import depth_pgm, ppm_bytes, roi_pgm, scan_csv, semantic_csv, topdown_image
from .evaluation.env import PerceptionConfig, perceive
from .evaluation.metrics import compute_metrics
from .evaluation.replay import replay
from .evaluation.runner import EpisodeConfig, EpisodeRecord, canonical_hash, run_episode
from .evaluation.training import ScenePoolSampler, derive_seed
from .geometry import DEFAULT_INTRINSICS, Pose
from .policy.actor_critic import ActorCriticParams, save_checkpoint
from .policy.trainer import train_actor_critic
from .rewards import ExploreRewardConfig, GoalRewardConfig
from .simulator.generate import SceneConfig, generate_scene
from .simulator.kinematics import is_valid_position
from .simulator.scene import VoxelScene
from .simulator.sensors import DetectorNoise

log = logging.getLogger("aeronav")

EXIT_OK, EXIT_MISMATCH, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

# TOML section -> accepted keys
EPISODE_KEYS = {"max_steps", "policy", "targets", "episodes", "reward_engine", "revert_k",
                "detector_miss_prob", "detector_jitter", "compute_spl", "track_coverage"}
TRAIN_KEYS = {"role", "episodes", "max_steps", "n_step", "hidden", "lr", "discount", "entropy_coef",
              "value_coef", "memory_alpha", "scenes", "near_radius", "rooms", "dims"}
SECTIONS = {"seed", "scene", "episode", "perception", "reward", "train", "workers"}


class Settings:
    """Merged view of the config file and command-line overrides."""

    def __init__(self, raw: dict):
        unknown = set(raw) - SECTIONS
        if unknown:
            raise ConfigError(f"unknown config sections {sorted(unknown)}")
        self.seed = int(raw.get("seed", 0))
        self.workers = int(raw.get("workers", 1))
        self.scene = _build(SceneConfig, raw.get("scene", {}), "scene", extra={"count"})
        self.scene_count = int(raw.get("scene", {}).get("count", 4))
        self.episode = _check_keys(raw.get("episode", {}), EPISODE_KEYS, "episode")
        self.perception = _build(PerceptionConfig, raw.get("perception", {}), "perception")
        reward = raw.get("reward", {})
        _check_keys(reward, {"goal", "explore"}, "reward")
        self.goal_reward = _build(GoalRewardConfig, reward.get("goal", {}), "reward.goal")
        self.explore_reward = _build(ExploreRewardConfig, reward.get("explore", {}), "reward.explore")
        self.train = _check_keys(raw.get("train", {}), TRAIN_KEYS, "train")

    def noise(self) -> DetectorNoise:
        return DetectorNoise(float(self.episode.get("detector_miss_prob", 0.0)),
                             float(self.episode.get("detector_jitter", 0.0)))


def _check_keys(section: dict, allowed: set, name: str) -> dict:
    if not isinstance(section, dict):
        raise ConfigError(f"[{name}] must be a table")
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(unknown)}")
    return dict(section)


def _build(cls, section: dict, name: str, extra: set = frozenset()):
    names = {f.name for f in fields(cls) if f.init}
    values = _check_keys(section, names | set(extra), name)
    kwargs = {}
    for k, v in values.items():
        if k in extra:
            continue
        if isinstance(v, list):
            v = frozenset(v) if k == "ablate" else tuple(v)
        kwargs[k] = v
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid [{name}]: {exc}") from exc


def load_settings(args) -> Settings:
    raw: dict = {}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file {path} does not exist")
        with path.open("rb") as fh:
            try:
                raw = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"cannot parse {path}: {exc}") from exc
    s = Settings(raw)
    if args.seed is not None:
        s.seed = args.seed
    if args.workers is not None:
        s.workers = args.workers
    if s.workers < 1:
        raise ConfigError("--workers must be >= 1")
    ep = s.episode
    for flag, key in (("max_steps", "max_steps"), ("policy", "policy"), ("episodes", "episodes"),
                      ("detector_miss_prob", "detector_miss_prob"), ("detector_jitter", "detector_jitter")):
        if getattr(args, flag, None) is not None:
            ep[key] = getattr(args, flag)
    if getattr(args, "target", None):
        ep["targets"] = list(args.target)
    s.noise()  # validate early
    return s


def _load_scene(path) -> VoxelScene:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"scene file {p} does not exist")
    return VoxelScene.load(p)


def _scene_paths(args) -> list[Path]:
    paths: list[Path] = []
    for item in args.scene or []:
        p = Path(item)
        if p.is_dir():
            paths.extend(sorted(p.glob("scene_*.json")))
        else:
            paths.append(p)
    if not paths:
        raise ConfigError("no scenes given (use --scene FILE|DIR)")
    return paths


def _out_dir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _episode_config(s: Settings, scene: VoxelScene, scene_ref: str, target: str, seed: int,
                    start: Pose | None = None) -> EpisodeConfig:
    ep = s.episode
    return EpisodeConfig(
        scene=scene, target_class=target, start=start, max_steps=int(ep.get("max_steps", 200)),
        noise=s.noise(), policy=ep.get("policy", "scripted-dual"), seed=seed,
        reward_engine=ep.get("reward_engine", "auto"), revert_k=int(ep.get("revert_k", 5)),
        scene_ref=scene_ref, perception=s.perception, goal_cfg=s.goal_reward, explore_cfg=s.explore_reward,
        compute_spl=bool(ep.get("compute_spl", True)), track_coverage=bool(ep.get("track_coverage", True)))


# ---------------------------------------------------------------- commands

def cmd_gen_scenes(args, s: Settings) -> int:
    out = _out_dir(args)
    count = args.count if args.count is not None else s.scene_count
    if count < 1:
        raise ConfigError("scene count must be >= 1")
    manifest = []
    for i in range(count):
        seed = derive_seed(s.seed, 0, i)
        scene = generate_scene(seed, s.scene)
        name = f"scene_{i:03d}.json"
        scene.save(out / name)
        manifest.append({"file": name, "seed": seed, "digest": scene.digest(),
                         "targets": sorted({o.label for o in scene.objects if o.is_target_candidate})})
    meta = {"root_seed": s.seed, "scene_config": _jsonable(s.scene), "scenes": manifest}
    meta["config_hash"] = canonical_hash(meta)
    (out / "manifest.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    print(f"wrote {count} scenes to {out}")
    return EXIT_OK


def _targets_for(s: Settings, scene: VoxelScene) -> list[str]:
    targets = s.episode.get("targets")
    if targets:
        for t in targets:
            scene.class_id(t)
        return list(targets)
    found = sorted({o.label for o in scene.objects if o.is_target_candidate})
    if not found:
        raise ConfigError("scene has no target objects; pass --target")
    return found


def _run_task(task: tuple) -> str:
    """Worker entry point: one episode, returned as its JSONL text."""
    raw, scene_path, scene_idx, target, seed = task
    s = Settings(raw)
    scene = VoxelScene.load(scene_path)
    cfg = _episode_config(s, scene, f"{scene_idx}:{Path(scene_path).name}", target, seed)
    return run_episode(cfg).to_jsonl()


def _settings_raw(s: Settings) -> dict:
    """Plain-dict form of the merged settings, for shipping to worker processes."""
    reward = {"goal": _jsonable(s.goal_reward), "explore": _jsonable(s.explore_reward)}
    return {"seed": s.seed, "episode": dict(s.episode), "perception": _jsonable(s.perception), "reward": reward}


def _jsonable(obj) -> dict:
    out = {}
    for f in fields(obj):
        if not f.init:
            continue
        v = getattr(obj, f.name)
        if isinstance(v, frozenset):
            v = sorted(v)
        elif isinstance(v, tuple):
            v = list(v)
        out[f.name] = v
    return out


def cmd_run(args, s: Settings) -> int:
    paths = _scene_paths(args)
    if len(paths) != 1:
        raise ConfigError("run takes exactly one --scene")
    scene = _load_scene(paths[0])
    targets = _targets_for(s, scene)
    start = _parse_pose(args.pose) if args.pose else None
    if start is not None and not is_valid_position(scene, start.position):
        raise ConfigError(f"start pose {start.position} is not in free space")
    seed = derive_seed(s.seed, 1)
    cfg = _episode_config(s, scene, paths[0].name, targets[0], seed, start)
    rec = run_episode(cfg)
    out = _out_dir(args)
    (out / "episode.jsonl").write_text(rec.to_jsonl())
    report = compute_metrics([rec])
    _write_report(out, report, cfg.config_hash())
    print(f"{rec.status} after {rec.n_steps} steps, {rec.collisions} collisions, FCR {rec.fcr:.1f}%")
    return EXIT_OK


def cmd_eval(args, s: Settings) -> int:
    paths = _scene_paths(args)
    reps = int(s.episode.get("episodes", 1))
    if reps < 1:
        raise ConfigError("--episodes must be >= 1")
    raw = _settings_raw(s)
    tasks, names = [], []
    for i, path in enumerate(paths):
        scene = _load_scene(path)
        for j, target in enumerate(_targets_for(s, scene)):
            for r in range(reps):
                tasks.append((raw, str(path), i, target, derive_seed(s.seed, 2, i, j, r)))
                names.append(f"ep_s{i:03d}_{target}_{r:03d}.jsonl")
    if s.workers > 1:
        with ProcessPoolExecutor(max_workers=s.workers) as pool:
            texts = list(pool.map(_run_task, tasks, chunksize=1))
    else:
        texts = [_run_task(t) for t in tasks]
    out = _out_dir(args)
    logs = out / "logs"
    logs.mkdir(exist_ok=True)
    records = []
    for name, text in zip(names, texts):
        (logs / name).write_text(text)
        records.append(EpisodeRecord.from_jsonl(text))
    report = compute_metrics(records)
    run_hash = canonical_hash({"settings": raw, "scenes": [VoxelScene.load(p).digest() for p in paths],
                               "episodes": reps})
    _write_report(out, report, run_hash)
    print(f"{len(records)} episodes: SR {report.sr:.1f} SPL {report.spl:.1f} CR {report.cr:.2f} FCR {report.fcr:.1f}")
    return EXIT_OK


def _write_report(out: Path, report, config_hash: str) -> None:
    d = report.to_dict()
    d["config_hash"] = config_hash
    (out / "report.json").write_text(json.dumps(d, sort_keys=True, indent=2) + "\n")
    (out / "per_class.csv").write_text(f"# config_hash {config_hash}\n" + report.per_class_csv())


def cmd_train(args, s: Settings) -> int:
    t = s.train
    role = args.role or t.get("role", "explore")
    episodes = int(args.episodes if args.episodes is not None else t.get("episodes", 500))
    max_steps = int(args.max_steps if args.max_steps is not None else t.get("max_steps", 40))
    if args.scene:
        scenes = [_load_scene(p) for p in _scene_paths(args)]
    else:
        cfg = replace(s.scene, rooms=int(t.get("rooms", 1)), dims=tuple(t.get("dims", (24, 24, 12))))
        scenes = [generate_scene(derive_seed(s.seed, 3, i), cfg) for i in range(int(t.get("scenes", 20)))]
    sampler = ScenePoolSampler(scenes, role, derive_seed(s.seed, 4), float(t.get("near_radius", 2.5)))
    hyper = {k: float(t[k]) for k in ("lr", "discount", "entropy_coef", "value_coef", "memory_alpha") if k in t}
    scene0, start0, target0, _ = sampler(0)
    obs_dim = len(perceive(scene0, start0, target0, DEFAULT_INTRINSICS, s.perception, DetectorNoise(),
                           np.random.default_rng(0)).bundle.to_vector())
    params = ActorCriticParams.init(obs_dim, hidden=int(t.get("hidden", 64)), seed=derive_seed(s.seed, 5),
                                    role=role, **hyper)
    env_kwargs = {"perception": s.perception, "goal_cfg": s.goal_reward, "explore_cfg": s.explore_reward,
                  "noise": s.noise()}
    result = train_actor_critic(sampler, role, params, episodes, max_steps=max_steps,
                                n_step=int(t.get("n_step", 20)), env_kwargs=env_kwargs)
    out = _out_dir(args)
    result.params.meta = {"episodes": episodes, "root_seed": s.seed,
                          "settings_hash": canonical_hash(_settings_raw(s) | {"train": t})}
    save_checkpoint(result.params, out / "checkpoint.npz")
    lines = ["episode,mean_reward"] + [f"{i},{r:.12f}" for i, r in enumerate(result.curve)]
    (out / "curve.csv").write_text("\n".join(lines) + "\n")
    print(f"trained {role} policy for {episodes} episodes -> {out / 'checkpoint.npz'}")
    return EXIT_OK


def _parse_pose(text: str) -> Pose:
    try:
        x, y, z, yaw = (float(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"--pose expects x,y,z,yaw; got {text!r}") from exc
    return Pose((x, y, z), yaw)


def cmd_render_debug(args, s: Settings) -> int:
    paths = _scene_paths(args)
    scene = _load_scene(paths[0])
    pose = _parse_pose(args.pose) if args.pose else Pose(scene.start, scene.start_yaw)
    if not is_valid_position(scene, pose.position):
        raise ConfigError(f"pose {pose.position} is inside an obstacle or out of bounds")
    target = _targets_for(s, scene)[0]
    k = DEFAULT_INTRINSICS
    obs = perceive(scene, pose, target, k, s.perception, s.noise(),
                   np.random.default_rng(derive_seed(s.seed, 6)))
    out = _out_dir(args)
    (out / "scan.csv").write_text(scan_csv(obs.bundle.scan))
    (out / "roi.pgm").write_bytes(roi_pgm(obs.bundle.roi, k.shape))
    (out / "semantic.csv").write_text(semantic_csv(obs.bundle.semantic))
    (out / "depth.pgm").write_bytes(depth_pgm(obs.frames.depth, k.max_range))
    meta = {"scene_digest": scene.digest(), "pose": [*pose.position, pose.yaw], "target": target,
            "perception": _jsonable(s.perception)}
    meta["config_hash"] = canonical_hash(meta)
    (out / "debug.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    print(f"wrote debug artifacts to {out}")
    return EXIT_OK


def cmd_replay(args, s: Settings) -> int:
    if not args.log:
        raise ConfigError("replay needs --log")
    log_path = Path(args.log)
    if not log_path.is_file():
        raise ConfigError(f"log file {log_path} does not exist")
    record = EpisodeRecord.from_jsonl(log_path.read_text())
    scene = _load_scene(_scene_paths(args)[0])
    verdict = replay(record, scene)
    print(verdict.describe())
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        start = record.config["start"]
        path = [(start[0], start[1])] + [(st.x, st.y) for st in record.steps]
        out.write_bytes(ppm_bytes(topdown_image(scene, path)))
    return EXIT_OK if verdict.ok else EXIT_MISMATCH


COMMANDS = {
    "gen-scenes": cmd_gen_scenes,
    "run": cmd_run,
    "eval": cmd_eval,
    "train": cmd_train,
    "render-debug": cmd_render_debug,
    "replay": cmd_replay,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML settings file")
    common.add_argument("--seed", type=int, help="root seed")
    common.add_argument("--episodes", type=int, help="episodes per (scene, target) or training episodes")
    common.add_argument("--max-steps", type=int, dest="max_steps")
    common.add_argument("--policy", help="scripted-dual | random | explore-only | goal-only | explore-rules | "
                                         "trained:<checkpoint>")
    common.add_argument("--scene", action="append", help="scene file or directory (repeatable)")
    common.add_argument("--out", help="output directory (image path for replay)")
    common.add_argument("--workers", type=int)
    common.add_argument("--detector-miss-prob", type=float, dest="detector_miss_prob")
    common.add_argument("--detector-jitter", type=float, dest="detector_jitter")
    common.add_argument("--target", action="append", help="target class (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="aeronav", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("gen-scenes", parents=[common], help="generate procedural scenes")
    p.add_argument("--count", type=int)
    p = sub.add_parser("run", parents=[common], help="run one episode")
    p.add_argument("--pose", help="start pose x,y,z,yaw")
    sub.add_parser("eval", parents=[common], help="run scenes x targets x seeds and report metrics")
    p = sub.add_parser("train", parents=[common], help="train the actor-critic policy")
    p.add_argument("--role", choices=("explore", "goal"))
    p = sub.add_parser("render-debug", parents=[common], help="emit perception debug artifacts")
    p.add_argument("--pose", help="camera pose x,y,z,yaw")
    p = sub.add_parser("replay", parents=[common], help="re-simulate a trajectory log")
    p.add_argument("--log", help="trajectory log (JSONL)")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        settings = load_settings(args)
        return COMMANDS[args.command](args, settings)
    except (ConfigError, ValueError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (AeronavError, RuntimeError, OSError, ArithmeticError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
