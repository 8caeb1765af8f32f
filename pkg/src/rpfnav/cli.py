"""Command-line front end: train, eval, replay and plot.

This is the only module that decides where files go. Every run directory
gets a manifest (written before any real work) with the fully resolved
configuration, so any output can be reproduced bit-identically from its
manifest alone. Exit codes: 0 success, 2 configuration error, 3 runtime
abort.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import re
import subprocess
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from . import metrics, plotting
from . import policy as policy_mod
from .geometry import WorldParams
from .ppo import PpoConfig
from .scenarios import Scenario, ScenarioError, gen_circle_swap, gen_cluttered, load_scenario, save_scenario
from .simulator import Mode, SimConfig, read_trajectory, run_episode, write_trajectory
from .training import Trainer, TrainConfig, TrainingAborted

MANIFEST_FORMAT = "rpfnav-manifest-v1"
REPORT_FORMAT = "rpfnav-report-v1"

WORLD_FIELDS = ("r", "d_r", "rho", "v", "dt", "d_m", "f_in_threshold")
PPO_FIELDS = ("alpha0", "beta", "gamma", "epsilon", "tau", "c1", "c2",
              "update_interval", "epochs", "steps_per_episode", "episodes")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class ConfigError(ValueError):
    pass


def _git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"],
                             capture_output=True, text=True, timeout=10,
                             cwd=Path(__file__).parent)
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _write_manifest(out_dir: Path, command: str, config: dict,
                    seed: int, checkpoint: Optional[str]) -> None:
    _write_json(out_dir / "manifest.json", {
        "format": MANIFEST_FORMAT,
        "command": command,
        "config": config,
        "seed": seed,
        "checkpoint": checkpoint,
        "out_dir": str(out_dir),
        "git_describe": _git_describe(),
        "package_version": __version__,
    })


def _layered(defaults: dict, file_section: dict, flags: dict) -> dict:
    """Precedence: explicit flag > config file > default."""
    merged = dict(defaults)
    for key, value in file_section.items():
        if key not in merged:
            raise ConfigError(f"unknown config key {key!r}")
        merged[key] = value
    for key, value in flags.items():
        if value is not None:
            merged[key] = value
    return merged


def _load_config_file(path: Optional[str]) -> dict:
    if path is None:
        return {}
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, dict):
        raise ConfigError("config file must hold a JSON object")
    return doc


def _resolve_world(file_doc: dict, args) -> WorldParams:
    flags = {name: getattr(args, f"world_{name}", None) for name in WORLD_FIELDS}
    defaults = {f.name: f.default for f in dataclasses.fields(WorldParams)}
    merged = _layered(defaults, file_doc.get("world", {}), flags)
    return WorldParams(**merged).validate()


def _resolve_ppo(file_doc: dict, args) -> PpoConfig:
    flags = {name: getattr(args, f"ppo_{name}", None) for name in PPO_FIELDS}
    defaults = {f.name: f.default for f in dataclasses.fields(PpoConfig)}
    merged = _layered(defaults, file_doc.get("ppo", {}), flags)
    return PpoConfig(**merged).validate()


_CIRCLE_RE = re.compile(r"^circle(\d+)(?:-?r([0-9.]+))?$")
_CLUTTER_RE = re.compile(r"^clutter(\d+)(?:-?r([0-9.]+))?$")


def resolve_scenario(name: str, seed: int, params: WorldParams) -> Scenario:
    """A scenario file path, or a generator name like circle8-r3 / clutter6."""
    path = Path(name)
    if name.endswith(".json") or path.exists():
        scenario = load_scenario(path)
        scenario.params = params
        return scenario.validate()
    match = _CIRCLE_RE.match(name)
    if match:
        n = int(match.group(1))
        radius = float(match.group(2)) if match.group(2) else 2.0
        return gen_circle_swap(n, radius, rng=np.random.default_rng(seed),
                               params=params)
    match = _CLUTTER_RE.match(name)
    if match:
        n = int(match.group(1))
        radius = float(match.group(2)) if match.group(2) else 0.5
        return gen_cluttered(np.random.default_rng(seed), n, radius, params=params)
    raise ConfigError(
        f"unknown scenario {name!r}; use a file path, circleN[-rR] or clutterN[-rR]")


def cmd_train(args) -> int:
    file_doc = _load_config_file(args.config)
    world = _resolve_world(file_doc, args)
    ppo_cfg = _resolve_ppo(file_doc, args)
    train_section = file_doc.get("train", {})
    train_defaults = {
        "scenario": "circle", "mode": "rpf", "n_robots": 6,
        "circle_radius": 2.0, "obstacle_radius": 0.5,
        "checkpoint_every": 100, "episodes": None,
    }
    merged = _layered(train_defaults, train_section, {
        "scenario": args.scenario, "mode": args.mode, "n_robots": args.n_robots,
        "circle_radius": args.circle_radius, "obstacle_radius": args.obstacle_radius,
        "checkpoint_every": args.checkpoint_every, "episodes": args.episodes,
    })

    config = TrainConfig(
        ppo=ppo_cfg, world=world, mode=Mode(merged["mode"]),
        scenario_kind=merged["scenario"], n_robots=merged["n_robots"],
        circle_radius=merged["circle_radius"],
        obstacle_radius=merged["obstacle_radius"],
        seed=args.seed, episodes=merged["episodes"],
    ).validate()

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_config = {
        "world": dataclasses.asdict(world),
        "ppo": dataclasses.asdict(ppo_cfg),
        "train": {key: merged[key] for key in train_defaults},
    }
    _write_manifest(out_dir, "train", manifest_config, args.seed, None)

    trainer = Trainer(config)
    checkpoint_path = out_dir / "checkpoint.npz"
    checkpoint_every = merged["checkpoint_every"]
    policy_meta = {"mode": config.mode.value}

    def save(path: Path) -> None:
        policy_mod.save_policy(path, trainer.policy, policy_meta)

    log_path = out_dir / "train_log.jsonl"
    with open(log_path, "w", encoding="utf-8") as log:
        def on_episode(stats):
            log.write(json.dumps(stats.to_json()) + "\n")
            log.flush()
            if checkpoint_every and (stats.episode + 1) % checkpoint_every == 0:
                save(out_dir / f"checkpoint_ep{stats.episode + 1:06d}.npz")

        try:
            trainer.run(on_episode)
        except TrainingAborted as exc:
            print(f"training aborted: {exc}", file=sys.stderr)
            print(f"last periodic checkpoint (if any) retained in {out_dir}",
                  file=sys.stderr)
            return EXIT_RUNTIME
    if config.n_episodes == 0:
        print("no episodes requested; wrote manifest only")
        return EXIT_OK
    save(checkpoint_path)
    print(f"trained {config.n_episodes} episodes -> {checkpoint_path}")
    return EXIT_OK


def _wall_following_option(value: str) -> Optional[bool]:
    return {"auto": None, "on": True, "off": False}[value]


def cmd_eval(args) -> int:
    file_doc = _load_config_file(args.config)
    world = _resolve_world(file_doc, args)
    mode = Mode(args.mode)

    policy = None
    if mode in (Mode.RPF, Mode.VANILLA_PPO):
        if args.checkpoint is None:
            raise ConfigError(f"mode {mode.value} requires --checkpoint")
        policy, policy_meta = policy_mod.load_policy(args.checkpoint)
        expect = "rpf" if mode is Mode.RPF else "vanilla_ppo"
        if policy_meta.get("mode") not in (None, expect):
            raise ConfigError(
                f"checkpoint was trained for mode {policy_meta.get('mode')!r}, "
                f"not {expect!r}")

    scenario = resolve_scenario(args.scenario, args.seed, world)
    from .forces import ApfParams
    sim_config = SimConfig(
        params=world, mode=mode, seed=args.seed, max_steps=args.max_steps,
        apf=ApfParams(args.eta, args.lam),
        wall_following=_wall_following_option(args.wall_following),
        stochastic=args.stochastic,
    )

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_config = {
        "world": dataclasses.asdict(world),
        "scenario": args.scenario,
        "mode": mode.value,
        "max_steps": args.max_steps,
        "eta": args.eta, "lam": args.lam,
        "wall_following": args.wall_following,
        "stochastic": args.stochastic,
    }
    _write_manifest(out_dir, "eval", manifest_config, args.seed, args.checkpoint)
    save_scenario(out_dir / "scenario.json", scenario)

    summary = run_episode(sim_config, scenario, policy)
    write_trajectory(out_dir / "trajectory.txt", summary.records)

    ok_trails = [trail for trail, hit in zip(summary.trails, summary.collided)
                 if not hit]
    if ok_trails:
        distances, distance_mean = metrics.traveling_distance(ok_trails)
        smooth, smooth_mean = metrics.motion_smoothness(ok_trails)
    else:
        distances, distance_mean, smooth, smooth_mean = [], float("nan"), [], float("nan")
    all_distances, _ = metrics.traveling_distance(summary.trails)
    all_smooth, _ = metrics.motion_smoothness(summary.trails)

    report = {
        "format": REPORT_FORMAT,
        "label": f"{mode.value}:{scenario.name}",
        "mode": mode.value,
        "scenario": scenario.name,
        "seed": args.seed,
        "steps": summary.steps,
        "n_robots": len(scenario.robots),
        "arrivals": sum(summary.arrived),
        "collisions": sum(summary.collided),
        "collided_robots": [k for k, hit in enumerate(summary.collided) if hit],
        "returns": summary.returns,
        "traveling_distance": all_distances,
        "traveling_distance_mean": distance_mean,
        "motion_smoothness": all_smooth,
        "motion_smoothness_mean": smooth_mean,
    }
    _write_json(out_dir / "report.json", report)
    print(f"{report['label']}: arrivals {report['arrivals']}/{report['n_robots']}, "
          f"collisions {report['collisions']}, "
          f"mean distance {distance_mean:.3f} m, mean smoothness {smooth_mean:.4f}")
    return EXIT_OK


def cmd_replay(args) -> int:
    manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    if manifest.get("format") != MANIFEST_FORMAT or manifest.get("command") != "eval":
        raise ConfigError("replay needs an eval manifest")
    source_dir = Path(args.manifest).parent
    original = (source_dir / "trajectory.txt").read_bytes()

    config = manifest["config"]
    out_dir = Path(args.out) if args.out else source_dir / "replay"
    replay_args = argparse.Namespace(
        config=None, checkpoint=manifest["checkpoint"],
        scenario=str(source_dir / "scenario.json"), mode=config["mode"],
        seed=manifest["seed"], out=str(out_dir), max_steps=config["max_steps"],
        eta=config["eta"], lam=config["lam"],
        wall_following=config["wall_following"], stochastic=config["stochastic"],
        **{f"world_{name}": config["world"][name] for name in WORLD_FIELDS},
    )
    code = cmd_eval(replay_args)
    if code != EXIT_OK:
        return code
    replayed = (out_dir / "trajectory.txt").read_bytes()
    if replayed != original:
        print("replay MISMATCH: trajectories differ", file=sys.stderr)
        return EXIT_RUNTIME
    print("replay OK: trajectory is bit-identical")
    return EXIT_OK


def cmd_plot(args) -> int:
    if args.reports:
        reports = [json.loads(Path(p).read_text(encoding="utf-8"))
                   for p in args.reports]
        plotting.plot_metric_bars(reports, args.out)
        print(f"wrote {args.out}")
        return EXIT_OK
    if not args.trajectory:
        raise ConfigError("plot needs --trajectory or --reports")
    rows = read_trajectory(args.trajectory)
    scenario = load_scenario(args.scenario) if args.scenario else None
    plotting.plot_trajectories(rows, args.out, scenario=scenario,
                               title=args.title)
    print(f"wrote {args.out}")
    return EXIT_OK


def _add_world_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("world overrides")
    for name in WORLD_FIELDS:
        group.add_argument(f"--world-{name.replace('_', '-')}",
                           dest=f"world_{name}", type=float, default=None)


def _add_ppo_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("training overrides")
    int_fields = {"update_interval", "epochs", "steps_per_episode", "episodes"}
    for name in PPO_FIELDS:
        kind = int if name in int_fields else float
        group.add_argument(f"--ppo-{name.replace('_', '-')}",
                           dest=f"ppo_{name}", type=kind, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rpfnav",
        description="Multi-robot potential-field planner with learned scale "
                    "parameters: train, evaluate, replay and plot.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a policy")
    p_train.add_argument("--scenario", choices=["circle", "clutter", "both"],
                         default=None, help="training arena (default circle)")
    p_train.add_argument("--mode", choices=["rpf", "vanilla_ppo"], default=None)
    p_train.add_argument("--episodes", type=int, default=None)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--config", default=None, help="JSON config file")
    p_train.add_argument("--n-robots", type=int, default=None)
    p_train.add_argument("--circle-radius", type=float, default=None)
    p_train.add_argument("--obstacle-radius", type=float, default=None)
    p_train.add_argument("--checkpoint-every", type=int, default=None)
    _add_world_flags(p_train)
    _add_ppo_flags(p_train)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="run one evaluation episode")
    p_eval.add_argument("--checkpoint", default=None)
    p_eval.add_argument("--scenario", required=True,
                        help="scenario file or generator name (circle8-r3, clutter6)")
    p_eval.add_argument("--mode", choices=[m.value for m in Mode], default="rpf")
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--out", required=True)
    p_eval.add_argument("--config", default=None)
    p_eval.add_argument("--max-steps", type=int, default=1000)
    p_eval.add_argument("--eta", type=float, default=0.05,
                        help="fixed repulsion scale for the vanilla_apf baseline")
    p_eval.add_argument("--lam", type=float, default=2.0,
                        help="fixed compactness for the vanilla_apf baseline")
    p_eval.add_argument("--wall-following", choices=["auto", "on", "off"],
                        default="auto")
    p_eval.add_argument("--stochastic", action="store_true")
    _add_world_flags(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_replay = sub.add_parser("replay", help="re-run an eval manifest and verify")
    p_replay.add_argument("--manifest", required=True)
    p_replay.add_argument("--out", default=None)
    p_replay.set_defaults(func=cmd_replay)

    p_plot = sub.add_parser("plot", help="render trajectories or metric bars")
    p_plot.add_argument("--trajectory", default=None)
    p_plot.add_argument("--scenario", default=None)
    p_plot.add_argument("--reports", nargs="*", default=None)
    p_plot.add_argument("--title", default=None)
    p_plot.add_argument("--out", required=True)
    p_plot.set_defaults(func=cmd_plot)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ScenarioError, ValueError, FileNotFoundError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingAborted as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
