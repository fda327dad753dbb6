"""Run configuration: flat key=value files, CLI overrides, snapshots.

Precedence: dataclass defaults < config file < command-line flags <
the NXSG_SEED environment variable (seed only).  Every subcommand writes
the fully resolved configuration next to its outputs so any run can be
reproduced from the snapshot alone.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError


@dataclass
class RunConfig:
    seed: int = 0
    # spectrogram framing
    frame_len_s: float = 0.064
    frame_step_s: float = 0.020
    # factorization
    rank: int = 256
    sparsity: float = 0.1
    nmf_iters: int = 500
    pool_size: int = 1200
    # distillation objective
    alpha: float = 10.0
    beta: float = 5.0
    gamma: float = 0.1
    # optimization
    lr: float = 1e-3
    batch: int = 64
    epochs: int = 30
    patience: int = 5
    crop_frames: int = 100
    # model scale: "paper" or "desk"
    preset: str = "paper"
    w_trainable: bool = False
    # corpus
    train_scenes: int = 200
    val_scenes: int = 40
    test_scenes: int = 40
    scene_duration_s: float = 4.0
    # decisions / explanation
    threshold: float = 0.5
    min_dur_s: float = 0.0
    tau_points: int = 20


_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


def _coerce(name: str, kind, raw: str):
    if kind is bool:
        low = raw.strip().lower()
        if low in _BOOL_TRUE:
            return True
        if low in _BOOL_FALSE:
            return False
        raise ConfigError(f"config key {name}: expected a boolean, got {raw!r}")
    try:
        return kind(raw)
    except ValueError as e:
        raise ConfigError(f"config key {name}: {e}") from e


def parse_config_file(path) -> dict:
    """Flat `key = value` lines; blank lines and # comments ignored."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, _, raw = stripped.partition("=")
        values[key.strip()] = raw.strip()
    return values


def resolve_config(file_path=None, overrides: dict = None) -> RunConfig:
    cfg = RunConfig()
    typed = {f.name: f.type for f in fields(RunConfig)}
    kinds = {"seed": int, "rank": int, "nmf_iters": int, "pool_size": int,
             "batch": int, "epochs": int, "patience": int, "crop_frames": int,
             "train_scenes": int, "val_scenes": int, "test_scenes": int,
             "tau_points": int, "preset": str, "w_trainable": bool}
    if file_path is not None:
        for key, raw in parse_config_file(file_path).items():
            if key not in typed:
                raise ConfigError(f"unknown config key {key!r}")
            kind = kinds.get(key, float)
            setattr(cfg, key, _coerce(key, kind, raw))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in typed:
            raise ConfigError(f"unknown config key {key!r}")
        setattr(cfg, key, value)
    env_seed = os.environ.get("NXSG_SEED")
    if env_seed is not None:
        cfg.seed = _coerce("NXSG_SEED", int, env_seed)
    if cfg.preset not in ("paper", "desk"):
        raise ConfigError(f"preset must be paper or desk, got {cfg.preset!r}")
    return cfg


def write_config_snapshot(out_dir, cfg: RunConfig, name="run_config.txt") -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = [f"{f.name} = {getattr(cfg, f.name)}" for f in fields(RunConfig)]
    path = out_dir / name
    path.write_text("\n".join(lines) + "\n")
    return path
