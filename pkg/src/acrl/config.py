"""Run configuration: a flat JSON document with per-family defaults.
Unknown keys are rejected; validation errors name the offending key.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields

from .envs import BUILTIN_LAYOUTS, builtin_layout_path


class ConfigError(ValueError):
    pass


_GRID_DEFAULTS = dict(
    layout="easy_a", target=[8.0, 1.0], source_center=[2.0, 3.0],
    latent_dim=2, delta=0.4, delta_tar=0.4, update_threshold=0.5,
    n_u=500, gamma=0.95, total_steps=1_500_000,
    vae_buffer_size=256, task_buffer_size=256,
    # the sparse goal reward punishes impatience: a conservative optimizer
    # and a small entropy bonus train fine on nearby goals but keep rare
    # lucky target hits from snowballing
    policy_lr=1e-4, entropy_coef=0.003,
)
_POINT_DEFAULTS = dict(
    layout=None, target=[0.0, 8.0], source_center=[2.0, 0.0],
    latent_dim=2, delta=-70.0, delta_tar=-40.0, update_threshold=-60.0,
    n_u=100, gamma=0.99, total_steps=2_000_000,
    vae_buffer_size=256, task_buffer_size=128,
    # same reasoning as the grid family: the reward carries no gradient
    # toward the goal until it is touched, so stay patient and do not let
    # isolated lucky target hits snowball
    policy_lr=1e-4, entropy_coef=0.003,
)


@dataclass
class RunConfig:
    family: str
    seed: int
    layout: str | None = None
    out_dir: str = "runs/out"
    strategy: str = "acrl"
    total_steps: int = 0
    target: list = field(default_factory=list)
    source_center: list = field(default_factory=list)
    source_std: float = 0.5
    source_count: int = 64
    latent_dim: int = 2
    # curriculum
    delta: float = 0.0
    delta_tar: float = 0.0
    update_threshold: float = 0.0
    sampling_ratio: float = 0.25
    alpha: float = 0.9
    beta: float = 1.0
    sigma: float = 1.0
    n_u: int = 500
    k: int = 10
    m: int = 16
    vae_buffer_size: int = 256
    task_buffer_size: int = 256
    ebu_sort_order: str = "ascending"
    # agent
    gamma: float = 0.95
    gae_lambda: float = 0.99
    clip_eps: float = 0.2
    entropy_coef: float = 0.01
    policy_lr: float = 3e-4
    rollout_steps: int = 2048
    ppo_epochs: int = 4
    minibatch_size: int = 128
    # representation
    vae_lr: float = 0.005
    vae_batch_size: int = 32
    kl_weight: float = 0.1
    stop_at_return: float | None = None


# JSON key "lambda" maps to the sampling_ratio field
_KEY_ALIASES = {"lambda": "sampling_ratio"}
_FIELD_NAMES = {f.name for f in fields(RunConfig)}


def config_from_dict(doc, name="<config>"):
    if not isinstance(doc, dict):
        raise ConfigError(f"{name}: config must be a JSON object")
    data = {}
    for key, value in doc.items():
        field_name = _KEY_ALIASES.get(key, key)
        if field_name not in _FIELD_NAMES:
            raise ConfigError(f"{name}: unknown key {key!r}")
        data[field_name] = value
    if "family" not in data:
        raise ConfigError(f"{name}: missing required key 'family'")
    if "seed" not in data:
        raise ConfigError(f"{name}: missing required key 'seed'")
    family = data["family"]
    if family not in ("grid", "point"):
        raise ConfigError(f"{name}: family must be 'grid' or 'point'")
    defaults = _GRID_DEFAULTS if family == "grid" else _POINT_DEFAULTS
    for key, value in defaults.items():
        data.setdefault(key, value)
    cfg = RunConfig(**data)
    _validate(cfg, name)
    return cfg


def _validate(cfg, name):
    if not 0.0 <= cfg.sampling_ratio <= 1.0:
        raise ConfigError(f"{name}: lambda out of [0,1]")
    if not 0.0 <= cfg.alpha <= 1.0:
        raise ConfigError(f"{name}: alpha out of [0,1]")
    if cfg.beta <= 0:
        raise ConfigError(f"{name}: beta must be > 0")
    if cfg.sigma <= 0:
        raise ConfigError(f"{name}: sigma must be > 0")
    if cfg.strategy not in ("acrl", "random", "default"):
        raise ConfigError(f"{name}: strategy must be acrl/random/default")
    if cfg.total_steps < 1:
        raise ConfigError(f"{name}: total_steps must be >= 1")
    if cfg.latent_dim < 1:
        raise ConfigError(f"{name}: latent_dim must be >= 1")
    if not isinstance(cfg.seed, int):
        raise ConfigError(f"{name}: seed must be an integer")
    if cfg.family == "grid":
        layout = cfg.layout
        if layout not in BUILTIN_LAYOUTS and not os.path.exists(layout):
            raise ConfigError(f"{name}: layout file not found: {layout}")
    expected_ctx = 2
    if cfg.family == "grid" and cfg.layout in BUILTIN_LAYOUTS:
        expected_ctx = 4 if cfg.layout == "medium_a" else 2
        if len(cfg.target) != expected_ctx:
            raise ConfigError(
                f"{name}: target must have {expected_ctx} components")


def load_config(path):
    """Parse and validate a JSON run configuration file."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}")
    return config_from_dict(doc, name=path)


def layout_path(cfg):
    if cfg.layout in BUILTIN_LAYOUTS:
        return builtin_layout_path(cfg.layout)
    return cfg.layout
