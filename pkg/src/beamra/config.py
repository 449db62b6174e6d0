"""Run configuration: defaults, JSON loading, validation and provenance hashing."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .antenna import ArrayConfig
from .channel import LinkParams
from .geometry import ActionSpace, BeamSetError, builtin_action_space, load_action_space
from .rl import DDQNConfig
from .sim import SimConfig, rates_from_ratio


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    # scenario
    lambda_total: float = 300.0
    rho: float = 20.0
    rates: list[float] | None = None        # explicit per-sector rates override lambda_total/rho
    n_sectors: int = 6
    n_preambles: int = 48
    n_threshold: int = 0
    max_slots: int = 200
    d_min_km: float = 0.01
    d_max_km: float = 10.0
    # link budget
    p_t_dbm: float = 23.0
    g_t_dbi: float = 0.0
    g_r_dbi: float = 18.0
    sigma_shadow_db: float = 8.0
    gamma_db: float = -110.0
    pl_a: float = 120.9
    pl_b: float = 37.6
    # antenna
    d_over_lambda: float = 0.25
    n_elements: int | None = None
    # None for the built-in three actions, a path to a JSON file, or an inline list
    action_space: Any = None
    # learning
    epsilon_start: float = 1.0
    epsilon_min: float = 0.01
    epsilon_decay: float = 0.99
    learning_rate: float = 0.001
    replay_capacity: int = 1200
    batch_size: int = 64
    target_sync: int = 16
    discount: float = 1.0
    episodes: int = 20000
    hidden: list[int] = field(default_factory=lambda: [64, 64])
    scale_state: bool = False
    # evaluation
    eval_episodes: int = 2000
    random_per_episode: bool = False
    seed: int = 0

    def __post_init__(self):
        for name in ("epsilon_start", "epsilon_min", "epsilon_decay", "discount"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        for name in ("replay_capacity", "batch_size", "target_sync", "episodes", "eval_episodes",
                     "n_preambles", "max_slots", "n_sectors"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be a positive integer, got {getattr(self, name)}")
        if self.batch_size > self.replay_capacity:
            raise ConfigError("batch_size cannot exceed replay_capacity")
        if not self.rho > 0:
            raise ConfigError(f"rho must be positive, got {self.rho}")
        if not self.lambda_total > 0 and self.rates is None:
            raise ConfigError(f"lambda_total must be positive, got {self.lambda_total}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if any(h < 1 for h in self.hidden):
            raise ConfigError(f"hidden layer sizes must be positive, got {self.hidden}")

    @property
    def sector_rates(self) -> tuple[float, ...]:
        if self.rates is not None:
            return tuple(float(r) for r in self.rates)
        return rates_from_ratio(self.lambda_total, self.rho, self.n_sectors)

    def actions(self, base_dir: Path | None = None) -> ActionSpace:
        src = self.action_space
        if src is None:
            return builtin_action_space()
        if isinstance(src, str):
            p = Path(src)
            if base_dir is not None and not p.is_absolute():
                p = base_dir / p
            return load_action_space(p)
        return ActionSpace.from_json(src)

    def sim_config(self, base_dir: Path | None = None) -> SimConfig:
        try:
            return SimConfig(
                rates=self.sector_rates,
                n_preambles=self.n_preambles,
                n_threshold=self.n_threshold,
                max_slots=self.max_slots,
                link=LinkParams(self.p_t_dbm, self.g_t_dbi, self.g_r_dbi, self.sigma_shadow_db,
                                self.gamma_db, self.pl_a, self.pl_b),
                array=ArrayConfig(self.d_over_lambda, self.n_elements),
                actions=self.actions(base_dir),
                d_min_km=self.d_min_km,
                d_max_km=self.d_max_km,
            )
        except BeamSetError as exc:
            raise ConfigError(f"action_space: {exc}") from None
        except (ValueError, OSError) as exc:
            raise ConfigError(str(exc)) from None

    def ddqn_config(self) -> DDQNConfig:
        scale = 1.0 / sum(self.sector_rates) if self.scale_state else 1.0
        return DDQNConfig(
            hidden=tuple(self.hidden),
            learning_rate=self.learning_rate,
            replay_capacity=self.replay_capacity,
            batch_size=self.batch_size,
            target_sync=self.target_sync,
            discount=self.discount,
            epsilon_start=self.epsilon_start,
            epsilon_min=self.epsilon_min,
            epsilon_decay=self.epsilon_decay,
            episodes=self.episodes,
            input_scale=scale,
        )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]

    def replace(self, **overrides) -> "RunConfig":
        return from_dict({**self.to_dict(), **overrides})


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _coerce(name: str, value):
    default = _FIELDS[name].default
    if value is None:
        return None
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{name} must be true or false, got {value!r}")
        return value
    if isinstance(default, int) or name == "n_elements":
        if isinstance(value, bool) or not (isinstance(value, int) or (isinstance(value, float) and value.is_integer())):
            raise ConfigError(f"{name} must be an integer, got {value!r}")
        return int(value)
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigError(f"{name} must be a finite number, got {value!r}")
        return float(value)
    return value


def from_dict(data: dict) -> RunConfig:
    unknown = sorted(set(data) - set(_FIELDS))
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    try:
        return RunConfig(**{k: _coerce(k, v) for k, v in data.items()})
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path | None, overrides: dict | None = None) -> RunConfig:
    """Built-in defaults, then the file, then ``overrides`` (CLI flags)."""
    data: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        if text.strip():
            try:
                data = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON: {exc}") from None
            if not isinstance(data, dict):
                raise ConfigError(f"{path}: top level must be an object")
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    cfg = from_dict(data)
    base = Path(path).parent if path else None
    # inline a file-based action space so the echoed config is self-contained
    space = cfg.sim_config(base).actions
    if cfg.action_space is not None:
        cfg = cfg.replace(action_space=space.to_json())
    return cfg
