"""Episodic random-access engine.

An episode starts with a Poisson burst of devices in every sector at slot 0.
In each slot the base station applies one beam set, every still-active
device picks a preamble, and a device connects when it is the only one using
its preamble in its serving beam and its connection request clears the
decode threshold against same-preamble devices in other beams. Devices that
fail retry in the next slot.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Protocol

import numpy as np

from .antenna import ArrayConfig, beam_gains_db
from .channel import MIN_DISTANCE_KM, LinkParams, decode_many, path_loss
from .geometry import ActionSpace, BeamSet, builtin_action_space, sector_arc, sector_of, serving_beams
from .rng import EpisodeStreams


class EpisodeOver(RuntimeError):
    """Raised when stepping an episode that already terminated."""


def rates_from_ratio(lambda_total: float, rho: float, n_sectors: int) -> tuple[float, ...]:
    """Per-sector rates with sector 0 hot and the rest sharing the remainder evenly.

    ``rho`` is the hot rate over the combined rate of the other sectors.
    """
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    if n_sectors < 2:
        raise ValueError(f"need at least 2 sectors, got {n_sectors}")
    high = lambda_total * rho / (rho + 1)
    low = lambda_total / ((n_sectors - 1) * (rho + 1))
    return (high,) + (low,) * (n_sectors - 1)


@dataclass(frozen=True)
class SimConfig:
    rates: tuple[float, ...]
    n_preambles: int = 48
    n_threshold: int = 0
    max_slots: int = 200
    link: LinkParams = field(default_factory=LinkParams)
    array: ArrayConfig = field(default_factory=ArrayConfig)
    actions: ActionSpace = field(default_factory=builtin_action_space)
    d_min_km: float = MIN_DISTANCE_KM
    d_max_km: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        if len(self.rates) < 1:
            raise ValueError("need at least one sector")
        if any(r < 0 for r in self.rates) or not sum(self.rates) > 0:
            raise ValueError(f"rates must be >= 0 with a positive sum, got {self.rates}")
        if self.n_preambles < 1:
            raise ValueError(f"n_preambles must be >= 1, got {self.n_preambles}")
        if not 0 <= self.n_threshold < sum(self.rates):
            raise ValueError(
                f"n_threshold must lie in [0, expected population {sum(self.rates):g}), got {self.n_threshold}"
            )
        if self.max_slots < 1:
            raise ValueError(f"max_slots must be >= 1, got {self.max_slots}")
        if not 0 < self.d_min_km <= self.d_max_km:
            raise ValueError(f"need 0 < d_min_km <= d_max_km, got {self.d_min_km}, {self.d_max_km}")

    @classmethod
    def from_ratio(cls, lambda_total: float, rho: float, n_sectors: int = 6, **kw) -> "SimConfig":
        return cls(rates=rates_from_ratio(lambda_total, rho, n_sectors), **kw)

    @property
    def n_sectors(self) -> int:
        return len(self.rates)

    @property
    def n_beams(self) -> int:
        return self.actions.n_beams

    @property
    def n_actions(self) -> int:
        return len(self.actions)


@dataclass(frozen=True)
class Device:
    theta: float
    d_km: float
    sector: int
    active: bool
    arrival_slot: int
    success_slot: int | None


class EpisodeState:
    """Device roster of one episode, stored column-wise."""

    def __init__(self, theta: np.ndarray, d_km: np.ndarray, n_sectors: int, link: LinkParams):
        self.theta = np.asarray(theta, dtype=float)
        self.d_km = np.asarray(d_km, dtype=float)
        self.n_sectors = n_sectors
        self.sector = sector_of(self.theta, n_sectors) if self.theta.size else np.zeros(0, np.int64)
        self.success_slot = np.full(self.theta.size, -1, dtype=np.int64)
        self.slot = 0
        self.terminal = False
        self.truncated = False
        # budget minus path loss; shadowing is added per attempt
        self.base_dbm = link.budget - path_loss(self.d_km, link) if self.theta.size else np.zeros(0)
        self._views: dict[BeamSet, tuple[np.ndarray, np.ndarray]] = {}

    @property
    def size(self) -> int:
        return self.theta.size

    @property
    def active(self) -> np.ndarray:
        return self.success_slot < 0

    @property
    def n_active(self) -> int:
        return int(np.count_nonzero(self.success_slot < 0))

    @property
    def counts(self) -> np.ndarray:
        return np.bincount(self.sector[self.active], minlength=self.n_sectors)

    def devices(self) -> list[Device]:
        return [
            Device(float(t), float(d), int(j), s < 0, 0, None if s < 0 else int(s))
            for t, d, j, s in zip(self.theta, self.d_km, self.sector, self.success_slot)
        ]

    def beam_view(self, bs: BeamSet, array: ArrayConfig) -> tuple[np.ndarray, np.ndarray]:
        """Serving beam of every device and the (n_beams, n_devices) gain matrix in dB."""
        view = self._views.get(bs)
        if view is None:
            view = (serving_beams(bs, self.theta), beam_gains_db(bs, self.theta, array))
            self._views[bs] = view
        return view


def spawn_episode(cfg: SimConfig, rng: np.random.Generator) -> EpisodeState:
    """Draw a non-empty device population: Poisson counts per sector, uniform angle and distance."""
    rates = np.asarray(cfg.rates)
    while True:
        n = rng.poisson(rates)
        if n.sum() > 0:
            break
    thetas = []
    for j, nj in enumerate(n):
        start, width = sector_arc(j, cfg.n_sectors)
        thetas.append(np.mod(start + width * rng.random(nj), 2 * np.pi))
    theta = np.concatenate(thetas)
    # np.mod can return 2pi for tiny negative inputs
    theta[theta >= 2 * np.pi] = 0.0
    d = rng.uniform(cfg.d_min_km, cfg.d_max_km, size=theta.size)
    return EpisodeState(theta, d, cfg.n_sectors, cfg.link)


def observe(ep: EpisodeState) -> np.ndarray:
    """Per-sector counts of active devices, as floats."""
    return ep.counts.astype(float)


def resolve_slot(serving: np.ndarray, gains_db: np.ndarray, base_dbm: np.ndarray,
                 preambles: np.ndarray, chi: np.ndarray, gamma: float) -> np.ndarray:
    """Success mask for one slot of contending devices.

    ``serving``, ``base_dbm``, ``preambles`` and ``chi`` are per contending
    device; ``gains_db`` is (n_beams, n_devices). Devices sharing both beam and
    preamble all fail. A device alone on its (beam, preamble) pair is decoded
    against every same-preamble device of other beams, each seen through the
    victim's beam.
    """
    n_beams = gains_db.shape[0]
    n = serving.size
    if n == 0:
        return np.zeros(0, dtype=bool)
    # relabel the preambles in use as 0..k-1 so the tables stay small however many exist
    used, pre = np.unique(preambles, return_inverse=True)
    k = used.size
    key = serving * k + pre
    single = np.bincount(key, minlength=n_beams * k)[key] == 1
    rx = (base_dbm + chi)[None, :] + gains_db
    lin = 10.0 ** (rx / 10.0)
    other = np.empty((n_beams, k))
    for b in range(n_beams):
        other[b] = np.bincount(pre, weights=np.where(serving != b, lin[b], 0.0), minlength=k)
    victims = np.flatnonzero(single)
    vb = serving[victims]
    signal = rx[vb, victims]
    with np.errstate(divide="ignore"):
        interference = 10.0 * np.log10(other[vb, pre[victims]])
    ok = np.zeros(n, dtype=bool)
    ok[victims] = decode_many(signal, interference, gamma)
    return ok


def step(ep: EpisodeState, action: BeamSet, cfg: SimConfig, streams: EpisodeStreams):
    """Run one access slot under ``action``.

    Returns (next state vector, reward, terminal); the reward is minus the
    number of devices still unconnected after the slot.
    """
    if ep.terminal:
        raise EpisodeOver("episode already terminated")
    idx = np.flatnonzero(ep.active)
    serving, gains = ep.beam_view(action, cfg.array)
    pre = streams.preamble.integers(cfg.n_preambles, size=idx.size)
    chi = streams.shadowing.normal(0.0, cfg.link.sigma_shadow, size=idx.size)
    ok = resolve_slot(serving[idx], gains[:, idx], ep.base_dbm[idx], pre, chi,
                      cfg.link.gamma)
    ep.success_slot[idx[ok]] = ep.slot
    remaining = idx.size - int(np.count_nonzero(ok))
    ep.slot += 1
    if remaining <= cfg.n_threshold:
        ep.terminal = True
    elif ep.slot >= cfg.max_slots:
        ep.terminal = True
        ep.truncated = True
    return observe(ep), -float(remaining), ep.terminal


class Policy(Protocol):
    def begin_episode(self, episode: int) -> None: ...

    def decide(self, state: np.ndarray) -> tuple[int, BeamSet]: ...


@dataclass
class EpisodeLog:
    states: list[list[int]]          # pre-step counts, one per slot
    action_ids: list[int]
    rewards: list[float]
    success_slots: np.ndarray        # -1 for devices never connected
    final_counts: list[int]
    truncated: bool

    @property
    def length(self) -> int:
        return len(self.rewards)

    @property
    def n_initial(self) -> int:
        return int(self.success_slots.size)

    @property
    def n_final(self) -> int:
        return int(sum(self.final_counts))

    @property
    def n_succeeded(self) -> int:
        return self.n_initial - self.n_final

    @property
    def episode_return(self) -> float:
        return float(sum(self.rewards))

    def device_delays(self) -> np.ndarray:
        """Access delay in slots of every connected device; connecting in the first slot counts 1."""
        s = self.success_slots
        return s[s >= 0] + 1

    def total_delay_by_slot(self) -> int:
        """Sum over slots of the connected-eventually devices still waiting at that slot."""
        return int(sum(sum(c) - self.n_final for c in self.states))

    def total_delay_by_device(self) -> int:
        return int(self.device_delays().sum())

    def failed_attempts(self) -> int:
        """Sum over devices of slots after which they were still unconnected."""
        s = self.success_slots
        return int(s[s >= 0].sum() + self.length * np.count_nonzero(s < 0))

    def average_delay(self) -> Fraction:
        """Total delay over the number of devices that connected, as an exact fraction."""
        if self.n_succeeded == 0:
            raise ZeroDivisionError("no device connected in this episode")
        return Fraction(self.total_delay_by_slot(), self.n_succeeded)

    def to_jsonl(self) -> str:
        lines = [
            json.dumps({"t": t, "state": s, "action_id": a, "reward": r})
            for t, (s, a, r) in enumerate(zip(self.states, self.action_ids, self.rewards))
        ]
        lines.append(json.dumps({"device_delays": self.device_delays().tolist(),
                                 "truncated": self.truncated}))
        return "\n".join(lines) + "\n"


def run_episode(policy: Policy, cfg: SimConfig, streams: EpisodeStreams, episode: int = 0) -> EpisodeLog:
    ep = spawn_episode(cfg, streams.spawn)
    policy.begin_episode(episode)
    states, actions, rewards = [], [], []
    state = observe(ep)
    while not ep.terminal:
        action_id, bs = policy.decide(state)
        states.append(ep.counts.tolist())
        actions.append(int(action_id))
        state, reward, _ = step(ep, bs, cfg, streams)
        rewards.append(reward)
    return EpisodeLog(states, actions, rewards, ep.success_slot.copy(), ep.counts.tolist(), ep.truncated)


class RandomAccessEnv:
    """Action-index interface over the engine, one fresh population per episode."""

    def __init__(self, cfg: SimConfig, seed: int, prefix: str = "train"):
        self.cfg = cfg
        self.seed = seed
        self.prefix = prefix
        self.ep: EpisodeState | None = None
        self._streams: EpisodeStreams | None = None

    @property
    def state_dim(self) -> int:
        return self.cfg.n_sectors

    @property
    def n_actions(self) -> int:
        return self.cfg.n_actions

    def reset(self, episode: int) -> np.ndarray:
        self._streams = EpisodeStreams.derive(self.seed, self.prefix, episode)
        self.ep = spawn_episode(self.cfg, self._streams.spawn)
        return observe(self.ep)

    def step(self, action: int):
        return step(self.ep, self.cfg.actions[action], self.cfg, self._streams)

    @property
    def truncated(self) -> bool:
        return self.ep is not None and self.ep.truncated
