"""The three compared beam schemes and the evaluation harness.

Static-BE always uses equal-width beams, Random-BU draws one of the
predefined actions uniformly, and DDQN-BU acts greedily on a trained value
network.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .geometry import ActionSpace, BeamSet, BeamSetError, equal_beams, validate_beam_set
from .metrics import delay_cdf
from .rl import QNetwork
from .rng import EpisodeStreams, stream
from .sim import EpisodeLog, SimConfig, run_episode

STATIC = "static"
RANDOM = "random"
GREEDY = "greedy"

SCHEME_NAMES = {STATIC: "Static-BE", RANDOM: "Random-BU", GREEDY: "DDQN-BU"}


@dataclass
class Policy:
    """A beam-selection scheme.

    ``decide`` returns (action id, beam set); the static scheme reports
    action id -1 because its beam set is not part of the action space.
    """

    kind: str
    beam_set: BeamSet | None = None
    space: ActionSpace | None = None
    net: QNetwork | None = None
    seed: int = 0
    per_episode: bool = False
    _rng: np.random.Generator | None = field(default=None, repr=False)
    _held: int | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind == STATIC:
            v = validate_beam_set(self.beam_set)
            if not v:
                raise BeamSetError(f"static beam set violates {v.constraint}: {v.message}")
        elif self.kind == RANDOM:
            if self.space is None or len(self.space) < 1:
                raise ValueError("random policy needs a non-empty action space")
        elif self.kind == GREEDY:
            if self.net is None or self.space is None:
                raise ValueError("greedy policy needs a network and an action space")
            if self.net.n_actions != len(self.space):
                raise ValueError(
                    f"network has {self.net.n_actions} outputs but the action space has {len(self.space)} actions"
                )
        else:
            raise ValueError(f"unknown policy kind {self.kind!r}")

    @property
    def name(self) -> str:
        return SCHEME_NAMES[self.kind]

    def begin_episode(self, episode: int) -> None:
        if self.kind == RANDOM:
            self._rng = stream(self.seed, "eval/policy", episode)
            self._held = None

    def decide(self, state: np.ndarray) -> tuple[int, BeamSet]:
        if self.kind == STATIC:
            return -1, self.beam_set
        if self.kind == RANDOM:
            if self._rng is None:
                self.begin_episode(0)
            if self._held is None or not self.per_episode:
                self._held = int(self._rng.integers(len(self.space)))
            return self._held, self.space[self._held]
        k = int(np.argmax(self.net.forward(state)))
        return k, self.space[k]


def static_be(n_beams: int) -> Policy:
    return Policy(STATIC, beam_set=equal_beams(n_beams))


def random_bu(space: ActionSpace, seed: int, per_episode: bool = False) -> Policy:
    return Policy(RANDOM, space=space, seed=seed, per_episode=per_episode)


def ddqn_bu(net: QNetwork, space: ActionSpace) -> Policy:
    return Policy(GREEDY, space=space, net=net)


@dataclass
class DelayStats:
    scheme: str
    lambda_total: float
    rho: float | None
    n_episodes: int
    delays: np.ndarray                  # pooled per-device delays, non-truncated episodes
    episode_totals: list[int]           # total delay per non-truncated episode
    episode_successes: list[int]
    returns: list[float]
    truncated_episodes: int

    @property
    def mean_delay(self) -> float:
        return float(self.mean_delay_exact())

    def mean_delay_exact(self) -> Fraction:
        n = sum(self.episode_successes)
        if n == 0:
            raise ZeroDivisionError("no connected devices in any complete episode")
        return Fraction(sum(self.episode_totals), n)

    def mean_delay_pooled(self) -> Fraction:
        return Fraction(int(self.delays.sum()), int(self.delays.size))

    def stderr(self) -> float:
        """Standard error of the mean delay, from per-episode ratio estimates."""
        tot = np.asarray(self.episode_totals, dtype=float)
        n = np.asarray(self.episode_successes, dtype=float)
        k = tot.size
        if k < 2:
            return float("nan")
        mean = tot.sum() / n.sum()
        resid = tot - mean * n
        return float(np.sqrt(np.sum(resid ** 2) / (k * (k - 1))) / n.mean())

    def cdf(self) -> list[tuple[int, float]]:
        return delay_cdf(self.delays.tolist())

    def fraction_within(self, slots: int) -> float:
        return float(np.count_nonzero(self.delays <= slots) / self.delays.size)

    def to_json(self) -> str:
        return json.dumps({
            "scheme": self.scheme,
            "lambda": self.lambda_total,
            "rho": self.rho,
            "n_episodes": self.n_episodes,
            "mean_delay_slots": self.mean_delay,
            "cdf": [[d, f] for d, f in self.cdf()],
            "truncated_episodes": self.truncated_episodes,
        }, indent=2) + "\n"


def _episode_logs(policy: Policy, cfg: SimConfig, seed: int, episodes: range) -> list[EpisodeLog]:
    return [run_episode(policy, cfg, EpisodeStreams.derive(seed, "eval", e), e) for e in episodes]


def _chunks(n: int, jobs: int) -> list[range]:
    step = -(-n // jobs)
    return [range(i, min(i + step, n)) for i in range(0, n, step)]


def evaluate(policy: Policy, cfg: SimConfig, n_episodes: int, seed: int, jobs: int = 1,
             lambda_total: float | None = None, rho: float | None = None) -> DelayStats:
    """Run ``n_episodes`` independent episodes and pool the delays.

    Episode ``e`` always sees the same device population for a given seed,
    whatever the policy or job count, so schemes are compared on identical
    draws.
    """
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            parts = pool.map(_episode_logs, *zip(*[(policy, cfg, seed, r) for r in _chunks(n_episodes, jobs)]))
            logs = [lg for part in parts for lg in part]
    else:
        logs = _episode_logs(policy, cfg, seed, range(n_episodes))
    complete = [lg for lg in logs if not lg.truncated]
    delays = np.concatenate([lg.device_delays() for lg in complete]) if complete else np.zeros(0, np.int64)
    return DelayStats(
        scheme=policy.name,
        lambda_total=float(sum(cfg.rates)) if lambda_total is None else lambda_total,
        rho=rho,
        n_episodes=n_episodes,
        delays=delays,
        episode_totals=[lg.total_delay_by_slot() for lg in complete],
        episode_successes=[lg.n_succeeded for lg in complete],
        returns=[lg.episode_return for lg in logs],
        truncated_episodes=len(logs) - len(complete),
    )
