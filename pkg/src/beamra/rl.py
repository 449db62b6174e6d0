"""Double deep Q-learning with a small numpy MLP.

The value network maps a state vector to one value per action through two
ReLU hidden layers. Training follows the usual double-DQN recipe: the
prediction network picks the bootstrap action, the target network scores it,
and the target network is refreshed from the prediction network every
``target_sync`` iterations.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .rng import stream

log = logging.getLogger(__name__)


class TrainingAborted(RuntimeError):
    """The loss went non-finite."""


class QNetwork:
    """Fully connected ReLU network ``sizes[0] -> ... -> sizes[-1]`` with a linear head."""

    def __init__(self, sizes: Sequence[int], rng: np.random.Generator | None = None,
                 input_scale: float = 1.0):
        self.sizes = tuple(int(s) for s in sizes)
        if len(self.sizes) < 2:
            raise ValueError("need at least an input and an output layer")
        self.input_scale = float(input_scale)
        shapes = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            shapes += [(fan_in, fan_out), (fan_out,)]
        self.shapes = tuple(shapes)
        # one contiguous parameter vector; weights and biases are views into it
        self.flat = np.zeros(sum(math.prod(sh) for sh in shapes))
        self.weights = self._views(self.flat)[0::2]
        self.biases = self._views(self.flat)[1::2]
        if rng is not None:
            for w in self.weights:
                fan_in, fan_out = w.shape
                limit = math.sqrt(6.0 / (fan_in + fan_out))
                w[...] = rng.uniform(-limit, limit, size=w.shape)

    def _views(self, flat: np.ndarray) -> list[np.ndarray]:
        out, k = [], 0
        for sh in self.shapes:
            n = math.prod(sh)
            out.append(flat[k:k + n].reshape(sh))
            k += n
        return out

    @classmethod
    def glorot(cls, sizes: Sequence[int], seed: int, input_scale: float = 1.0) -> "QNetwork":
        return cls(sizes, stream(seed, "init"), input_scale)

    @property
    def params(self) -> list[np.ndarray]:
        return self._views(self.flat)

    @property
    def n_actions(self) -> int:
        return self.sizes[-1]

    def copy(self) -> "QNetwork":
        other = QNetwork(self.sizes, None, self.input_scale)
        other.load_from(self)
        return other

    def load_from(self, other: "QNetwork") -> None:
        if other.sizes != self.sizes:
            raise ValueError(f"layer sizes differ: {other.sizes} vs {self.sizes}")
        self.flat[...] = other.flat

    def forward(self, s: np.ndarray) -> np.ndarray:
        """Action values for one state (1-D) or a batch of states (2-D)."""
        h = np.asarray(s, dtype=float) * self.input_scale
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if k < last:
                h = np.maximum(h, 0.0)
        return h

    __call__ = forward

    def forward_train(self, s: np.ndarray):
        """Batch forward pass that also returns the layer inputs needed by :meth:`backward`."""
        h = np.asarray(s, dtype=float) * self.input_scale
        inputs = []
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(h)
            h = h @ w + b
            if k < last:
                h = np.maximum(h, 0.0)
        return h, inputs

    def backward(self, inputs: list[np.ndarray], dout: np.ndarray) -> np.ndarray:
        """Gradient of sum(dout * output) w.r.t. :attr:`flat`."""
        grad = np.empty_like(self.flat)
        views = self._views(grad)
        delta = dout
        for k in range(len(self.weights) - 1, -1, -1):
            x = inputs[k]
            np.matmul(x.T, delta, out=views[2 * k])
            np.sum(delta, axis=0, out=views[2 * k + 1])
            if k > 0:
                # inputs[k] is the ReLU output of layer k-1; its mask is where it is positive
                delta = (delta @ self.weights[k].T) * (x > 0)
        return grad


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: np.ndarray | None = None
    v: np.ndarray | None = None

    def update(self, param: np.ndarray, grad: np.ndarray) -> None:
        """One in-place Adam step on the flat parameter vector ``param``."""
        if self.m is None:
            self.m = np.zeros_like(param)
            self.v = np.zeros_like(param)
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        self.m *= self.beta1
        self.m += (1.0 - self.beta1) * grad
        self.v *= self.beta2
        self.v += (1.0 - self.beta2) * grad * grad
        param -= self.lr * (self.m / c1) / (np.sqrt(self.v / c2) + self.eps)


@dataclass(frozen=True)
class Experience:
    s: np.ndarray
    a: int
    r: float
    s_next: np.ndarray
    terminal: bool


@dataclass
class Batch:
    s: np.ndarray
    a: np.ndarray
    r: np.ndarray
    s_next: np.ndarray
    terminal: np.ndarray

    def __len__(self) -> int:
        return self.a.size

    @classmethod
    def of(cls, experiences: Sequence[Experience]) -> "Batch":
        return cls(
            np.array([e.s for e in experiences], dtype=float),
            np.array([e.a for e in experiences], dtype=np.int64),
            np.array([e.r for e in experiences], dtype=float),
            np.array([e.s_next for e in experiences], dtype=float),
            np.array([e.terminal for e in experiences], dtype=bool),
        )


class ReplayMemory:
    """Fixed-capacity FIFO of transitions backed by a ring buffer."""

    def __init__(self, capacity: int, state_dim: int):
        if capacity < 1:
            raise ValueError(f"capacity must be positive, got {capacity}")
        self.capacity = capacity
        self._s = np.zeros((capacity, state_dim))
        self._a = np.zeros(capacity, dtype=np.int64)
        self._r = np.zeros(capacity)
        self._s2 = np.zeros((capacity, state_dim))
        self._term = np.zeros(capacity, dtype=bool)
        self._seq = np.zeros(capacity, dtype=np.int64)
        self._next = 0
        self._size = 0
        self.pushed = 0

    def __len__(self) -> int:
        return self._size

    def push(self, s, a: int, r: float, s_next, terminal: bool) -> None:
        i = self._next
        self._s[i] = s
        self._a[i] = a
        self._r[i] = r
        self._s2[i] = s_next
        self._term[i] = terminal
        self._seq[i] = self.pushed
        self.pushed += 1
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sequence_numbers(self) -> np.ndarray:
        """Push order of stored items, oldest first."""
        if self._size < self.capacity:
            return self._seq[: self._size].copy()
        return np.roll(self._seq, -self._next)

    def sample_indices(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.choice(self._size, size=n, replace=False)

    def sample(self, n: int, rng: np.random.Generator) -> Batch:
        idx = self.sample_indices(n, rng)
        return Batch(self._s[idx], self._a[idx], self._r[idx], self._s2[idx], self._term[idx])


def td_targets(batch: Batch | Sequence[Experience], net: QNetwork, target_net: QNetwork,
               gamma: float, q_next: np.ndarray | None = None) -> np.ndarray:
    """Double-DQN targets; terminal transitions get no bootstrap term.

    ``q_next`` may carry the prediction network's values at ``s_next`` when
    they are already at hand.
    """
    if not isinstance(batch, Batch):
        batch = Batch.of(batch)
    if q_next is None:
        q_next = net.forward(batch.s_next)
    best = np.argmax(q_next, axis=1)
    boot = target_net.forward(batch.s_next)[np.arange(len(batch)), best]
    return batch.r + gamma * np.where(batch.terminal, 0.0, boot)


def loss_and_grad(net: QNetwork, batch: Batch, targets: np.ndarray, q: np.ndarray,
                  inputs: list[np.ndarray]) -> tuple[float, np.ndarray]:
    rows = np.arange(len(batch))
    err = targets - q[rows, batch.a]
    loss = float(np.mean(err * err))
    dout = np.zeros_like(q)
    dout[rows, batch.a] = -2.0 * err / len(batch)
    return loss, net.backward(inputs, dout)


def train_step(net: QNetwork, target_net: QNetwork, adam: AdamState,
               batch: Batch | Sequence[Experience], gamma: float = 1.0) -> float:
    """One Adam update on the mean squared TD error; returns the loss before the update."""
    if not isinstance(batch, Batch):
        batch = Batch.of(batch)
    n = len(batch)
    # s and s_next through the prediction network in one pass
    q_both, inputs_both = net.forward_train(np.concatenate([batch.s, batch.s_next]))
    y = td_targets(batch, net, target_net, gamma, q_next=q_both[n:])
    loss, grad = loss_and_grad(net, batch, y, q_both[:n], [x[:n] for x in inputs_both])
    if not math.isfinite(loss):
        raise TrainingAborted(
            f"non-finite loss {loss} at optimizer step {adam.t + 1}; "
            f"targets in [{np.min(y)}, {np.max(y)}]"
        )
    adam.update(net.flat, grad)
    return loss


def select_action(net: QNetwork, s: np.ndarray, epsilon: float, rng: np.random.Generator,
                  q: np.ndarray | None = None) -> int:
    """Epsilon-greedy choice; greedy ties go to the lowest index."""
    if q is None:
        q = net.forward(s)
    if rng.random() < epsilon:
        return int(rng.integers(q.size))
    return int(np.argmax(q))


def greedy_policy(net: QNetwork):
    def policy(s: np.ndarray) -> int:
        return int(np.argmax(net.forward(s)))
    return policy


class Env(Protocol):
    state_dim: int
    n_actions: int

    def reset(self, episode: int) -> np.ndarray: ...

    def step(self, action: int) -> tuple[np.ndarray, float, bool]: ...


@dataclass(frozen=True)
class DDQNConfig:
    hidden: tuple[int, ...] = (64, 64)
    learning_rate: float = 0.001
    replay_capacity: int = 1200
    batch_size: int = 64
    target_sync: int = 16
    discount: float = 1.0
    epsilon_start: float = 1.0
    epsilon_min: float = 0.01
    epsilon_decay: float = 0.99
    episodes: int = 20000
    input_scale: float = 1.0

    def __post_init__(self):
        for name in ("epsilon_start", "epsilon_min", "epsilon_decay", "discount"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        for name in ("replay_capacity", "batch_size", "target_sync", "episodes"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.batch_size > self.replay_capacity:
            raise ValueError("batch_size cannot exceed replay_capacity")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")


def epsilon_after(k: int, cfg: DDQNConfig = DDQNConfig()) -> float:
    """Exploration rate after ``k`` iterations."""
    return max(cfg.epsilon_start * cfg.epsilon_decay ** k, cfg.epsilon_min)


@dataclass
class EpisodeRecord:
    episode: int
    length: int
    loss_mean: float
    ret: float
    avg_action_value: float
    epsilon: float
    truncated: bool = False


@dataclass
class TrainingLog:
    records: list[EpisodeRecord] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["episode", "length", "loss_mean", "return", "avg_action_value", "epsilon", "truncated"])
        for r in self.records:
            w.writerow([r.episode, r.length, repr(r.loss_mean), repr(r.ret),
                        repr(r.avg_action_value), repr(r.epsilon), int(r.truncated)])
        return buf.getvalue()


class Trainer:
    """Stateful DDQN loop; :meth:`run_episode` plays and learns one episode."""

    def __init__(self, env: Env, cfg: DDQNConfig, seed: int):
        self.env = env
        self.cfg = cfg
        self.seed = seed
        sizes = (env.state_dim, *cfg.hidden, env.n_actions)
        self.net = QNetwork.glorot(sizes, seed, cfg.input_scale)
        self.target = self.net.copy()
        self.adam = AdamState(lr=cfg.learning_rate)
        self.memory = ReplayMemory(cfg.replay_capacity, env.state_dim)
        self.epsilon = cfg.epsilon_start
        self.iteration = 0
        self.train_steps = 0
        self.log = TrainingLog()
        self._egreedy = stream(seed, "train/egreedy")
        self._replay = stream(seed, "train/replay")

    def iterate(self, s: np.ndarray) -> tuple[np.ndarray, float, bool, np.ndarray, float | None]:
        """One environment step plus (after warm-up) one learning step."""
        q = self.net.forward(s)
        a = select_action(self.net, s, self.epsilon, self._egreedy, q)
        s2, r, done = self.env.step(a)
        self.memory.push(s, a, r, s2, done)
        loss = None
        if len(self.memory) >= self.cfg.batch_size:
            batch = self.memory.sample(self.cfg.batch_size, self._replay)
            loss = train_step(self.net, self.target, self.adam, batch, self.cfg.discount)
            self.train_steps += 1
        self.iteration += 1
        self.epsilon = max(self.epsilon * self.cfg.epsilon_decay, self.cfg.epsilon_min)
        if self.iteration % self.cfg.target_sync == 0:
            self.target.load_from(self.net)
        return s2, r, done, q, loss

    def run_episode(self, episode: int) -> EpisodeRecord:
        s = self.env.reset(episode)
        losses, qsum, ret, length = [], 0.0, 0.0, 0
        done = False
        while not done:
            s, r, done, q, loss = self.iterate(s)
            qsum += float(q.mean())
            ret += r
            length += 1
            if loss is not None:
                losses.append(loss)
        rec = EpisodeRecord(
            episode, length, float(np.mean(losses)) if losses else math.nan, ret,
            qsum / length, self.epsilon, bool(getattr(self.env, "truncated", False)),
        )
        self.log.records.append(rec)
        return rec


def train(env: Env, cfg: DDQNConfig, seed: int, progress_every: int = 0) -> tuple[QNetwork, TrainingLog]:
    trainer = Trainer(env, cfg, seed)
    for episode in range(cfg.episodes):
        rec = trainer.run_episode(episode)
        if progress_every and (episode + 1) % progress_every == 0:
            log.info("episode %d len=%d loss=%.3f return=%.1f eps=%.3f",
                     episode + 1, rec.length, rec.loss_mean, rec.ret, rec.epsilon)
    return trainer.net, trainer.log


CHECKPOINT_FORMAT = "beamra-qnetwork/1"


def checkpoint_json(net: QNetwork, seed: int, config_hash: str) -> str:
    return json.dumps({
        "format": CHECKPOINT_FORMAT,
        "sizes": list(net.sizes),
        "layer_shapes": [list(sh) for sh in net.shapes],
        "input_scale": net.input_scale,
        "seed": seed,
        "config_hash": config_hash,
        "params": net.flat.tolist(),
    }) + "\n"


def load_checkpoint(text: str, expect_sizes: Sequence[int] | None = None) -> QNetwork:
    """Rebuild a network from :func:`checkpoint_json` output, checking its shape."""
    data = json.loads(text)
    if data.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"not a network checkpoint (format={data.get('format')!r})")
    net = QNetwork(data["sizes"], None, data["input_scale"])
    if [list(sh) for sh in net.shapes] != data["layer_shapes"]:
        raise ValueError("checkpoint layer shapes are inconsistent with its layer sizes")
    if expect_sizes is not None and tuple(expect_sizes) != net.sizes:
        raise ValueError(f"checkpoint layer sizes {net.sizes} do not match the configuration {tuple(expect_sizes)}")
    params = np.asarray(data["params"], dtype=float)
    if params.shape != net.flat.shape:
        raise ValueError(f"checkpoint holds {params.size} parameters, expected {net.flat.size}")
    net.flat[...] = params
    return net
