"""Two-state, two-action deterministic MDP with a known optimal Q table.

From s0: action 0 goes to s1 with reward -1, action 1 ends with reward -3.
From s1: action 0 ends with reward -1, action 1 goes back to s0 with reward -2.
States are one-hot; each episode starts in a random state.
"""

import numpy as np

# (next state or None for terminal, reward)
TRANSITIONS = {
    (0, 0): (1, -1.0),
    (0, 1): (None, -3.0),
    (1, 0): (None, -1.0),
    (1, 1): (0, -2.0),
}


def value_iteration(gamma=1.0, sweeps=100):
    q = np.zeros((2, 2))
    for _ in range(sweeps):
        new = np.empty_like(q)
        for (s, a), (nxt, r) in TRANSITIONS.items():
            new[s, a] = r + (0.0 if nxt is None else gamma * q[nxt].max())
        q = new
    return q


def one_hot(s):
    v = np.zeros(2)
    v[s] = 1.0
    return v


class ToyEnv:
    state_dim = 2
    n_actions = 2

    def __init__(self, seed=0):
        self._rng = np.random.default_rng(seed)
        self.s = 0

    def reset(self, episode):
        self.s = int(self._rng.integers(2))
        return one_hot(self.s)

    def step(self, action):
        nxt, r = TRANSITIONS[(self.s, int(action))]
        if nxt is None:
            return np.zeros(2), r, True
        self.s = nxt
        return one_hot(nxt), r, False
