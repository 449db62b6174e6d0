"""Labeled random streams derived from a single 64-bit seed.

Every subsystem draws from its own stream, keyed by a text label and an
optional tuple of integer indices (for example the episode number). Streams
are Philox generators seeded through ``numpy.random.SeedSequence`` with the
label folded into the spawn key, so two streams never share state and adding
a new consumer never shifts the numbers another consumer sees.

Labels in use:

    init        network weight initialisation
    spawn       device populations at the start of an episode
    preamble    per-slot preamble choices
    shadowing   per-attempt shadow fading draws
    egreedy     exploration coin flips and random actions
    replay      minibatch index sampling
    policy      baseline policies that randomise (Random-BU)

Training and evaluation prefix these with ``train/`` and ``eval/``.
"""

from __future__ import annotations

import zlib

import numpy as np

SEED_MASK = (1 << 64) - 1


def _label_key(label: str) -> int:
    # crc32 is stable across processes, unlike hash().
    return zlib.crc32(label.encode("utf-8"))


def stream(seed: int, label: str, *index: int) -> np.random.Generator:
    """Return the generator for ``(seed, label, *index)``."""
    if seed < 0 or seed > SEED_MASK:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(_label_key(label), *index))
    return np.random.Generator(np.random.Philox(ss))


class EpisodeStreams:
    """The three generators an episode consumes: spawn, preamble and shadowing."""

    __slots__ = ("spawn", "preamble", "shadowing")

    def __init__(self, spawn: np.random.Generator, preamble: np.random.Generator,
                 shadowing: np.random.Generator):
        self.spawn = spawn
        self.preamble = preamble
        self.shadowing = shadowing

    @classmethod
    def derive(cls, seed: int, prefix: str, episode: int) -> "EpisodeStreams":
        return cls(
            stream(seed, f"{prefix}/spawn", episode),
            stream(seed, f"{prefix}/preamble", episode),
            stream(seed, f"{prefix}/shadowing", episode),
        )

    @classmethod
    def from_generator(cls, rng: np.random.Generator) -> "EpisodeStreams":
        """Share one generator across all three roles (tests and ad-hoc use)."""
        return cls(rng, rng, rng)
