"""Seed derivation and counter-based random draws.

Every random quantity in the package is addressed, never streamed:

* ``derive_key(seed, *labels)`` hashes a master seed together with a tuple of
  labels (strings or ints) into a 64-bit key with BLAKE2b.  Phases, candidates
  and episodes each get their own label, so changing one label never perturbs
  another phase's stream and results do not depend on evaluation order.
* ``uniform(key, step, robot, channel)`` is a pure function of its arguments:
  the counter ``(step, robot, channel)`` is packed into 64 bits, added to the
  key with a Weyl increment and passed through the SplitMix64 finalizer.  It is
  compiled with numba so the simulator kernels can call it directly.
* ``generator(seed, *labels)`` returns a ``numpy.random.Generator`` backed by a
  Philox bit generator keyed by ``derive_key`` for everything that runs in
  plain Python (candidate sampling, Dirichlet draws).
"""
from __future__ import annotations

import hashlib

import numpy as np
from numba import njit, uint64

_GOLDEN = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1

# channels used by the simulator for per-(step, robot) draws
SLIP = 0
ACTION = 1
NODE = 2
GATE = 3
EDGE = 4
FLAG = 7


def derive_key(seed: int, *labels) -> int:
    """Hash ``seed`` and ``labels`` into an unsigned 64-bit key."""
    h = hashlib.blake2b(digest_size=8)
    h.update(int(seed).to_bytes(16, "little", signed=True))
    for label in labels:
        if isinstance(label, (int, np.integer)):
            h.update(b"i" + int(label).to_bytes(16, "little", signed=True))
        else:
            h.update(b"s" + str(label).encode("utf-8") + b"\x00")
    return int.from_bytes(h.digest(), "little")


def generator(seed: int, *labels) -> np.random.Generator:
    key = derive_key(seed, *labels)
    return np.random.Generator(np.random.Philox(key=key))


@njit(cache=True)
def _splitmix(z):
    z = (z ^ (z >> uint64(30))) * uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> uint64(27))) * uint64(0x94D049BB133111EB)
    return z ^ (z >> uint64(31))


@njit(cache=True)
def episode_key(base_key, episode):
    """Key of episode ``episode`` under ``base_key``."""
    return _splitmix(uint64(base_key) ^ _splitmix(uint64(episode) + uint64(_GOLDEN)))


@njit(cache=True)
def uniform(key, step, robot, channel):
    """U[0, 1) draw addressed by ``(key, step, robot, channel)``."""
    ctr = (uint64(step) * uint64(64) + uint64(robot)) * uint64(16) + uint64(channel)
    z = _splitmix(uint64(key) + (ctr + uint64(1)) * uint64(_GOLDEN))
    return (z >> uint64(11)) * (1.0 / 9007199254740992.0)


def to_key(value: int) -> np.uint64:
    return np.uint64(int(value) & _MASK64)
