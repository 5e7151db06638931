"""Deterministic random number generation.

Every stochastic component in the toolkit draws from a numpy PCG64
generator seeded through the splitmix64 mixing function, so corpora,
training runs and samples reproduce bit-for-bit given the same seeds.

Seed derivation scheme (documented so corpora can be regenerated):

* stream i of base seed s is seeded with ``splitmix64(s, i)``, the i-th
  output of a splitmix64 sequence whose state starts at s;
* the per-stream seed feeds ``numpy.random.Generator(PCG64(seed))``.
"""

from __future__ import annotations

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(seed: int, index: int = 0) -> int:
    """Return the ``index``-th output of the splitmix64 sequence for ``seed``."""
    z = (seed + (index + 1) * _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def make_rng(seed: int, index: int = 0) -> np.random.Generator:
    """Deterministic generator for stream ``index`` of ``seed``."""
    return np.random.Generator(np.random.PCG64(splitmix64(seed, index)))


def derive_seed(seed: int, index: int) -> int:
    """Per-item seed for item ``index`` of a corpus built from ``seed``."""
    return splitmix64(seed, index)
