"""Deterministic random-number streams derived from a single master seed."""

from __future__ import annotations

import zlib

import numpy as np


def _words(seed: int, tags: tuple) -> list[int]:
    words = [int(seed)]
    for tag in tags:
        if isinstance(tag, str):
            words.append(zlib.crc32(tag.encode("utf-8")))
        else:
            words.append(int(tag))
    return words


def seed_sequence(seed: int, *tags) -> np.random.SeedSequence:
    """Named sub-stream of a master seed; stable across runs and platforms."""
    return np.random.SeedSequence(_words(seed, tags))


def rng_for(seed: int, *tags) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(seed, *tags))
