"""Seed discipline: every stochastic task draws from its own derived stream."""

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(master_seed: int, stage_label: str, task_index: int = 0) -> int:
    """Mix ``(master_seed, stage_label, task_index)`` into a 64-bit seed.

    The triple is hashed with BLAKE2b (8-byte digest) and the digest is passed
    through one SplitMix64 finalizer round.  Distinct triples give independent
    streams, and the result does not depend on call order, so parallel tasks
    stay reproducible.
    """
    payload = f"{int(master_seed) & _MASK64}\x1f{stage_label}\x1f{int(task_index)}".encode()
    digest = hashlib.blake2b(payload, digest_size=8).digest()
    return _splitmix64(int.from_bytes(digest, "little"))


def make_rng(master_seed: int, stage_label: str, task_index: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(master_seed, stage_label, task_index)))
