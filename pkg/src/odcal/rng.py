"""Reproducible random-stream derivation.

All stochastic code in this package draws from ``numpy.random.Generator``
instances backed by PCG64. Streams are derived through ``SeedSequence``
entropy tuples so any (master seed, context) pair maps to a documented,
platform-stable stream. Parallel workers never share a generator: each
replicate or task gets its own stream derived here.
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF


def make_rng(seed: int | np.random.SeedSequence) -> np.random.Generator:
    """Generator seeded from an integer or a prepared SeedSequence."""
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.PCG64(seed))


def derive_rng(*entropy: int) -> np.random.Generator:
    """Generator for the stream identified by an entropy tuple.

    The tuple is fed verbatim to ``SeedSequence``; equal tuples give
    bit-identical streams, distinct tuples give independent ones.
    """
    ss = np.random.SeedSequence(entropy=tuple(int(e) & MASK64 for e in entropy))
    return np.random.Generator(np.random.PCG64(ss))


def genome_tag(values: np.ndarray) -> int:
    """Stable 64-bit identity tag for a parameter vector.

    Hashes the raw float64 bytes, so the tag depends only on the numeric
    content. Used to key replicate streams to the genome under evaluation:
    re-evaluating the same genome with the same master seed replays the
    same Monte Carlo draws.
    """
    raw = np.ascontiguousarray(values, dtype=np.float64).tobytes()
    return int.from_bytes(hashlib.blake2b(raw, digest_size=8).digest(), "big")


def replicate_rngs(master_seed: int, tag: int, n: int) -> list[np.random.Generator]:
    """One independent stream per Monte Carlo replicate.

    Stream r is derived from the entropy tuple (master_seed, tag, r).
    """
    return [derive_rng(master_seed, tag, r) for r in range(n)]


def subseed(master_seed: int, context: int) -> int:
    """Deterministic 64-bit sub-seed for one role under a master seed.

    Uses SeedSequence((master_seed, context)) so different contexts give
    unrelated seeds that are still plain, recordable integers.
    """
    ss = np.random.SeedSequence(entropy=(int(master_seed) & MASK64, int(context)))
    return int(ss.generate_state(1, np.uint64)[0])


def fresh_seed() -> int:
    """Draw a 64-bit seed from OS entropy (used when no --seed is given)."""
    return int(np.random.SeedSequence().entropy) & MASK64
