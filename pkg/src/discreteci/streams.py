"""Counter-based random streams.

Every stream is keyed by ``(seed, *key)`` and backed by a Philox generator,
so any replicate or trial can be regenerated on its own, in any order and on
any worker, without touching the others.
"""

from __future__ import annotations

import os
import secrets

import numpy as np

MAX_SEED = 2**64 - 1
WORKERS_ENV = "DISCRETECI_WORKERS"


def check_seed(seed) -> int:
    if isinstance(seed, bool) or int(seed) != seed or not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must be an integer in [0, 2**64), got {seed!r}")
    return int(seed)


def fresh_seed() -> int:
    """A 64-bit seed from OS entropy."""
    return secrets.randbits(64)


def stream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *key: int) -> int:
    """A 64-bit child seed for ``key``; independent of every other key."""
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}")
    return n
