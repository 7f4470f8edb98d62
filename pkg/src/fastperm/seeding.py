"""Deterministic random streams keyed by (master seed, labels...).

Every independent unit of work (a feature, a replicate) gets its own
generator derived from the master seed and a tuple of keys, so results do
not depend on scheduling or worker count.
"""

import hashlib
import os

import numpy as np

from .errors import DomainError

ENV_SEED = "FASTPERM_SEED"
DEFAULT_SEED = 20240101


def _key_int(key):
    if isinstance(key, (int, np.integer)) and key >= 0:
        return int(key)
    digest = hashlib.sha256(str(key).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def derive_seed(master_seed, *keys):
    """A 63-bit integer seed determined by the master seed and keys."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(_key_int(k) for k in keys))
    return int(ss.generate_state(2, dtype=np.uint32).view(np.uint64)[0] >> np.uint64(1))


def make_rng(seed):
    return np.random.Generator(np.random.PCG64(int(seed)))


def default_master_seed():
    raw = os.environ.get(ENV_SEED)
    if raw is None or raw.strip() == "":
        return DEFAULT_SEED
    try:
        value = int(raw)
    except ValueError:
        raise DomainError(f"{ENV_SEED} must be an integer, got {raw!r}") from None
    if value < 0:
        raise DomainError(f"{ENV_SEED} must be nonnegative")
    return value
