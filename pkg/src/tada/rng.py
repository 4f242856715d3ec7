"""Counter-based 64-bit mixing used for platform-independent hashing.

Every draw is a pure function of ``(seed, counter)`` so that sketches can be
rebuilt bit-exactly anywhere, and batches of seeds can be evaluated at once.
"""

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def splitmix64(x):
    """SplitMix64 finaliser applied elementwise to a uint64 array."""
    with np.errstate(over="ignore"):
        z = np.asarray(x, dtype=np.uint64) + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def stream(seed, counters, lane):
    """Mixed 64-bit words for ``counters`` under ``seed`` on an independent lane.

    ``seed`` may be a scalar or an array broadcastable against ``counters``.
    """
    seed = np.asarray(seed, dtype=np.uint64)
    counters = np.asarray(counters, dtype=np.uint64)
    key = splitmix64(seed ^ splitmix64(np.uint64(lane)))
    return splitmix64(key ^ splitmix64(counters))


def bounded(words, k):
    """Map 64-bit words to ``[0, k)`` using the high 32 bits (multiply-shift)."""
    if not 1 <= k < 2**32:
        raise ValueError("k must be in [1, 2**32)")
    hi = np.asarray(words, dtype=np.uint64) >> np.uint64(32)
    return ((hi * np.uint64(k)) >> np.uint64(32)).astype(np.int64)


def signs(words):
    """Map 64-bit words to +1/-1 from the top bit."""
    top = (np.asarray(words, dtype=np.uint64) >> np.uint64(63)).astype(np.int8)
    return (1 - 2 * top).astype(np.int8)
