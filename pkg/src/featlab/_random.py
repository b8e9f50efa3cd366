"""Counter-based random numbers keyed by (seed, index).

Every variate is a pure function of its key, so truncating or extending a
sequence never changes the values already drawn, and results are
byte-identical across runs and platforms.

The mixing function is SplitMix64::

    z = (x + 0x9E3779B97F4A7C15) mod 2**64
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    z =  z ^ (z >> 31)

Normal variates use the inverse CDF of a 53-bit uniform on the open
interval (0, 1).
"""
import numpy as np
from scipy.special import ndtri

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1


def splitmix64(x):
    """Vectorised SplitMix64 finaliser on uint64 arrays (wrapping arithmetic)."""
    z = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = z + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def derive_seed(master, index):
    """Per-task seed from a master seed and a task index."""
    key = (int(master) + (int(index) + 1) * 0x9E3779B97F4A7C15) & _MASK
    return int(splitmix64(np.uint64(key)))


def keyed_uniform(seed, index):
    """Uniform(0, 1) variates, one per entry of ``index``, keyed by ``seed``."""
    idx = np.asarray(index, dtype=np.uint64)
    s = splitmix64(np.uint64(int(seed) & _MASK))
    with np.errstate(over="ignore"):
        h = splitmix64(s ^ splitmix64(idx))
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def keyed_normal(seed, index):
    """Standard normal variates keyed by (seed, index) via the inverse CDF."""
    return ndtri(keyed_uniform(seed, index))
