"""Counter-based random fields.

Every random number used by the simulators is a pure function of a 64-bit
seed and a tuple of integer coordinates.  Nothing is stored: a coin at a
lattice site or a Gaussian increment of walker ``j`` at grid step ``m`` is
recomputed on demand, so results do not depend on traversal order, chunking
or thread count.

The mixer is the splitmix64 finalizer applied once per coordinate.
"""

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_SALT_A = np.uint64(0x632BE59BD9B4E019)
_SALT_B = np.uint64(0x8CB92BA72F3D8DD7)
_INV53 = 1.0 / 9007199254740992.0

# stream tags; one per kind of randomness
TAG_REPLICA = 1
TAG_COIN_PARITY = 2
TAG_COIN_CROSSING = 3
TAG_CLOCK_COUNT = 4
TAG_CLOCK_TIME = 5
TAG_CLOCK_DIR = 6
TAG_BM = 7
TAG_BRIDGE = 8
TAG_FP = 9

MASK64 = (1 << 64) - 1


@njit(cache=True, nogil=True)
def fmix(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True, nogil=True)
def key(seed, tag, a, b, c):
    """Hash ``(seed, tag, a, b, c)`` to a uint64.  Coordinates may be negative."""
    h = fmix(np.uint64(seed) + _GOLDEN)
    h = fmix((h ^ np.uint64(tag)) + _GOLDEN)
    h = fmix((h ^ np.uint64(np.int64(a))) + _GOLDEN)
    h = fmix((h ^ np.uint64(np.int64(b))) + _GOLDEN)
    h = fmix((h ^ np.uint64(np.int64(c))) + _GOLDEN)
    return h


@njit(cache=True, nogil=True)
def to_unit(h):
    """Map a uint64 to a double in the open interval (0, 1)."""
    return (np.float64(h >> _S11) + 0.5) * _INV53


@njit(cache=True, nogil=True)
def uniform(seed, tag, a, b, c):
    return to_unit(key(seed, tag, a, b, c))


@njit(cache=True, nogil=True)
def normal(seed, tag, a, b, c):
    """Standard normal variate (Box-Muller on two salted uniforms)."""
    h = key(seed, tag, a, b, c)
    u1 = to_unit(fmix(h ^ _SALT_A))
    u2 = to_unit(fmix(h ^ _SALT_B))
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


@njit(cache=True, nogil=True)
def _derive_many(seed, start, n):
    out = np.empty(n, np.uint64)
    for r in range(n):
        out[r] = key(seed, TAG_REPLICA, start + r, 0, 0)
    return out


def replica_seeds(seed, n, start=0):
    """Independent per-replica seeds derived from a master seed."""
    return _derive_many(np.uint64(int(seed) & MASK64), np.int64(start), np.int64(n))


def derive_seed(seed, index):
    return int(replica_seeds(seed, 1, start=index)[0])


# Pure-Python mirror of the mixer, used by tests as an independent check of
# the compiled arithmetic (wrap-around, sign handling).

def py_fmix(z):
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def py_key(seed, tag, a, b, c):
    g = 0x9E3779B97F4A7C15
    h = py_fmix((seed + g) & MASK64)
    for v in (tag, a, b, c):
        h = py_fmix(((h ^ (v & MASK64)) + g) & MASK64)
    return h
