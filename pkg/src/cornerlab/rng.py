"""Counter-based random numbers (Philox-4x64-10).

Every random quantity in the package is a pure function of
(key, counter).  The key identifies a stream (seed + trial), the four
64-bit counter words address a position inside the stream, so any entry
of any matrix at any time can be regenerated in isolation and batches
vectorize over counters and keys alike.
"""

import numpy as np
from scipy.special import ndtri

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_MASK32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_KC0 = np.uint64(0x8BADF00D5DEECE66)
_KC1 = np.uint64(0xF1EA5EED4C957F2D)


def _mulhilo(a, b):
    """128-bit product of uint64 arrays as (high word, low word)."""
    lo = a * b
    a_lo = a & _MASK32
    a_hi = a >> _S32
    b_lo = b & _MASK32
    b_hi = b >> _S32
    t = a_lo * b_lo
    u = a_hi * b_lo + (t >> _S32)
    v = a_lo * b_hi + (u & _MASK32)
    hi = a_hi * b_hi + (u >> _S32) + (v >> _S32)
    return hi, lo


def philox4x64(counter, key):
    """Philox-4x64, 10 rounds.

    counter : (..., 4) uint64, key : (..., 2) uint64; leading dimensions
    broadcast.  Returns (..., 4) uint64.
    """
    counter = np.asarray(counter, dtype=np.uint64)
    key = np.asarray(key, dtype=np.uint64)
    shape = np.broadcast_shapes(counter.shape[:-1], key.shape[:-1])
    x0, x1, x2, x3 = (np.broadcast_to(counter[..., i], shape).copy() for i in range(4))
    k0 = np.broadcast_to(key[..., 0], shape).copy()
    k1 = np.broadcast_to(key[..., 1], shape).copy()
    with np.errstate(over="ignore"):
        for _ in range(10):
            hi0, lo0 = _mulhilo(_M0, x0)
            hi1, lo1 = _mulhilo(_M1, x2)
            x0 = hi1 ^ x1 ^ k0
            x1 = lo1
            x2 = hi0 ^ x3 ^ k1
            x3 = lo0
            k0 = k0 + _W0
            k1 = k1 + _W1
    return np.stack([x0, x1, x2, x3], axis=-1)


def uniform_from_bits(bits):
    """Map uint64 words to doubles strictly inside (0, 1).

    Uses 52 bits so that (b + 0.5) * 2^-52 is exact and the endpoints
    2^-53 and 1 - 2^-53 are never rounded onto 0 or 1.
    """
    bits = np.asarray(bits, dtype=np.uint64)
    return ((bits >> np.uint64(12)).astype(np.float64) + 0.5) * 2.0**-52


def normal_from_bits(bits):
    """Map uint64 words to standard normals (inverse-CDF of uniform_from_bits)."""
    return ndtri(uniform_from_bits(bits))


def _mix64(z):
    """splitmix64 finalizer, vectorized."""
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def derive_key(seed, *words):
    """Fold a seed and nonnegative context words into a 128-bit key.

    Arguments broadcast, so derive_key(seed, np.arange(n)) yields one
    key row per trial.  Returns (..., 2) uint64.
    """
    state = _mix64(np.asarray(seed, dtype=np.uint64) + _GAMMA)
    with np.errstate(over="ignore"):
        for w in words:
            state = _mix64(state ^ (np.asarray(w, dtype=np.uint64) + _GAMMA))
    k0 = _mix64(state ^ _KC0)
    k1 = _mix64(state ^ _KC1)
    return np.stack(np.broadcast_arrays(k0, k1), axis=-1)
