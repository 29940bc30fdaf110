"""Dense linear algebra helpers, activations and a portable seeded RNG.

The generator is xorshift64* (Vigna, 2014) seeded through one round of
SplitMix64, so a given 64-bit seed yields the same stream on every platform:

    state = splitmix64(seed)          # never zero
    x ^= x >> 12; x ^= x << 25; x ^= x >> 27
    out = (x * 0x2545F4914F6CDD1D) mod 2**64
    uniform = (out >> 11) * 2**-53    # in [0, 1)
"""
from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1
_SIGMOID_CLAMP = 500.0


class ShapeError(ValueError):
    """Raised when array dimensions do not conform."""


def as_matrix(values, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    a = np.asarray(values, dtype=np.float64)
    if a.ndim == 1 and rows is not None and cols is not None:
        a = a.reshape(rows, cols)
    if a.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains non-finite entries")
    return a


def matmul(a, b) -> np.ndarray:
    """Matrix product with an explicit shape check."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}")
    return a @ b


def sigmoid(y, alpha: float = 1.0):
    """Logistic function ``1 / (1 + exp(-alpha*y))``.

    Works on scalars and arrays. The exponent is clamped to +-500, beyond
    which the result is already 0 or 1 to double precision.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    z = np.clip(alpha * np.asarray(y, dtype=np.float64), -_SIGMOID_CLAMP, _SIGMOID_CLAMP)
    out = 1.0 / (1.0 + np.exp(-z))
    return float(out) if out.ndim == 0 else out


def tanh_act(y):
    out = np.tanh(np.asarray(y, dtype=np.float64))
    return float(out) if out.ndim == 0 else out


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class SeededRng:
    """xorshift64* stream. Single-owner; do not share across threads."""

    def __init__(self, seed: int):
        if seed < 0 or seed > _MASK64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        self.seed = seed
        self._state = splitmix64(seed) or 0x9E3779B97F4A7C15

    def next_u64(self) -> int:
        x = self._state
        x ^= x >> 12
        x ^= (x << 25) & _MASK64
        x ^= x >> 27
        self._state = x
        return (x * 0x2545F4914F6CDD1D) & _MASK64

    def uniform(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform_array(self, n: int, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
        u = np.fromiter((self.uniform() for _ in range(n)), dtype=np.float64, count=n)
        out = lo + (hi - lo) * u
        # lo + (hi-lo)*u can round up to hi when the interval is tiny
        return np.where(out >= hi, np.nextafter(hi, -np.inf), out)

    def normal(self) -> float:
        # Box-Muller; 1-u keeps the log argument in (0, 1]
        u1 = 1.0 - self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def normal_array(self, n: int) -> np.ndarray:
        return np.fromiter((self.normal() for _ in range(n)), dtype=np.float64, count=n)


def uniform_matrix(rng: SeededRng, rows: int, cols: int, lo: float, hi: float) -> np.ndarray:
    """``rows x cols`` matrix of i.i.d. uniform draws on [lo, hi), row-major order."""
    if not lo < hi:
        raise ValueError(f"need lo < hi, got lo={lo}, hi={hi}")
    return rng.uniform_array(rows * cols, lo, hi).reshape(rows, cols)


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from arbitrary printable parts (independent of PYTHONHASHSEED)."""
    import hashlib

    text = "\x1f".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little")
