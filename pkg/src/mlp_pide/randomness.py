"""Hierarchical counter-based random streams.

A :class:`StreamKey` names one logical stream by a seed and a path of signed
integers. The path is hashed into a 128-bit Philox key; the draw index is the
Philox counter. Every output is therefore a pure function of
``(seed, path, counter)`` and can be replayed in any order, from any thread.
"""
from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import ndtri

MAX_DEPTH = 64
_HALF_ULP = 2.0**-54
_WORDS_PER_BLOCK = 4  # Philox4x64 yields four 64-bit words per counter step


class StreamDepthError(RuntimeError):
    """Raised when a key path grows beyond the configured maximum depth."""


@dataclass(frozen=True)
class StreamKey:
    seed: int
    path: tuple[int, ...] = ()
    max_depth: int = MAX_DEPTH

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    def child(self, index: int) -> "StreamKey":
        return child(self, index)

    def __truediv__(self, index: int) -> "StreamKey":
        return child(self, index)


def child(key: StreamKey, index: int) -> StreamKey:
    if len(key.path) >= key.max_depth:
        raise StreamDepthError(
            f"stream path depth {len(key.path) + 1} exceeds maximum {key.max_depth}"
        )
    return StreamKey(key.seed, key.path + (int(index),), key.max_depth)


@lru_cache(maxsize=65536)
def _philox_key(seed: int, path: tuple[int, ...]) -> np.ndarray:
    h = hashlib.blake2b(digest_size=16, person=b"mlp-pide-stream")
    h.update(struct.pack("<QQ", seed, len(path)))
    for p in path:
        h.update(struct.pack("<q", p))
    return np.frombuffer(h.digest(), dtype="<u8").copy()


def _generator(key: StreamKey, block: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.Philox(key=_philox_key(key.seed, key.path), counter=block)
    )


def uniforms(key: StreamKey, start: int, size: int) -> np.ndarray:
    """Draws ``start, start+1, ..., start+size-1`` of the stream, each in [0, 1)."""
    if size <= 0:
        return np.empty(0)
    block, offset = divmod(int(start), _WORDS_PER_BLOCK)
    return _generator(key, block).random(offset + size)[offset:]


def uniform01(key: StreamKey, counter: int) -> float:
    return float(uniforms(key, counter, 1)[0])


def open_uniforms(key: StreamKey, start: int, size: int) -> np.ndarray:
    """Like :func:`uniforms` but shifted by half a grid step into (0, 1)."""
    return uniforms(key, start, size) + _HALF_ULP


def normals(key: StreamKey, start: int, size: int) -> np.ndarray:
    # inverse-CDF keeps draw i tied to uniform i
    return ndtri(open_uniforms(key, start, size))


def gauss_vector(key: StreamKey, counter: int, d: int) -> np.ndarray:
    """The ``counter``-th standard normal vector of length ``d`` in the stream."""
    if d < 1:
        raise ValueError(f"invalid dimension d={d}")
    return normals(key, counter * d, d)


def poisson_from_uniforms(lam, u) -> np.ndarray:
    """Poisson variates by sequential-search inversion of the CDF.

    ``lam`` and ``u`` broadcast together. Intended for small parameters, where
    the search terminates after a handful of terms.
    """
    lam, u = np.broadcast_arrays(np.asarray(lam, dtype=float), np.asarray(u, dtype=float))
    k = np.zeros(lam.shape, dtype=np.int64)
    p = np.exp(-lam)
    cdf = p.copy()
    active = u > cdf
    while np.any(active):
        k[active] += 1
        p = np.where(active, p * lam / np.maximum(k, 1), p)
        cdf = np.where(active, cdf + p, cdf)
        # guard against u sitting above the rounded total mass
        active &= (u > cdf) & (p > 0)
    return k


POISSON_INVERSION_LIMIT = 30.0


def poisson(key: StreamKey, counter: int, lam: float) -> int:
    """Poisson(lam) variate number ``counter`` of the stream.

    Inversion for lam < 30; numpy's transformed-rejection sampler on a
    generator keyed at this counter otherwise.
    """
    if lam < 0:
        raise ValueError(f"negative Poisson parameter {lam}")
    if lam == 0:
        return 0
    if lam < POISSON_INVERSION_LIMIT:
        return int(poisson_from_uniforms(lam, uniform01(key, counter)))
    return int(_generator(child(key, -1), counter * 2**32).poisson(lam))


def poisson_array(key: StreamKey, lam) -> np.ndarray:
    """Counts ``poisson(key, i, lam[i])`` for every index ``i`` of ``lam``."""
    lam = np.asarray(lam, dtype=float)
    if lam.size == 0:
        return np.zeros(0, dtype=np.int64)
    if np.all(lam < POISSON_INVERSION_LIMIT):
        out = poisson_from_uniforms(lam, uniforms(key, 0, lam.size))
        return np.where(lam > 0, out, 0)
    return np.array([poisson(key, i, float(l)) for i, l in enumerate(lam)], dtype=np.int64)
