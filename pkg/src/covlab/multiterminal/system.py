"""Two-terminal fixed-length coding system: encoders, a joint decoder, rates
and the average block distortion."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from ..prob import ENUM_CAP, FiniteDistribution, all_blocks, block_code, check_enumerable, sample_block
from ..covering.sets import DistortionMeasure


@dataclass(frozen=True)
class RateTriple:
    r1: float
    r2: float
    d: float

    def __post_init__(self):
        if self.r1 < 0 or self.r2 < 0 or self.d < 0:
            raise ValidationError("rates and distortion must be >= 0")


@dataclass(frozen=True, eq=False)
class Encoder:
    """Block encoder given as a table: ``map[block_code(x)]`` is the index
    (0-based) of source block ``x``."""

    map: np.ndarray
    blocklength: int
    range_size: int
    alphabet_size: int = 0

    def __post_init__(self):
        m = np.asarray(self.map, dtype=np.int64)
        if m.ndim != 1 or m.size == 0:
            raise ValidationError("encoder map must be a nonempty 1-D table")
        k = round(m.size ** (1 / self.blocklength))
        if k**self.blocklength != m.size:
            raise ValidationError(f"table of size {m.size} is not a block space at n={self.blocklength}")
        object.__setattr__(self, "alphabet_size", k)
        if np.any(m < 0) or np.any(m >= self.range_size):
            raise ValidationError(f"encoder indices must lie in [0, {self.range_size})")
        m.flags.writeable = False
        object.__setattr__(self, "map", m)

    @classmethod
    def from_function(cls, fn, k: int, n: int, range_size: int, cap: int = ENUM_CAP) -> "Encoder":
        blocks = all_blocks(k, n, cap)
        return cls(np.array([fn(b) for b in blocks], dtype=np.int64), n, range_size)

    @classmethod
    def identity(cls, k: int, n: int) -> "Encoder":
        return cls(np.arange(k**n), n, k**n)

    @classmethod
    def constant(cls, k: int, n: int) -> "Encoder":
        return cls(np.zeros(k**n, np.int64), n, 1)

    def __call__(self, blocks) -> np.ndarray:
        return self.map[block_code(np.asarray(blocks, dtype=np.int64), self.alphabet_size)]


def code_rate(encoder: Encoder) -> float:
    """``ln |image| / n`` using the indices actually hit."""
    return math.log(np.unique(encoder.map).size) / encoder.blocklength


@dataclass(frozen=True, eq=False)
class Decoder:
    """Joint decoder: index pair ``(i1, i2)`` maps to ``(y1[i1, i2], y2[i1, i2])``,
    each an ``n``-block."""

    y1: np.ndarray
    y2: np.ndarray

    def __post_init__(self):
        y1 = np.asarray(self.y1, dtype=np.int64)
        y2 = np.asarray(self.y2, dtype=np.int64)
        if y1.ndim != 3 or y1.shape != y2.shape:
            raise ValidationError("decoder tables must both be (L1, L2, n)")
        if np.any(y1 < 0) or np.any(y2 < 0):
            raise ValidationError("reconstruction symbols must be >= 0")
        object.__setattr__(self, "y1", y1)
        object.__setattr__(self, "y2", y2)

    @property
    def shape(self) -> tuple[int, int]:
        return self.y1.shape[:2]

    def __call__(self, i1, i2) -> tuple[np.ndarray, np.ndarray]:
        return self.y1[i1, i2], self.y2[i1, i2]

    @classmethod
    def from_letter_maps(cls, words1: np.ndarray, words2: np.ndarray, h1: np.ndarray,
                         h2: np.ndarray) -> "Decoder":
        """Decoder applying letterwise maps ``h_m[z1, z2]`` to the codeword pair."""
        w1 = np.asarray(words1)[:, None, :]
        w2 = np.asarray(words2)[None, :, :]
        return cls(np.asarray(h1)[w1, w2], np.asarray(h2)[w1, w2])


@dataclass(frozen=True)
class SystemResult:
    distortion: float
    stderr: float
    exact: bool
    rates: tuple[float, float]


def simulate_system(joint_x: FiniteDistribution, enc1: Encoder, enc2: Encoder, decoder: Decoder,
                    distortion: DistortionMeasure, n: int, mode: str = "exact", *,
                    samples: int = 10_000, rng: np.random.Generator | None = None,
                    cap: int = ENUM_CAP) -> SystemResult:
    """``E[d(X1, X2, Y1, Y2)]`` for the code, exactly or by seeded sampling."""
    if enc1.blocklength != n or enc2.blocklength != n or decoder.y1.shape[2] != n:
        raise ValidationError("encoders, decoder and n disagree on the blocklength")
    if decoder.shape[0] < enc1.range_size or decoder.shape[1] < enc2.range_size:
        raise ValidationError("decoder is not total on the index product space")
    k1, k2 = joint_x.shape
    rates = (code_rate(enc1), code_rate(enc2))
    if mode == "exact":
        check_enumerable(k1 * k2, n, cap, "source block-pair space")
        pxx = np.ones((1, 1))
        for _ in range(n):
            pxx = np.kron(pxx, joint_x.weights)
        x1 = all_blocks(k1, n, cap)
        x2 = all_blocks(k2, n, cap)
        y1, y2 = decoder(enc1.map[:, None], enc2.map[None, :])
        d = distortion(x1[:, None, :], x2[None, :, :], y1, y2)
        return SystemResult(float(np.sum(pxx * d)), 0.0, True, rates)
    if mode != "mc":
        raise ValidationError(f"mode must be 'exact' or 'mc', got {mode!r}")
    if rng is None:
        raise ValidationError("mc mode needs an explicit rng")
    x1, x2 = sample_block(joint_x, n, rng, samples)
    i1 = enc1.map[block_code(x1, k1)]
    i2 = enc2.map[block_code(x2, k2)]
    y1, y2 = decoder(i1, i2)
    d = np.asarray(distortion(x1, x2, y1, y2), float)
    return SystemResult(float(d.mean()), float(d.std(ddof=1) / math.sqrt(samples)), False, rates)
