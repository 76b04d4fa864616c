"""Acceptance sets and bounded block distortions over tuples of blocks.

Both are evaluated batched: each block argument is an integer array whose
last axis runs over positions, leading axes broadcast. ``type_invariant``
means the value depends on the blocks only through their joint type
(letter-pair counts), which unlocks the joint-type fast paths.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from ..errors import ValidationError
from ..prob import FiniteDistribution
from ..spectrum import density_table, mutual_information

# slack for threshold comparisons on normalized sums of table entries
THRESH_TOL = 1e-12


def _as_blocks(blocks):
    return tuple(np.asarray(b, dtype=np.int64) for b in blocks)


@dataclass(frozen=True, eq=False)
class DistortionMeasure:
    """Bounded block distortion with bound ``d_zero``.

    The usual form is per-letter additive: ``d_n = mean_i table[x_i, ...]``.
    A custom ``block_fn`` covers non-additive cases such as the complement
    indicator of a set.
    """

    per_letter: np.ndarray | None = None
    block_fn: Callable[..., np.ndarray] | None = None
    d_zero: float | None = None
    description: str = ""
    type_invariant: bool = True

    def __post_init__(self):
        if (self.per_letter is None) == (self.block_fn is None):
            raise ValidationError("give exactly one of per_letter or block_fn")
        if self.per_letter is not None:
            t = np.array(self.per_letter, dtype=float)
            if t.ndim < 2:
                raise ValidationError("per-letter distortion table needs >= 2 axes")
            if not np.all(np.isfinite(t)) or np.any(t < 0):
                raise ValidationError("distortion entries must be finite and >= 0")
            t.flags.writeable = False
            object.__setattr__(self, "per_letter", t)
            object.__setattr__(self, "d_zero", float(t.max()))
        elif self.d_zero is None or not np.isfinite(self.d_zero) or self.d_zero < 0:
            raise ValidationError("block distortions need a finite bound d_zero")

    @property
    def arity(self) -> int | None:
        return None if self.per_letter is None else self.per_letter.ndim

    def __call__(self, *blocks) -> np.ndarray:
        b = _as_blocks(blocks)
        if self.per_letter is not None:
            if len(b) != self.per_letter.ndim:
                raise ValidationError(f"expected {self.per_letter.ndim} block arguments")
            return self.per_letter[b].mean(axis=-1)
        return np.asarray(self.block_fn(*b), dtype=float)

    @classmethod
    def from_table(cls, table, description: str = "per-letter") -> "DistortionMeasure":
        return cls(per_letter=np.asarray(table, dtype=float), description=description)

    @classmethod
    def hamming(cls, k: int, k_out: int | None = None) -> "DistortionMeasure":
        k_out = k if k_out is None else k_out
        t = np.ones((k, k_out))
        for i in range(min(k, k_out)):
            t[i, i] = 0.0
        return cls(per_letter=t, description="hamming")

    @classmethod
    def zero(cls, *sizes: int) -> "DistortionMeasure":
        return cls(per_letter=np.zeros(sizes), description="zero")

    @classmethod
    def miss_indicator(cls, acceptance: "AcceptanceSet") -> "DistortionMeasure":
        """``1{blocks not in acceptance}``, bounded by 1."""
        return cls(block_fn=lambda *b: (~acceptance(*b)).astype(float), d_zero=1.0,
                   description=f"1{{not in {acceptance.description}}}",
                   type_invariant=acceptance.type_invariant)


@dataclass(frozen=True, eq=False)
class AcceptanceSet:
    membership: Callable[..., np.ndarray]
    description: str
    kind: str
    type_invariant: bool = False

    def __call__(self, *blocks) -> np.ndarray:
        return np.asarray(self.membership(*_as_blocks(blocks)), dtype=bool)

    def contains(self, *blocks) -> bool:
        return bool(self(*blocks))

    @classmethod
    def full(cls) -> "AcceptanceSet":
        return cls(lambda *b: np.ones(np.broadcast_shapes(*(x.shape for x in b))[:-1], bool),
                   "full", "full", True)

    @classmethod
    def empty(cls) -> "AcceptanceSet":
        return cls(lambda *b: np.zeros(np.broadcast_shapes(*(x.shape for x in b))[:-1], bool),
                   "empty", "empty", True)

    @classmethod
    def distortion_threshold(cls, distortion: DistortionMeasure, level: float,
                             margin: float = 0.0) -> "AcceptanceSet":
        bound = level + margin
        return cls(lambda *b: distortion(*b) <= bound + THRESH_TOL,
                   f"d <= {level:g}" + (f" + {margin:g}" if margin else ""),
                   "distortion_threshold", distortion.type_invariant)

    @classmethod
    def density_typical(cls, joint: FiniteDistribution, radius: float,
                        center: float | None = None) -> "AcceptanceSet":
        """Pairs whose information density under ``joint`` lies within
        ``radius`` of ``center`` (default: the mutual information)."""
        table = density_table(joint)
        table = np.where(np.isnan(table), -np.inf, table)
        c = mutual_information(joint) if center is None else center

        def member(u, w):
            dens = table[u, w].mean(axis=-1)
            with np.errstate(invalid="ignore"):
                return np.isfinite(dens) & (np.abs(dens - c) <= radius + THRESH_TOL)

        return cls(member, f"|i(u;w) - {c:.4f}| <= {radius:g}", "density_typical", True)

    @classmethod
    def explicit_list(cls, members: Iterable[tuple]) -> "AcceptanceSet":
        """Finite list of accepted block tuples."""
        keys = {tuple(tuple(int(s) for s in blk) for blk in m) for m in members}

        def member(*b):
            shape = np.broadcast_shapes(*(x.shape for x in b))
            bb = [np.broadcast_to(x, shape).reshape(-1, shape[-1]) for x in b]
            flat = [tuple(tuple(x[i]) for x in bb) in keys for i in range(bb[0].shape[0])]
            return np.array(flat, bool).reshape(shape[:-1])

        return cls(member, f"explicit({len(keys)} tuples)", "explicit_list", False)

    @classmethod
    def from_predicate(cls, fn: Callable[..., np.ndarray], description: str = "predicate",
                       type_invariant: bool = False) -> "AcceptanceSet":
        return cls(fn, description, "predicate", type_invariant)
