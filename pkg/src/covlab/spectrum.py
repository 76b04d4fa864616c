"""Entropies, mutual information, information densities and quantile
estimators for spectral sup/inf information rates. All values in nats."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (DensityUndefinedError, EstimationError, NegativeInfiniteDensityError,
                     UnsupportedFamilyError, ValidationError)
from .prob import FiniteDistribution, sample_block

MIN_SAMPLES = 100


def _xlogx(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    out = np.zeros_like(p)
    pos = p > 0
    out[pos] = p[pos] * np.log(p[pos])
    return out


def entropy(dist: FiniteDistribution | np.ndarray) -> float:
    w = dist.weights if isinstance(dist, FiniteDistribution) else np.asarray(dist)
    return float(-_xlogx(w).sum())


def conditional_entropy(joint: FiniteDistribution, given: int = 1) -> float:
    """H(other | given) for a 2-D joint, as H(joint) - H(given marginal)."""
    if joint.ndim != 2:
        raise ValidationError("conditional_entropy expects a 2-D joint")
    return entropy(joint) - entropy(joint.weights.sum(axis=1 - given))


def binary_entropy(p: float) -> float:
    return entropy(np.array([p, 1 - p]))


def mutual_information(joint: FiniteDistribution | np.ndarray) -> float:
    w = joint.weights if isinstance(joint, FiniteDistribution) else np.asarray(joint, dtype=float)
    if w.ndim != 2:
        raise ValidationError("mutual_information expects a 2-D joint")
    pv = w.sum(axis=1)
    pw = w.sum(axis=0)
    pos = w > 0
    ratio = w[pos] / np.outer(pv, pw)[pos]
    return max(float(np.sum(w[pos] * np.log(ratio))), 0.0)


def density_table(joint: FiniteDistribution) -> np.ndarray:
    """Per-letter ``ln P(v,w) / (P(v) P(w))``.

    ``nan`` marks a zero marginal, ``-inf`` a zero joint cell with positive
    marginals.
    """
    w = joint.weights
    outer = np.outer(w.sum(axis=1), w.sum(axis=0))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(w) - np.log(outer)
    out[outer == 0] = np.nan
    return out


@dataclass(frozen=True)
class DensitySample:
    value: float
    blocklength: int

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValidationError("density samples must be finite")


def information_density(joint: FiniteDistribution, v_block, w_block) -> DensitySample:
    """Normalized log-likelihood ratio of a block pair under the i.i.d. law."""
    v = np.asarray(v_block, dtype=np.int64)
    w = np.asarray(w_block, dtype=np.int64)
    if v.shape != w.shape or v.ndim != 1 or v.size == 0:
        raise ValidationError("v and w blocks must be nonempty and of equal length")
    per_letter = density_table(joint)[v, w]
    if np.any(np.isnan(per_letter)):
        raise DensityUndefinedError("block has zero marginal probability")
    if np.any(np.isneginf(per_letter)):
        raise NegativeInfiniteDensityError("zero joint probability with positive marginals")
    return DensitySample(float(per_letter.sum() / v.size), int(v.size))


def sample_information_density(joint: FiniteDistribution, n: int, count: int,
                               rng: np.random.Generator) -> np.ndarray:
    """``count`` i.i.d. draws of the block density at blocklength ``n``."""
    table = density_table(joint)
    v, w = sample_block(joint, n, rng, count)
    # pairs are drawn from the joint so they never land on nan/-inf cells
    return table[v, w].sum(axis=1) / n


def spectral_rate_iid(joint, direction: str = "sup", iid: bool = True) -> float:
    """Spectral sup/inf information rate of an i.i.d. pair source.

    Both directions reduce to the single-letter mutual information. Anything
    carrying ``single_letter=False`` (or ``iid=False``) must go through
    :func:`empirical_spectral_rate` instead.
    """
    _check_direction(direction)
    if not iid or getattr(joint, "single_letter", True) is False:
        raise UnsupportedFamilyError("closed form only holds for i.i.d. families")
    if hasattr(joint, "joint_vw"):
        joint = joint.joint_vw
    return mutual_information(joint)


@dataclass(frozen=True)
class SpectralEstimate:
    rate: float
    quantile_eps: float
    sample_count: int
    direction: str


def _check_direction(direction: str):
    if direction not in ("sup", "inf"):
        raise ValidationError(f"direction must be 'sup' or 'inf', got {direction!r}")


def empirical_spectral_rate(samples: Iterable[DensitySample] | Sequence[float] | np.ndarray,
                            eps: float = 0.05, direction: str = "sup") -> SpectralEstimate:
    """Quantile surrogate for the limit superior (inferior) in probability.

    ``sup``: smallest sample value ``a`` with empirical ``Pr{Z > a} <= eps``.
    ``inf``: largest sample value ``a`` with empirical ``Pr{Z < a} <= eps``.
    """
    _check_direction(direction)
    if not 0 < eps < 0.5:
        raise ValidationError(f"eps must lie in (0, 0.5), got {eps}")
    z = np.array([s.value if isinstance(s, DensitySample) else s for s in samples], dtype=float)
    if z.size < MIN_SAMPLES:
        raise EstimationError(f"need at least {MIN_SAMPLES} samples, got {z.size}")
    if np.any(np.isneginf(z)) or np.any(np.isnan(z)):
        raise EstimationError("sample set contains a -inf/nan density marker; model misspecified")
    z.sort()
    n = z.size
    k = math.floor(eps * n)
    rate = z[n - k - 1] if direction == "sup" else z[k]
    return SpectralEstimate(float(rate), eps, int(n), direction)


def density_csv(samples: Sequence[float], n: int) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["n", "sample_index", "density_nats"])
    for i, s in enumerate(samples):
        wr.writerow([n, i, repr(float(s.value if isinstance(s, DensitySample) else s))])
    return buf.getvalue()
