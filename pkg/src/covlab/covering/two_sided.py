"""Two-encoder covering: one covering map per terminal, built in sequence.

Terminal 1 covers ``Z1`` from ``X1`` against the joint behaviour of
``(X1, X2, Z1, Z2)`` with ``Z2`` still drawn from its test channel. Terminal 2
then covers ``Z2`` from ``X2`` with ``Z1`` replaced by the realized
``F1(X1)``. Each stage is the single-terminal construction applied to the
chain ``(everything else) - X_m - Z_m``. Everything is computed densely over
blocks, so this is meant for small blocklengths.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import CapacityError, ValidationError
from ..prob import (ENUM_CAP, ConditionalKernel, FiniteDistribution, all_blocks, block_kernel,
                    check_enumerable)
from ..spectrum import mutual_information
from .construction import DEFAULT_M_CAP, Codebook, codebook_size, sample_codebook, select_codewords
from .sets import AcceptanceSet, DistortionMeasure

# entries of the largest per-slice cost array built in stage 1
SLICE_CAP = 2**24


@dataclass(frozen=True)
class TwoSidedConfig:
    gamma1: float
    gamma2: float
    blocklength: int
    trials: int = 1
    seed: int = 0
    m_cap: int = DEFAULT_M_CAP
    cap: int = ENUM_CAP

    def __post_init__(self):
        if not (self.gamma1 > 0 and self.gamma2 > 0):
            raise ValidationError("gamma1 and gamma2 must be > 0")
        if self.blocklength < 1 or self.trials < 1:
            raise ValidationError("blocklength and trials must be >= 1")


@dataclass(frozen=True)
class TwoSidedTrial:
    trial: int
    miss_prob: float
    achieved_distortion: float
    distinct: tuple[int, int]
    fallback_rate: tuple[float, float]
    index_mi: float  # nats per letter
    index1: np.ndarray = field(repr=False, compare=False, default=None)
    index2: np.ndarray = field(repr=False, compare=False, default=None)
    codebooks: tuple[Codebook, Codebook] | None = field(repr=False, compare=False, default=None)


@dataclass(frozen=True)
class TwoSidedReport:
    n: int
    m_used: tuple[int, int]
    i_xz: tuple[float, float]
    z_mi: float
    gamma2: float
    baseline_miss: float
    baseline_distortion: float
    per_trial: tuple[TwoSidedTrial, ...]

    @property
    def miss_prob(self) -> float:
        return float(np.mean([t.miss_prob for t in self.per_trial]))

    @property
    def achieved_distortion(self) -> float:
        return float(np.mean([t.achieved_distortion for t in self.per_trial]))

    @property
    def cardinality_ok(self) -> bool:
        return all(t.distinct[m] <= self.m_used[m] for t in self.per_trial for m in (0, 1))

    @property
    def mi_bound(self) -> float:
        return self.z_mi - self.gamma2

    def mi_bound_count(self) -> int:
        """Trials whose index mutual information per letter meets the bound."""
        return sum(t.index_mi >= self.mi_bound - 1e-12 for t in self.per_trial)


def _cost_fns(acceptance, distortion):
    miss = (lambda *b: np.zeros(np.broadcast_shapes(*(x.shape for x in b))[:-1])) \
        if acceptance is None else (lambda *b: (~acceptance(*b)).astype(float))
    dist = (lambda *b: np.zeros(np.broadcast_shapes(*(x.shape for x in b))[:-1])) \
        if distortion is None else distortion
    return miss, dist


def _block_mi(p: np.ndarray) -> float:
    return mutual_information(p / p.sum())


class TwoSidedProblem:
    """Block tables of ``P(x1, x2) P(z1 | x1) P(z2 | x2)`` at one blocklength."""

    def __init__(self, joint_x: FiniteDistribution, k1: ConditionalKernel, k2: ConditionalKernel,
                 acceptance: AcceptanceSet | None, distortion: DistortionMeasure | None, n: int,
                 cap: int = ENUM_CAP):
        if joint_x.ndim != 2:
            raise ValidationError("source joint must be 2-D over (x1, x2)")
        if k1.input_size != joint_x.shape[0] or k2.input_size != joint_x.shape[1]:
            raise ValidationError("test-channel input sizes do not match the source alphabets")
        self.joint_x, self.k1, self.k2, self.n = joint_x, k1, k2, n
        self.miss, self.dist = _cost_fns(acceptance, distortion)
        kx1, kx2 = joint_x.shape
        kz1, kz2 = k1.output_size, k2.output_size
        for k, what in ((kx1, "x1"), (kx2, "x2"), (kz1, "z1"), (kz2, "z2")):
            check_enumerable(k, n, cap, f"{what} block space")
        self.x1, self.x2 = all_blocks(kx1, n, cap), all_blocks(kx2, n, cap)
        self.z1, self.z2 = all_blocks(kz1, n, cap), all_blocks(kz2, n, cap)
        pxx = np.ones((1, 1))
        for _ in range(n):
            pxx = np.kron(pxx, joint_x.weights)
        self.pxx = pxx
        self.kern1 = block_kernel(k1, n, cap)
        self.kern2 = block_kernel(k2, n, cap)
        self.kz1, self.kz2 = kz1, kz2
        self._stage1 = None

    @property
    def p_z1(self) -> np.ndarray:
        return self.joint_x.weights.sum(axis=1) @ np.nan_to_num(self.k1.matrix)

    @property
    def p_z2(self) -> np.ndarray:
        return self.joint_x.weights.sum(axis=0) @ np.nan_to_num(self.k2.matrix)

    def baseline(self) -> tuple[float, float]:
        """``(Pr{(X1, X2, Z1, Z2) not in A}, E[d(X1, X2, Z1, Z2)])``."""
        e1, e2 = self.stage1_tables()
        p1 = self.pxx.sum(axis=1)[:, None] * self.kern1
        return float(np.nansum(p1 * e1)), float(np.nansum(p1 * e2))

    def stage1_tables(self) -> tuple[np.ndarray, np.ndarray]:
        """eta tables of terminal 1 over every ``(x1, z1)`` block pair."""
        if self._stage1 is not None:
            return self._stage1
        nx1, nx2, nz1, nz2 = len(self.x1), len(self.x2), len(self.z1), len(self.z2)
        if nx2 * nz1 * nz2 > SLICE_CAP:
            raise CapacityError("stage-1 slice over cap", required=nx2 * nz1 * nz2, cap=SLICE_CAP)
        p1 = self.pxx.sum(axis=1)
        e1 = np.full((nx1, nz1), np.nan)
        e2 = np.full((nx1, nz1), np.nan)
        x2 = self.x2[:, None, None, :]
        z1 = self.z1[None, :, None, :]
        z2 = self.z2[None, None, :, :]
        for a in range(nx1):
            if p1[a] <= 0:
                continue
            w = (self.pxx[a] / p1[a])[:, None] * self.kern2  # P(x2, z2 | x1)
            x1 = self.x1[a][None, None, None, :]
            c1 = self.miss(x1, x2, z1, z2)
            c2 = self.dist(x1, x2, z1, z2)
            e1[a] = np.einsum("ij,ikj->k", w, c1)
            e2[a] = np.einsum("ij,ikj->k", w, c2)
        self._stage1 = (e1, e2)
        return self._stage1

    def stage2_tables(self, z1_of_x1: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """eta tables of terminal 2 over every ``(x2, z2)`` given the realized
        ``z1 = F1(x1)`` (one z1-block per x1-block)."""
        p2 = self.pxx.sum(axis=0)
        x1 = self.x1[:, None, :]
        z1 = z1_of_x1[:, None, :]
        z2 = self.z2[None, :, :]
        e1 = np.full((len(self.x2), len(self.z2)), np.nan)
        e2 = np.full_like(e1, np.nan)
        for b in range(len(self.x2)):
            if p2[b] <= 0:
                continue
            w = self.pxx[:, b] / p2[b]  # P(x1 | x2)
            xb = self.x2[b][None, None, :]
            e1[b] = w @ self.miss(x1, xb, z1, z2)
            e2[b] = w @ self.dist(x1, xb, z1, z2)
        return e1, e2

    def delta(self, e1: np.ndarray, stage: int) -> float:
        if stage == 1:
            pv, kern = self.pxx.sum(axis=1), self.kern1
        else:
            pv, kern = self.pxx.sum(axis=0), self.kern2
        return float(np.sum(pv[:, None] * kern * np.nan_to_num(e1)))

    def evaluate(self, z1_of_x1: np.ndarray, z2_of_x2: np.ndarray) -> tuple[float, float]:
        """Exact ``(miss, distortion)`` of a pair of block maps."""
        x1 = self.x1[:, None, :]
        x2 = self.x2[None, :, :]
        f1 = z1_of_x1[:, None, :]
        f2 = z2_of_x2[None, :, :]
        return (float(np.sum(self.pxx * self.miss(x1, x2, f1, f2))),
                float(np.sum(self.pxx * self.dist(x1, x2, f1, f2))))


def _cover(e1_all: np.ndarray, codebook: Codebook, k: int, p_v: np.ndarray, delta: float):
    words, first = codebook.distinct(k)
    cols = words @ (k ** np.arange(codebook.n - 1, -1, -1))
    e1 = np.nan_to_num(e1_all[0][:, cols], nan=np.inf)
    e2 = np.nan_to_num(e1_all[1][:, cols], nan=np.inf)
    j, fallback = select_codewords(e1, e2, math.sqrt(max(delta, 0.0)))
    index = first[j]
    used = np.unique(index[p_v > 0]).size
    return index, codebook.words[index], used, float(np.dot(p_v, fallback))


def index_mutual_information(pxx: np.ndarray, index1: np.ndarray, index2: np.ndarray) -> float:
    """``I(F1(X1); F2(X2))`` in nats from the pushforward of the block joint."""
    _, i1 = np.unique(index1, return_inverse=True)
    _, i2 = np.unique(index2, return_inverse=True)
    push = np.zeros((i1.max() + 1, i2.max() + 1))
    np.add.at(push, (i1[:, None], i2[None, :]), pxx)
    return _block_mi(push)


def two_sided_covering(joint_x: FiniteDistribution, k1: ConditionalKernel, k2: ConditionalKernel,
                       acceptance: AcceptanceSet | None, distortion: DistortionMeasure | None,
                       config: TwoSidedConfig, *, codebooks: tuple[Codebook, Codebook] | None = None
                       ) -> TwoSidedReport:
    """Sequential two-terminal covering; trial ``t`` samples terminal ``m``'s
    codebook from stream ``(seed, t, m)``. ``codebooks`` pins both codebooks
    (then a single trial runs)."""
    n = config.blocklength
    prob = TwoSidedProblem(joint_x, k1, k2, acceptance, distortion, n, config.cap)
    i1 = mutual_information(joint_x.weights.sum(axis=1)[:, None] * np.nan_to_num(k1.matrix))
    i2 = mutual_information(joint_x.weights.sum(axis=0)[:, None] * np.nan_to_num(k2.matrix))
    if codebooks is None:
        m1 = codebook_size(i1, config.gamma1, n, config.m_cap)
        m2 = codebook_size(i2, config.gamma1, n, config.m_cap)
    else:
        m1, m2 = codebooks[0].m, codebooks[1].m
    pz = np.nan_to_num(k1.matrix).T @ joint_x.weights @ np.nan_to_num(k2.matrix)
    z_mi = mutual_information(pz)
    s1 = prob.stage1_tables()
    d1 = prob.delta(s1[0], 1)
    p_x1, p_x2 = prob.pxx.sum(axis=1), prob.pxx.sum(axis=0)
    base = prob.baseline()

    trials = []
    for t in range(1 if codebooks is not None else config.trials):
        if codebooks is None:
            cb1 = sample_codebook(FiniteDistribution(prob.p_z1 / prob.p_z1.sum()), n, m1, config.seed, (t, 1))
            cb2 = sample_codebook(FiniteDistribution(prob.p_z2 / prob.p_z2.sum()), n, m2, config.seed, (t, 2))
        else:
            cb1, cb2 = codebooks
        idx1, f1, used1, fb1 = _cover(s1, cb1, prob.kz1, p_x1, d1)
        s2 = prob.stage2_tables(f1)
        idx2, f2, used2, fb2 = _cover(s2, cb2, prob.kz2, p_x2, prob.delta(s2[0], 2))
        miss, dist = prob.evaluate(f1, f2)
        mi = index_mutual_information(prob.pxx, idx1, idx2) / n
        trials.append(TwoSidedTrial(t, miss, dist, (used1, used2), (fb1, fb2), mi, idx1, idx2, (cb1, cb2)))
    return TwoSidedReport(n, (m1, m2), (i1, i2), z_mi, config.gamma2, base[0], base[1], tuple(trials))
