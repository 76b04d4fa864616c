"""Single-letter rate-region evaluation over auxiliary test channels.

For a pair of test channels ``P(z1|x1)``, ``P(z2|x2)`` and reconstruction maps
``h_m(z1, z2)``, the achievable rate pairs at distortion ``E[d]`` are

    R1 >= I(X1;Z1) - I(Z1;Z2),  R2 >= I(X2;Z2) - I(Z1;Z2),
    R1 + R2 >= I(X1;Z1) + I(X2;Z2) - I(Z1;Z2).

Sweeping channels over a lattice and taking the union of these polytopes
gives an inner approximation of the region with bounded auxiliary alphabets.
"""
from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ..covering.eta import compositions, keyed
from ..errors import CapacityError, ValidationError
from ..prob import ConditionalKernel, FiniteDistribution, identity_kernel

DEFAULT_POINTS = 9
GRID_CAP = 2_000_000
PAIR_CAP = 50_000_000
_CHUNK_ENTRIES = 4_000_000


# --------------------------------------------------------------------------
# distortion tables over (x1, x2, y1, y2)


def as_table4(distortion) -> np.ndarray:
    t = np.asarray(getattr(distortion, "per_letter", distortion), dtype=float)
    if t.ndim != 4:
        raise ValidationError("region distortions are per-letter tables over (x1, x2, y1, y2)")
    if not np.all(np.isfinite(t)) or np.any(t < 0):
        raise ValidationError("distortion entries must be finite and >= 0")
    return t


def pair_distortion(d1=None, d2=None, w1: float = 0.5, w2: float = 0.5, *,
                    kx1: int | None = None, kx2: int | None = None) -> np.ndarray:
    """``w1 d1(x1, y1) + w2 d2(x2, y2)`` as a table over ``(x1, x2, y1, y2)``.

    A missing side contributes nothing and gets a one-symbol reconstruction
    alphabet; its source alphabet size must then be given.
    """
    if d1 is None and d2 is None:
        raise ValidationError("need at least one per-terminal distortion")
    if d1 is None:
        if kx1 is None:
            raise ValidationError("kx1 is needed when d1 is absent")
        d1, w1 = np.zeros((kx1, 1)), 0.0
    if d2 is None:
        if kx2 is None:
            raise ValidationError("kx2 is needed when d2 is absent")
        d2, w2 = np.zeros((kx2, 1)), 0.0
    a, b = np.asarray(d1, float), np.asarray(d2, float)
    return w1 * a[:, None, :, None] + w2 * b[None, :, None, :]


def hamming_table(k: int) -> np.ndarray:
    return 1.0 - np.eye(k)


# --------------------------------------------------------------------------
# channels and bounds


def _xlogx(p):
    p = np.asarray(p, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)


def _mi2(p: np.ndarray) -> np.ndarray:
    """Mutual information of batched 2-D joints ``(..., a, b)``."""
    h_a = -_xlogx(p.sum(axis=-1)).sum(axis=-1)
    h_b = -_xlogx(p.sum(axis=-2)).sum(axis=-1)
    h_ab = -_xlogx(p).sum(axis=(-2, -1))
    return np.maximum(h_a + h_b - h_ab, 0.0)


@dataclass(frozen=True, eq=False)
class TestChannelPair:
    """Test channels and letterwise reconstruction maps ``h_m[z1, z2]``."""

    __test__ = False  # keep pytest from collecting the class

    k1: ConditionalKernel
    k2: ConditionalKernel
    h1: np.ndarray | None = None
    h2: np.ndarray | None = None

    def __post_init__(self):
        for h in (self.h1, self.h2):
            if h is not None and np.asarray(h).shape != (self.k1.output_size, self.k2.output_size):
                raise ValidationError("reconstruction maps must be (|Z1|, |Z2|) tables")

    @property
    def channel_hash(self) -> str:
        m = np.concatenate([np.round(np.nan_to_num(self.k1.matrix), 12).ravel(),
                            np.round(np.nan_to_num(self.k2.matrix), 12).ravel()])
        shape = np.array(self.k1.matrix.shape + self.k2.matrix.shape, np.int64)
        return hashlib.sha256(shape.tobytes() + m.tobytes()).hexdigest()[:12]


def _check_pair(joint_x: FiniteDistribution, ch: TestChannelPair):
    if joint_x.ndim != 2:
        raise ValidationError("source joint must be 2-D over (x1, x2)")
    if ch.k1.input_size != joint_x.shape[0] or ch.k2.input_size != joint_x.shape[1]:
        raise ValidationError("test channels do not take the source symbols as input "
                              "(the joint would not factor as P(x1,x2) P(z1|x1) P(z2|x2))")
    px1, px2 = joint_x.weights.sum(axis=1), joint_x.weights.sum(axis=0)
    if np.any(px1[~ch.k1.valid] > 0) or np.any(px2[~ch.k2.valid] > 0):
        raise ValidationError("test channel undefined at a source symbol of positive probability")


def four_way_joint(joint_x: FiniteDistribution, k1: ConditionalKernel, k2: ConditionalKernel) -> np.ndarray:
    """``P(x1, x2, z1, z2) = P(x1, x2) P(z1|x1) P(z2|x2)``."""
    a = np.nan_to_num(k1.matrix)
    b = np.nan_to_num(k2.matrix)
    return joint_x.weights[:, :, None, None] * a[:, None, :, None] * b[None, :, None, :]


def optimal_reconstruction(joint_x: FiniteDistribution, channel: TestChannelPair, distortion
                           ) -> tuple[np.ndarray, np.ndarray, float]:
    """Best ``(h1, h2)`` per ``(z1, z2)`` cell; the lowest ``(y1, y2)`` wins ties."""
    t = as_table4(distortion)
    p = four_way_joint(joint_x, channel.k1, channel.k2)
    ky1, ky2 = t.shape[2:]
    cost = np.einsum("abij,abyz->ijyz", p, t).reshape(p.shape[2], p.shape[3], ky1 * ky2)
    best = np.argmin(keyed(cost), axis=-1)
    h1, h2 = np.divmod(best, ky2)
    return h1, h2, float(np.take_along_axis(cost, best[..., None], -1).sum())


def _expected_distortion(joint_x, channel, t) -> float:
    p = four_way_joint(joint_x, channel.k1, channel.k2)
    z1, z2 = np.meshgrid(np.arange(p.shape[2]), np.arange(p.shape[3]), indexing="ij")
    y1, y2 = np.asarray(channel.h1), np.asarray(channel.h2)
    d = t[:, :, y1[z1, z2], y2[z1, z2]]  # (x1, x2, z1, z2)
    return float(np.sum(p * d))


@dataclass(frozen=True)
class RegionReport:
    """Raw bounds (possibly negative) for one channel pair; the ``r*``
    properties clamp them to the nonnegative rates a code can have."""

    i_x1z1: float
    i_x2z2: float
    i_z1z2: float
    distortion: float
    channel: TestChannelPair = field(repr=False)

    @property
    def b1(self) -> float:
        return self.i_x1z1 - self.i_z1z2

    @property
    def b2(self) -> float:
        return self.i_x2z2 - self.i_z1z2

    @property
    def b12(self) -> float:
        return self.i_x1z1 + self.i_x2z2 - self.i_z1z2

    @property
    def bounds(self) -> tuple[float, float, float]:
        return self.b1, self.b2, self.b12

    @property
    def clamped(self) -> bool:
        return min(self.bounds) < 0

    @property
    def polytope(self) -> tuple[float, float, float]:
        """Clamped ``(min R1, min R2, min R1 + R2)``."""
        r1, r2 = max(self.b1, 0.0), max(self.b2, 0.0)
        return r1, r2, max(self.b12, r1 + r2)


def theorem_bounds(joint_x: FiniteDistribution, channel: TestChannelPair, distortion) -> RegionReport:
    """Information quantities and rate bounds for one channel pair.

    Missing reconstruction maps are replaced by the optimal ones.
    """
    _check_pair(joint_x, channel)
    t = as_table4(distortion)
    if channel.h1 is None or channel.h2 is None:
        h1, h2, _ = optimal_reconstruction(joint_x, channel, t)
        channel = TestChannelPair(channel.k1, channel.k2, h1, h2)
    p = four_way_joint(joint_x, channel.k1, channel.k2)
    return RegionReport(
        i_x1z1=float(_mi2(p.sum(axis=(1, 3)))),
        i_x2z2=float(_mi2(p.sum(axis=(0, 2)))),
        i_z1z2=float(_mi2(p.sum(axis=(0, 1)))),
        distortion=_expected_distortion(joint_x, channel, t),
        channel=channel)


# --------------------------------------------------------------------------
# frontier of a union of rate polytopes


def _prune(polys: np.ndarray) -> np.ndarray:
    """Indices of polytopes not contained in another one (first wins on ties)."""
    if len(polys) == 0:
        return np.zeros(0, np.int64)
    k = keyed(polys)
    _, first = np.unique(k, axis=0, return_index=True)
    first.sort()
    order = first[np.lexsort((k[first, 2], k[first, 1], k[first, 0]))]
    keep: list[int] = []
    kr2 = np.empty(len(order))
    ks = np.empty(len(order))
    for i in order:
        m = len(keep)
        if m and np.any((kr2[:m] <= k[i, 1]) & (ks[:m] <= k[i, 2])):
            continue
        kr2[m], ks[m] = k[i, 1], k[i, 2]
        keep.append(i)
    return np.array(keep, np.int64)


@dataclass(frozen=True, eq=False)
class Frontier:
    """Lower-left boundary of a union of polytopes
    ``{R1 >= r1, R2 >= r2, R1 + R2 >= s}``; an inner approximation of the
    region at distortion ``target_d``."""

    target_d: float
    polytopes: np.ndarray
    distortions: np.ndarray
    channels: tuple[TestChannelPair, ...] = ()
    evaluated: int = 0

    @classmethod
    def from_candidates(cls, target_d, polys, dists, channel_of, evaluated) -> "Frontier":
        polys = np.asarray(polys, float).reshape(-1, 3)
        keep = _prune(polys)
        return cls(float(target_d), polys[keep], np.asarray(dists, float)[keep],
                   tuple(channel_of(int(i)) for i in keep), int(evaluated))

    @property
    def feasible(self) -> bool:
        return len(self.polytopes) > 0

    @property
    def min_r1(self) -> float:
        return float(self.polytopes[:, 0].min()) if self.feasible else math.inf

    @property
    def min_r2(self) -> float:
        return float(self.polytopes[:, 1].min()) if self.feasible else math.inf

    @property
    def min_sum_rate(self) -> float:
        return float(self.polytopes[:, 2].min()) if self.feasible else math.inf

    def corner_points(self) -> np.ndarray:
        """Both corners of every kept polytope as ``(2k, 2)``: all left
        corners, then all right corners, in polytope order."""
        r1, r2, s = self.polytopes.T
        left = np.stack([r1, np.maximum(r2, s - r1)], axis=1)
        right = np.stack([np.maximum(r1, s - r2), r2], axis=1)
        return np.concatenate([left, right])

    def corners(self) -> np.ndarray:
        """Undominated corner points sorted by R1."""
        if not self.feasible:
            return np.zeros((0, 2))
        pts = np.unique(keyed(self.corner_points()), axis=0)
        keep = [i for i, p in enumerate(pts)
                if not np.any(np.all(pts <= p, axis=1) & np.any(pts < p, axis=1))]
        return pts[keep]

    def min_r2_at(self, r1: float) -> float:
        ok = self.polytopes[:, 0] <= r1 + 1e-12
        if not np.any(ok):
            return math.inf
        p = self.polytopes[ok]
        return float(np.min(np.maximum(p[:, 1], p[:, 2] - r1)))

    def contains(self, r1: float, r2: float, tol: float = 1e-12) -> bool:
        return self.distance((r1, r2)) <= tol

    def distance(self, point) -> float:
        """Chebyshev distance from ``point`` to the upward-closed region."""
        if not self.feasible:
            return math.inf
        x, y = point
        r1, r2, s = self.polytopes.T
        t = np.maximum.reduce([r1 - x, r2 - y, (s - x - y) / 2, np.zeros_like(r1)])
        return float(t.min())

    def boundary_samples(self, per_face: int = 8) -> np.ndarray:
        pts = self.corner_points()
        half = len(self.polytopes)
        u = np.linspace(0, 1, per_face + 2)[1:-1]
        face = pts[:half, None, :] * (1 - u)[None, :, None] + pts[half:, None, :] * u[None, :, None]
        return np.concatenate([pts, face.reshape(-1, 2)])

    def csv_rows(self) -> list[list]:
        """``(D, R1, R2, sum_rate, channel_hash)`` per undominated corner."""
        rows = []
        if not self.feasible:
            return rows
        half = len(self.polytopes)
        pts = keyed(self.corner_points())
        good = {tuple(p) for p in self.corners()}
        seen = set()
        for i in np.lexsort((pts[:, 1], pts[:, 0])):
            key = tuple(pts[i])
            if key not in good or key in seen:
                continue
            seen.add(key)
            ch = self.channels[i % half].channel_hash if self.channels else ""
            rows.append([self.target_d, float(pts[i, 0]), float(pts[i, 1]),
                         float(pts[i, 0] + pts[i, 1]), ch])
        return rows


def frontier_gap(a: Frontier, b: Frontier, per_face: int = 8) -> float:
    """Symmetric Chebyshev gap between two upward-closed rate regions."""
    if not a.feasible and not b.feasible:
        return 0.0
    if not (a.feasible and b.feasible):
        return math.inf
    ab = max(b.distance(p) for p in a.boundary_samples(per_face))
    ba = max(a.distance(p) for p in b.boundary_samples(per_face))
    return max(ab, ba)


# --------------------------------------------------------------------------
# lattice sweep


def simplex_grid(k: int, points: int) -> np.ndarray:
    """Probability vectors of length ``k`` with entries in ``{0, 1/(points-1), ..., 1}``."""
    if points < 2:
        raise ValidationError("need at least 2 points per kernel parameter")
    steps = points - 1
    return compositions(steps, k) / steps


def kernel_grid(k_in: int, k_out: int, points: int) -> np.ndarray:
    rows = simplex_grid(k_out, points)
    count = len(rows) ** k_in
    if count > GRID_CAP:
        raise CapacityError(f"kernel grid of {count} channels", required=count, cap=GRID_CAP)
    idx = np.array(list(itertools.product(range(len(rows)), repeat=k_in)), np.int64)
    return rows[idx]  # (G, k_in, k_out)


def _pair_stats(pxx, t, K1, K2):
    """Batched ``(I(Z1;Z2), E[d] with optimal h, best (y1, y2) code per cell)``."""
    p = pxx[None, :, :, None, None] * K1[:, :, None, :, None] * K2[:, None, :, None, :]
    ky = t.shape[2] * t.shape[3]
    cost = np.einsum("cabij,abq->cijq", p, t.reshape(t.shape[0], t.shape[1], ky))
    best = np.argmin(keyed(cost), axis=-1)
    dist = np.take_along_axis(cost, best[..., None], -1)[..., 0].sum(axis=(1, 2))
    return _mi2(p.sum(axis=(1, 2))), dist, best


def region_sweep(joint_x: FiniteDistribution, distortion, target_d: float,
                 aux_sizes: tuple[int, int] | None = None, points: int = DEFAULT_POINTS, *,
                 k2_fixed: ConditionalKernel | None = None, k1_fixed: ConditionalKernel | None = None
                 ) -> Frontier:
    """Lattice search over channel pairs; keeps those with ``E[d] <= target_d``
    (optimal reconstruction per channel) and returns the union's frontier."""
    t = as_table4(distortion)
    kx1, kx2 = joint_x.shape
    if aux_sizes is None:
        aux_sizes = (kx1 + 1, kx2 + 1)
    if max(aux_sizes) > 4:
        raise ValidationError("auxiliary alphabets are limited to 4 symbols")
    if points < 3:
        raise ValidationError("grid needs >= 3 points per kernel parameter")
    g1 = (np.nan_to_num(k1_fixed.matrix)[None] if k1_fixed is not None
          else kernel_grid(kx1, aux_sizes[0], points))
    g2 = (np.nan_to_num(k2_fixed.matrix)[None] if k2_fixed is not None
          else kernel_grid(kx2, aux_sizes[1], points))
    n1, n2 = len(g1), len(g2)
    if n1 * n2 > PAIR_CAP:
        raise CapacityError(f"{n1 * n2} channel pairs", required=n1 * n2, cap=PAIR_CAP)
    pxx = joint_x.weights
    i1 = _mi2(joint_x.weights.sum(axis=1)[None, :, None] * g1)
    i2 = _mi2(joint_x.weights.sum(axis=0)[None, :, None] * g2)
    per_pair = kx1 * kx2 * g1.shape[2] * g2.shape[2] * max(t.shape[2] * t.shape[3], 1)
    rows = max(1, _CHUNK_ENTRIES // (per_pair * n2))
    polys, dists, pair_idx = [], [], []
    for s in range(0, n1, rows):
        a = np.arange(s, min(s + rows, n1))
        A = np.repeat(a, n2)
        B = np.tile(np.arange(n2), len(a))
        iz, dist, _ = _pair_stats(pxx, t, g1[A], g2[B])
        ok = keyed(dist) <= keyed(target_d)
        if not np.any(ok):
            continue
        b1 = i1[A[ok]] - iz[ok]
        b2 = i2[B[ok]] - iz[ok]
        b12 = i1[A[ok]] + i2[B[ok]] - iz[ok]
        r1, r2 = np.maximum(b1, 0), np.maximum(b2, 0)
        polys.append(np.stack([r1, r2, np.maximum(b12, r1 + r2)], axis=1))
        dists.append(dist[ok])
        pair_idx.append(np.stack([A[ok], B[ok]], axis=1))
    if not polys:
        return Frontier(float(target_d), np.zeros((0, 3)), np.zeros(0), (), n1 * n2)
    polys = np.concatenate(polys)
    pair_idx = np.concatenate(pair_idx)

    def channel_of(i):
        a, b = pair_idx[i]
        ch = TestChannelPair(ConditionalKernel(g1[a]), ConditionalKernel(g2[b]))
        h1, h2, _ = optimal_reconstruction(joint_x, ch, t)
        return TestChannelPair(ch.k1, ch.k2, h1, h2)

    return Frontier.from_candidates(target_d, polys, np.concatenate(dists), channel_of, n1 * n2)


@dataclass(frozen=True)
class WynerZivResult:
    rate: float
    frontier: Frontier = field(repr=False)

    @property
    def feasible(self) -> bool:
        return self.frontier.feasible


def wyner_ziv_specialize(joint_x: FiniteDistribution, d1, target_d: float,
                         aux_size: int | None = None, points: int = DEFAULT_POINTS) -> WynerZivResult:
    """Side-information case: ``Z2 = X2`` and only terminal 1 is reconstructed.

    The minimal ``R1`` is ``min I(X1;Z1) - I(Z1;X2)`` subject to
    ``E[d1(X1, h1(Z1, X2))] <= target_d``.
    """
    kx1, kx2 = joint_x.shape
    aux = kx1 + 1 if aux_size is None else aux_size
    t = pair_distortion(d1, None, w1=1.0, kx2=kx2)
    fr = region_sweep(joint_x, t, target_d, (aux, kx2), points, k2_fixed=identity_kernel(kx2))
    return WynerZivResult(fr.min_r1, fr)


# --------------------------------------------------------------------------
# independent search used to validate the sweep


def _random_kernel(rng, k_in, k_out, lattice):
    raw = rng.dirichlet(np.ones(k_out), size=k_in)
    q = np.floor(raw * lattice).astype(np.int64)
    for r in range(k_in):  # push the rounding remainder onto the largest entry
        q[r, np.argmax(raw[r])] += lattice - q[r].sum()
    return q


def brute_force_frontier_oracle(joint_x: FiniteDistribution, distortion, target_d: float,
                                aux_sizes: tuple[int, int] | None = None, fine_grid: int = 48, *,
                                restarts: int = 6, levels: int = 15, seed: int = 0,
                                k2_fixed: ConditionalKernel | None = None) -> Frontier:
    """Randomized-restart hill climbing over a fine kernel lattice.

    For each level ``r`` of ``R1`` it minimizes the smallest ``R2`` the
    channel's polytope allows at ``R1 = r``, with penalties on exceeding ``r``
    and on excess distortion, moving lattice mass between entries of one
    kernel row at a time. Levels rather than weighted sums are used because
    the union of polytopes need not be convex. Every feasible channel it
    evaluates enters the returned frontier.
    """
    t = as_table4(distortion)
    if target_d < 0:
        return Frontier(float(target_d), np.zeros((0, 3)), np.zeros(0), (), 0)
    kx1, kx2 = joint_x.shape
    z1, z2 = aux_sizes if aux_sizes is not None else (kx1 + 1, kx2 + 1)
    rng = np.random.default_rng(seed)
    L = fine_grid
    fixed2 = None if k2_fixed is None else np.nan_to_num(k2_fixed.matrix)
    if fixed2 is not None:
        z2 = fixed2.shape[1]
    memo: dict[bytes, RegionReport] = {}

    def evaluate(q1, q2) -> RegionReport:
        key = q1.tobytes() + (b"" if fixed2 is not None else q2.tobytes())
        if key not in memo:
            k2m = fixed2 if fixed2 is not None else q2 / L
            memo[key] = theorem_bounds(joint_x, TestChannelPair(ConditionalKernel(q1 / L),
                                                                ConditionalKernel(k2m)), t)
        return memo[key]

    def score(rep: RegionReport, level: float) -> float:
        r1, r2, s = rep.polytope
        return (max(r2, s - max(r1, level)) + 10.0 * max(0.0, r1 - level)
                + 10.0 * max(0.0, rep.distortion - target_d))

    def neighbours(q1, q2, h):
        mats = [q1] if fixed2 is not None else [q1, q2]
        for which, q in enumerate(mats):
            for r in range(q.shape[0]):
                for i in range(q.shape[1]):
                    step = min(h, q[r, i])
                    if step == 0:
                        continue
                    for j in range(q.shape[1]):
                        if j == i:
                            continue
                        nq = q.copy()
                        nq[r, i] -= step
                        nq[r, j] += step
                        yield (nq, q2) if which == 0 else (q1, nq)

    starts = []
    for v1 in itertools.product(range(z1), repeat=kx1):
        q1 = np.zeros((kx1, z1), np.int64)
        q1[np.arange(kx1), v1] = L
        if fixed2 is not None:
            starts.append((q1, np.zeros((1, 1), np.int64)))
            continue
        for v2 in itertools.product(range(z2), repeat=kx2):
            q2 = np.zeros((kx2, z2), np.int64)
            q2[np.arange(kx2), v2] = L
            starts.append((q1, q2))
    for _ in range(restarts):
        q2 = _random_kernel(rng, kx2, z2, L) if fixed2 is None else np.zeros((1, 1), np.int64)
        starts.append((_random_kernel(rng, kx1, z1, L), q2))

    for lam in np.linspace(0, math.log(kx1), levels):
        ranked = sorted(range(len(starts)), key=lambda i: score(evaluate(*starts[i]), lam))
        chosen = ranked[:2] + [i for i in ranked[2:] if i >= len(starts) - restarts][:restarts]
        for i in chosen:
            q1, q2 = starts[i]
            cur = score(evaluate(q1, q2), lam)
            h = L // 4
            while h >= 1:
                best = None
                for c1, c2 in neighbours(q1, q2, h):
                    sc = score(evaluate(c1, c2), lam)
                    if sc < cur - 1e-12:
                        cur, best = sc, (c1, c2)
                if best is None:
                    h //= 2
                else:
                    q1, q2 = best

    reps = [r for r in memo.values() if keyed(r.distortion) <= keyed(target_d)]
    polys = np.array([r.polytope for r in reps]).reshape(-1, 3)
    return Frontier.from_candidates(target_d, polys, [r.distortion for r in reps],
                                    lambda i: reps[i].channel, len(memo))
