"""Conditional expectations eta1/eta2, delta_n and the typicality sets T1, T2.

Two evaluation routes:

* joint types: for an i.i.d. triple and type-invariant set/distortion,
  ``eta(v, w)`` depends on ``(v, w)`` only through their joint type, so
  every quantity is tabulated once per type. Exact for any blocklength
  whose type count is moderate.
* dense: brute-force sums over u-blocks with block-level tables. Works for
  any set or distortion, but only at small blocklengths.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..errors import CapacityError, ValidationError, ZeroMassError
from ..prob import ENUM_CAP, MarkovTriple, all_blocks, block_code, check_enumerable
from .sets import AcceptanceSet, DistortionMeasure

TYPE_ROW_CAP = 4_000_000
TYPE_COUNT_CAP = 200_000
DENSE_CAP = 2**24
# eta values are compared after rounding to this many decimals
ROUND_DECIMALS = 12


def keyed(x):
    """Comparison key for eta values: ties are equality at 1e-12 resolution."""
    return np.round(x, ROUND_DECIMALS)


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float = 0.0
    exact: bool = True


@lru_cache(maxsize=None)
def compositions(total: int, parts: int) -> np.ndarray:
    """All nonnegative integer vectors of length ``parts`` summing to ``total``,
    in lexicographic order."""
    if parts == 1:
        return np.array([[total]], dtype=np.int64)
    rows = []
    for first in range(total + 1):
        rest = compositions(total - first, parts - 1)
        rows.append(np.column_stack([np.full(len(rest), first, np.int64), rest]))
    out = np.vstack(rows)
    out.flags.writeable = False
    return out


def n_compositions(total: int, parts: int) -> int:
    return math.comb(total + parts - 1, parts - 1)


def multinomial_log_pmf(counts: np.ndarray, probs: np.ndarray) -> np.ndarray:
    counts = np.atleast_2d(counts)
    m = counts.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = np.log(probs)
        terms = np.where(counts > 0, counts * logp, 0.0)
    lg = np.vectorize(math.lgamma)
    return lg(m + 1.0) - lg(counts + 1.0).sum(axis=1) + terms.sum(axis=1)


class TypeTables:
    """Per-joint-type quantities for ``(v, w)`` blocks of an i.i.d. triple."""

    def __init__(self, triple: MarkovTriple, n: int, functionals, row_cap: int = TYPE_ROW_CAP):
        ku, kv, kw = triple.sizes
        self.ku, self.kv, self.kw, self.n = ku, kv, kw, n
        cells = kv * kw
        self.cells = cells
        t_count = n_compositions(n, cells)
        if t_count > TYPE_COUNT_CAP:
            raise CapacityError(f"{t_count} joint types at n={n}", required=t_count, cap=TYPE_COUNT_CAP)
        radix = n + 1
        if (cells - 1) * math.log2(radix) >= 62:
            raise CapacityError("joint-type codes overflow 64-bit integers")
        # code is linear in the counts; the last cell is implied by the total
        self.weights = np.array([radix**c for c in range(cells - 1)] + [0], dtype=np.int64)
        self.types = compositions(n, cells)
        self.codes = self.types @ self.weights
        self._order = np.argsort(self.codes)
        self._sorted_codes = self.codes[self._order]

        p_vw = triple.joint_vw.weights.reshape(-1)
        self.prob = np.exp(multinomial_log_pmf(self.types, p_vw))

        pug = triple.u_given_v
        pw = triple.p_w
        kern = np.where(triple.kernel_w_given_v.valid[:, None], triple.kernel_w_given_v.matrix, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            lr = (np.log(kern) - np.log(pw)[None, :]).reshape(-1)
        used = self.types > 0
        with np.errstate(invalid="ignore"):
            dens = np.where(used, self.types * lr[None, :], 0.0)
        self.density_vw = dens.sum(axis=1) / n
        self.density_vw[np.any(used & np.isnan(lr)[None, :], axis=1)] = np.nan

        self.values = self._conditional_means(pug, functionals, row_cap)

    def _conditional_means(self, pug, functionals, row_cap):
        ku, kv, kw, n = self.ku, self.kv, self.kw, self.n
        cache: dict[tuple, tuple[np.ndarray, np.ndarray] | None] = {}

        def ucount_dist(col: tuple):
            # distribution of u-symbol counts over positions sharing one w-symbol
            if col in cache:
                return cache[col]
            cur = {(0,) * ku: 1.0}
            for a, m in enumerate(col):
                if m == 0:
                    continue
                if not pug.valid[a]:
                    cache[col] = None
                    return None
                comps = compositions(m, ku)
                pmf = np.exp(multinomial_log_pmf(comps, pug.matrix[a]))
                nxt: dict[tuple, float] = {}
                for key, p in cur.items():
                    for c, q in zip(comps, pmf):
                        if q == 0.0:
                            continue
                        k2 = tuple(x + int(y) for x, y in zip(key, c))
                        nxt[k2] = nxt.get(k2, 0.0) + p * q
                cur = nxt
            keys = np.array(list(cur.keys()), dtype=np.int64).reshape(-1, ku)
            out = (keys, np.array(list(cur.values())))
            cache[col] = out
            return out

        row_type, row_prob, row_key = [], [], []
        uniq: dict[tuple, int] = {}
        total = 0
        for t, counts in enumerate(self.types):
            mat = counts.reshape(kv, kw)
            per_b = []
            ok = True
            for b in range(kw):
                d = ucount_dist(tuple(int(x) for x in mat[:, b]))
                if d is None:
                    ok = False
                    break
                per_b.append(d)
            if not ok:
                continue
            sizes = [len(d[1]) for d in per_b]
            total += math.prod(sizes)
            if total > row_cap:
                raise CapacityError(f"joint-type expansion exceeds {row_cap} rows", required=total, cap=row_cap)
            for combo in itertools.product(*[range(s) for s in sizes]):
                key = tuple(int(x) for b, i in enumerate(combo) for x in per_b[b][0][i])
                p = 1.0
                for b, i in enumerate(combo):
                    p *= per_b[b][1][i]
                if key not in uniq:
                    uniq[key] = len(uniq)
                row_type.append(t)
                row_prob.append(p)
                row_key.append(uniq[key])

        # one representative (u, w) block pair per distinct (u, w)-type
        keys = np.array(list(uniq.keys()), dtype=np.int64).reshape(-1, kw, ku)
        reps_u = np.empty((len(keys), n), dtype=np.int64)
        reps_w = np.empty((len(keys), n), dtype=np.int64)
        for r, mat in enumerate(keys):
            pos = 0
            for b in range(kw):
                for u in range(ku):
                    c = mat[b, u]
                    reps_u[r, pos:pos + c] = u
                    reps_w[r, pos:pos + c] = b
                    pos += c
        row_type = np.array(row_type, dtype=np.int64)
        row_prob = np.array(row_prob)
        row_key = np.array(row_key, dtype=np.int64)
        out = []
        for fn in functionals:
            vals = np.concatenate([np.asarray(fn(reps_u[s:s + 65536], reps_w[s:s + 65536]), float)
                                   for s in range(0, len(keys), 65536)]) if len(keys) else np.zeros(0)
            eta = np.full(len(self.types), np.nan)
            acc = np.bincount(row_type, weights=row_prob * vals[row_key], minlength=len(self.types))
            valid = np.zeros(len(self.types), bool)
            valid[np.unique(row_type)] = True
            eta[valid] = acc[valid]
            out.append(eta)
        return out

    def block_codes(self, v_blocks, w_blocks) -> np.ndarray:
        v = np.asarray(v_blocks, dtype=np.int64)
        w = np.asarray(w_blocks, dtype=np.int64)
        return self.weights[v * self.kw + w].sum(axis=-1)

    def index_of(self, codes) -> np.ndarray:
        return self._order[np.searchsorted(self._sorted_codes, codes)]

    def type_index(self, v_blocks, w_blocks) -> np.ndarray:
        return self.index_of(self.block_codes(v_blocks, w_blocks))


class CoveringProblem:
    """A Markov triple at fixed blocklength with an acceptance set and a
    bounded distortion; the object every covering computation runs on."""

    def __init__(self, triple: MarkovTriple, acceptance: AcceptanceSet | None = None,
                 distortion: DistortionMeasure | None = None, *, cap: int = ENUM_CAP,
                 use_types: bool | None = None):
        self.triple = triple
        self.n = triple.blocklength
        ku, kv, kw = triple.letter_sizes
        self.ku, self.kv, self.kw = ku, kv, kw
        self.acceptance = AcceptanceSet.full() if acceptance is None else acceptance
        self.distortion = DistortionMeasure.zero(ku, kw) if distortion is None else distortion
        self.cap = cap
        self._miss = lambda u, w: (~self.acceptance(u, w)).astype(float)
        self._cache: dict = {}
        eligible = (triple.single_letter and self.acceptance.type_invariant
                    and self.distortion.type_invariant)
        if use_types and not eligible:
            raise ValidationError("joint-type route needs an i.i.d. triple and type-invariant A and d")
        self.tables: TypeTables | None = None
        if eligible and use_types is not False:
            try:
                self.tables = TypeTables(triple, self.n, [self._miss, self.distortion])
            except CapacityError:
                if use_types:
                    raise

    @property
    def d_zero(self) -> float:
        return self.distortion.d_zero

    @property
    def uses_types(self) -> bool:
        return self.tables is not None

    # -- block-level helpers -------------------------------------------------
    def v_blocks(self) -> tuple[np.ndarray, np.ndarray]:
        """All v-blocks and their probabilities."""
        if "v" not in self._cache:
            blocks = all_blocks(self.kv, self.n, self.cap)
            if self.triple.single_letter:
                pv = self.triple.p_v
                with np.errstate(divide="ignore"):
                    p = np.exp(np.log(pv)[blocks].sum(axis=1))
            else:
                p = self.triple.joint_uv.weights.sum(axis=0)
            self._cache["v"] = (blocks, p)
        return self._cache["v"]

    def _u_given_v_blocks(self) -> np.ndarray:
        """Dense ``P(u-block | v-block)`` as ``(n_v, n_u)``; zero-mass rows are nan."""
        if "pugv" not in self._cache:
            puv, _ = self.triple.block_tables(self.cap)
            pv = puv.sum(axis=0)
            with np.errstate(invalid="ignore", divide="ignore"):
                self._cache["pugv"] = (puv / pv[None, :]).T
        return self._cache["pugv"]

    def _u_blocks(self) -> np.ndarray:
        if "u" not in self._cache:
            self._cache["u"] = all_blocks(self.ku, self.n, self.cap)
        return self._cache["u"]

    def _dense_costs(self, words: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        u = self._u_blocks()
        if len(u) * len(words) > DENSE_CAP:
            raise CapacityError(f"dense cost matrix {len(u)} x {len(words)} over cap",
                                required=len(u) * len(words), cap=DENSE_CAP)
        c1 = self._miss(u[:, None, :], words[None, :, :])
        c2 = self.distortion(u[:, None, :], words[None, :, :])
        return c1, c2

    def _check_block(self, blk, k, what):
        b = np.asarray(blk, dtype=np.int64)
        if b.shape[-1] != self.n or np.any(b < 0) or np.any(b >= k):
            raise ValidationError(f"invalid {what} block for n={self.n}, alphabet {k}")
        return b

    # -- eta -------------------------------------------------------------------
    def eta(self, v_block, words) -> tuple[np.ndarray, np.ndarray]:
        """``(eta1, eta2)`` of one v-block against each row of ``words``."""
        v = self._check_block(v_block, self.kv, "v")
        words = self._check_block(np.atleast_2d(words), self.kw, "w")
        if self.tables is not None:
            if self._v_prob(v) <= 0:
                raise ZeroMassError("eta is undefined at a zero-probability v-block")
            idx = self.tables.type_index(v[None, :], words)
            e1, e2 = self.tables.values
            return e1[idx], e2[idx]
        pugv = self._u_given_v_blocks()
        row = pugv[block_code(v, self.kv)]
        if np.any(np.isnan(row)):
            raise ZeroMassError("eta is undefined at a zero-probability v-block")
        c1, c2 = self._dense_costs(words)
        return row @ c1, row @ c2

    def _v_prob(self, v) -> float:
        if self.triple.single_letter:
            with np.errstate(divide="ignore"):
                return float(np.exp(np.log(self.triple.p_v)[v].sum()))
        return float(self.triple.joint_uv.weights[:, block_code(v, self.kv)].sum())

    def eta1(self, v_block, w_block) -> float:
        return float(self.eta(v_block, np.atleast_2d(w_block))[0][0])

    def eta2(self, v_block, w_block) -> float:
        return float(self.eta(v_block, np.atleast_2d(w_block))[1][0])

    def eta_estimate(self, v_block, w_block, which: int, samples: int,
                     rng: np.random.Generator) -> Estimate:
        """Conditional Monte Carlo for eta1 (``which=1``) or eta2 (``which=2``)."""
        if not self.triple.single_letter:
            raise ValidationError("Monte Carlo eta needs an i.i.d. triple")
        v = self._check_block(v_block, self.kv, "v")
        w = self._check_block(w_block, self.kw, "w")
        pug = self.triple.u_given_v
        u = np.empty((samples, self.n), dtype=np.int64)
        r = rng.random((samples, self.n))
        for i, a in enumerate(v):
            c = np.cumsum(pug.row(int(a)))
            c[-1] = 1.0
            u[:, i] = np.searchsorted(c, r[:, i], side="right")
        vals = (self._miss if which == 1 else self.distortion)(u, w[None, :])
        vals = np.asarray(vals, float)
        return Estimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples)), False)

    # -- expectations over (V, W) ---------------------------------------------------
    def _vw_expect(self, which: int) -> float:
        key = f"E{which}"
        if key not in self._cache:
            if self.tables is not None:
                vals = self.tables.values[which - 1]
                p = self.tables.prob
                self._cache[key] = float(np.sum(np.where(p > 0, p * np.nan_to_num(vals), 0.0)))
            else:
                e1, e2, pvw = self._dense_all_w()
                e = e1 if which == 1 else e2
                self._cache[key] = float(np.nansum(pvw * e))
        return self._cache[key]

    def _dense_all_w(self):
        if "dense_all" not in self._cache:
            check_enumerable(self.kw, self.n, self.cap, "w block space")
            words = all_blocks(self.kw, self.n, self.cap)
            pugv = self._u_given_v_blocks()
            c1, c2 = self._dense_costs(words)
            safe = np.nan_to_num(pugv)
            _, kern = self.triple.block_tables(self.cap)
            _, pv = self.v_blocks()
            pvw = pv[:, None] * kern
            e1, e2 = safe @ c1, safe @ c2
            bad = np.isnan(pugv).any(axis=1)
            e1[bad] = np.nan
            e2[bad] = np.nan
            self._cache["dense_all"] = (e1, e2, pvw)
        return self._cache["dense_all"]

    @property
    def delta_n(self) -> float:
        """``E[eta1(V, W)] = Pr{(U, W) not in A}``."""
        return self._vw_expect(1)

    @property
    def baseline_distortion(self) -> float:
        """``E[eta2(V, W)] = E[d(U, W)]``."""
        return self._vw_expect(2)

    @property
    def t1_threshold(self) -> float:
        return math.sqrt(max(self.delta_n, 0.0))

    def prob_outside_t1(self, threshold: float | None = None) -> float:
        thr = self.t1_threshold if threshold is None else threshold
        if self.tables is not None:
            out = keyed(self.tables.values[0]) > keyed(thr)
            return float(np.sum(self.tables.prob[out & (self.tables.prob > 0)]))
        e1, _, pvw = self._dense_all_w()
        with np.errstate(invalid="ignore"):
            out = keyed(e1) > keyed(thr)
        return float(np.sum(pvw[out]))

    def markov_bound_holds(self, threshold: float | None = None) -> bool:
        """Pr{(V, W) not in T1} <= sqrt(delta_n); Markov's inequality."""
        thr = self.t1_threshold if threshold is None else threshold
        return self.prob_outside_t1(thr) <= thr + 1e-12

    # -- T2 ------------------------------------------------------------------------
    def density_vw(self, v_block, w_block) -> float:
        """``(1/n) ln P(w|v) / P(w)``; nan where P(w) = 0."""
        v = self._check_block(v_block, self.kv, "v")
        w = self._check_block(w_block, self.kw, "w")
        if self.triple.single_letter:
            k = np.where(self.triple.kernel_w_given_v.valid[:, None],
                         self.triple.kernel_w_given_v.matrix, 0.0)
            pw = self.triple.p_w
            with np.errstate(divide="ignore", invalid="ignore"):
                lr = np.log(k[v, w]) - np.log(pw[w])
            if np.any(pw[w] == 0):
                return float("nan")
            return float(lr.sum() / self.n)
        _, kern = self.triple.block_tables(self.cap)
        _, pv = self.v_blocks()
        pw = pv @ kern
        iv, iw = block_code(v, self.kv), block_code(w, self.kw)
        if pw[iw] == 0:
            return float("nan")
        with np.errstate(divide="ignore"):
            return float((math.log(kern[iv, iw]) if kern[iv, iw] > 0 else -math.inf)
                         - math.log(pw[iw])) / self.n

    def prob_outside_t2(self, rho: float) -> float:
        if self.tables is not None:
            d = self.tables.density_vw
            with np.errstate(invalid="ignore"):
                out = ~(d <= rho + 1e-12)
            return float(np.sum(self.tables.prob[out & (self.tables.prob > 0)]))
        _, kern = self.triple.block_tables(self.cap)
        _, pv = self.v_blocks()
        pw = pv @ kern
        with np.errstate(divide="ignore", invalid="ignore"):
            dens = (np.log(kern) - np.log(pw)[None, :]) / self.n
            out = ~(dens <= rho + 1e-12)
        return float(np.sum((pv[:, None] * kern)[out]))


def in_t1(problem: CoveringProblem, v_block, w_block, threshold: float) -> bool:
    """``eta1(v, w) <= threshold`` (compared at 1e-12 resolution)."""
    return bool(keyed(problem.eta1(v_block, w_block)) <= keyed(threshold))


def in_t2(problem: CoveringProblem, v_block, w_block, rho: float) -> bool:
    """``(1/n) ln P(w|v)/P(w) <= rho``; false (with a nan density) when P(w) = 0."""
    d = problem.density_vw(v_block, w_block)
    if math.isnan(d):
        return False
    return d <= rho + 1e-12


def _eta(problem, which, v_block, w_block, mc_samples, rng):
    try:
        return problem.eta1(v_block, w_block) if which == 1 else problem.eta2(v_block, w_block)
    except CapacityError:
        if not mc_samples:
            raise
        rng = np.random.default_rng(0) if rng is None else rng
        return problem.eta_estimate(v_block, w_block, which, mc_samples, rng).value


def eta1(triple: MarkovTriple, acceptance: AcceptanceSet, v_block, w_block, *,
         cap: int = ENUM_CAP, mc_samples: int | None = None, rng=None) -> float:
    """Conditional probability that ``(U, w)`` leaves the acceptance set given
    ``V = v``. Falls back to Monte Carlo only when ``mc_samples`` is given."""
    problem = CoveringProblem(triple, acceptance, None, cap=cap)
    return _eta(problem, 1, v_block, w_block, mc_samples, rng)


def eta2(triple: MarkovTriple, distortion: DistortionMeasure, v_block, w_block, *,
         cap: int = ENUM_CAP, mc_samples: int | None = None, rng=None) -> float:
    """Conditional expected distortion ``E[d(U, w) | V = v]``."""
    problem = CoveringProblem(triple, None, distortion, cap=cap)
    return _eta(problem, 2, v_block, w_block, mc_samples, rng)


def delta_n(triple: MarkovTriple, acceptance: AcceptanceSet, **kw) -> float:
    return CoveringProblem(triple, acceptance, None, **kw).delta_n
