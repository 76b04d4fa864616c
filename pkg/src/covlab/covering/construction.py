"""Random codebooks and the two-case covering map built on them.

For a codebook ``w_1..w_M`` and a v-block, the map picks the codeword with
smallest eta2 among those whose pair with v lies in T1
(``eta1 <= sqrt(delta_n)``); if none does, the smallest eta2 over the whole
codebook. Ties go to the lowest codebook index.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import CapacityError, ValidationError
from ..prob import ENUM_CAP, FiniteDistribution, MarkovTriple, block_code, rng_stream, sample_block
from ..spectrum import spectral_rate_iid
from . import _kernels
from .eta import DENSE_CAP, CoveringProblem, keyed
from .sets import AcceptanceSet, DistortionMeasure

DEFAULT_M_CAP = 2**22
_BIG = int(_kernels.BIG)


def codebook_size(i_bar: float, gamma: float, n: int, m_cap: int = DEFAULT_M_CAP) -> int:
    """``ceil(exp(n (i_bar + gamma)))``, refusing anything over ``m_cap``."""
    if gamma <= 0:
        raise ValidationError(f"gamma must be > 0, got {gamma}")
    if i_bar < 0:
        raise ValidationError(f"information rate must be >= 0, got {i_bar}")
    if n < 1:
        raise ValidationError(f"blocklength must be >= 1, got {n}")
    exponent = n * (i_bar + gamma)
    if exponent > math.log(m_cap) + 1:
        raise CapacityError(f"codebook needs about e^{exponent:.2f} words, cap is {m_cap}",
                            required=math.exp(exponent) if exponent < 700 else math.inf, cap=m_cap)
    m = math.ceil(math.exp(exponent))
    if m > m_cap:
        raise CapacityError(f"codebook needs {m} words, cap is {m_cap}", required=m, cap=m_cap)
    return m


@dataclass(frozen=True, eq=False)
class Codebook:
    """Ordered codewords; row ``i`` is codeword ``i`` (0-based sampling order)."""

    words: np.ndarray
    source_seed: int | None = None

    def __post_init__(self):
        w = np.array(self.words, dtype=np.int64)
        if w.ndim != 2 or w.shape[0] == 0:
            raise ValidationError("codebook needs at least one codeword")
        w.flags.writeable = False
        object.__setattr__(self, "words", w)

    @property
    def m(self) -> int:
        return self.words.shape[0]

    @property
    def n(self) -> int:
        return self.words.shape[1]

    def distinct(self, k_w: int) -> tuple[np.ndarray, np.ndarray]:
        """Distinct codewords and the index of their first occurrence, by index."""
        codes = block_code(self.words, k_w)
        _, first = np.unique(codes, return_index=True)
        first.sort()
        return self.words[first], first


def sample_codebook(p_w: FiniteDistribution | np.ndarray, n: int, m: int, seed: int,
                    stream: int = 0) -> Codebook:
    dist = p_w if isinstance(p_w, FiniteDistribution) else FiniteDistribution(p_w)
    rng = rng_stream(seed, stream)
    return Codebook(sample_block(dist, n, rng, count=m), source_seed=seed)


@dataclass(frozen=True)
class CoverChoice:
    word: np.ndarray
    index: int
    used_fallback: bool


def covering_map(v_block, codebook: Codebook, t1_threshold: float,
                 triple: MarkovTriple | None = None, acceptance: AcceptanceSet | None = None,
                 distortion: DistortionMeasure | None = None, *,
                 problem: CoveringProblem | None = None) -> CoverChoice:
    """Covering map for a single v-block; the reference form of the rule."""
    if problem is None:
        problem = CoveringProblem(triple, acceptance, distortion)
    words, first = codebook.distinct(problem.kw)
    e1, e2 = problem.eta(v_block, words)
    k2 = keyed(e2)
    feasible = keyed(e1) <= keyed(t1_threshold)
    pool = feasible if feasible.any() else np.ones_like(feasible)
    best = k2[pool].min()
    j = int(np.flatnonzero(pool & (k2 == best))[0])
    return CoverChoice(words[j].copy(), int(first[j]), not bool(feasible.any()))


@dataclass
class Assignment:
    """Covering map evaluated on every v-block of positive probability."""

    v_blocks: np.ndarray
    p_v: np.ndarray
    index: np.ndarray
    fallback: np.ndarray
    eta1: np.ndarray
    eta2: np.ndarray
    method: str

    @property
    def miss_prob(self) -> float:
        return float(np.dot(self.p_v, self.eta1))

    @property
    def achieved_distortion(self) -> float:
        return float(np.dot(self.p_v, self.eta2))

    @property
    def fallback_rate(self) -> float:
        return float(np.dot(self.p_v, self.fallback))

    @property
    def distinct_codewords(self) -> int:
        return int(np.unique(self.index).size)


def _type_ranks(problem: CoveringProblem, threshold: float) -> tuple[np.ndarray, np.ndarray]:
    key = ("ranks", float(threshold))
    if key in problem._cache:
        return problem._cache[key]
    e1, e2 = problem.tables.values
    valid = ~(np.isnan(e1) | np.isnan(e2))
    infeasible = ~(keyed(e1) <= keyed(threshold))
    rank = np.full(len(e1), _BIG, dtype=np.int64)
    pairs = np.stack([infeasible[valid].astype(float), keyed(e2[valid])], axis=1)
    _, dense_rank = np.unique(pairs, axis=0, return_inverse=True)
    rank[valid] = dense_rank.reshape(-1)
    problem._cache[key] = (rank, infeasible)
    return rank, infeasible


def _enumeration_plan(problem: CoveringProblem, rank: np.ndarray, v_blocks: np.ndarray):
    tables = problem.tables
    kv, kw, n = problem.kv, problem.kw, problem.n
    comp_code_w = (n + 1) ** np.arange(kv, dtype=np.int64)
    v_counts = np.stack([(v_blocks == a).sum(axis=1) for a in range(kv)], axis=1)
    v_comp_code = v_counts @ comp_code_w
    uniq, v_comp = np.unique(v_comp_code, return_inverse=True)
    row_sums = tables.types.reshape(-1, kv, kw).sum(axis=2) @ comp_code_w
    starts, stops, chunks = [], [], []
    pos = 0
    for code in uniq:
        idx = np.flatnonzero(row_sums == code)
        idx = idx[np.argsort(rank[idx], kind="stable")]
        chunks.append(idx)
        starts.append(pos)
        pos += len(idx)
        stops.append(pos)
    order = np.concatenate(chunks)
    return (v_comp.astype(np.int64), np.array(starts, np.int64), np.array(stops, np.int64),
            np.ascontiguousarray(tables.types[order]), np.ascontiguousarray(rank[order]))


def choose_method(problem: CoveringProblem, n_distinct: int) -> str:
    if problem.tables is None:
        return "dense"
    w_space = problem.kw ** problem.n
    if w_space <= problem.cap and n_distinct * n_distinct >= w_space:
        return "enumerate"
    return "scan"


def assign_codewords(problem: CoveringProblem, codebook: Codebook, t1_threshold: float | None = None,
                     method: str = "auto") -> Assignment:
    """Apply the covering map to every v-block with positive probability."""
    thr = problem.t1_threshold if t1_threshold is None else t1_threshold
    if codebook.n != problem.n:
        raise ValidationError(f"codebook blocklength {codebook.n} != problem blocklength {problem.n}")
    v_all, p_all = problem.v_blocks()
    keep = p_all > 0
    v_blocks, p_v = v_all[keep], p_all[keep]
    words, first = codebook.distinct(problem.kw)
    if method == "auto":
        method = choose_method(problem, len(words))
    if method in ("enumerate", "scan") and problem.tables is None:
        raise ValidationError(f"method {method!r} needs the joint-type tables")

    if method == "dense":
        index, e1, e2, fallback = _assign_dense(problem, v_blocks, words, first, thr)
        return Assignment(v_blocks, p_v, index, fallback, e1, e2, method)

    rank, infeasible = _type_ranks(problem, thr)
    out_index = np.empty(len(v_blocks), np.int64)
    out_rank = np.empty(len(v_blocks), np.int64)
    vb = np.ascontiguousarray(v_blocks, dtype=np.int64)
    if method == "enumerate":
        first_index = np.full(problem.kw ** problem.n, -1, np.int64)
        first_index[block_code(words, problem.kw)] = first
        plan = _enumeration_plan(problem, rank, vb)
        _kernels.assign_by_enumeration(vb, *plan, first_index, problem.kv, problem.kw,
                                       out_index, out_rank)
    elif method == "scan":
        tables = problem.tables
        code_rank = np.ascontiguousarray(rank[tables._order])
        _kernels.assign_by_scan(vb, np.ascontiguousarray(words), np.ascontiguousarray(first),
                                tables.weights, problem.kw, tables._sorted_codes, code_rank,
                                out_index, out_rank)
    else:
        raise ValidationError(f"unknown method {method!r}")
    t_idx = problem.tables.type_index(vb, codebook.words[out_index])
    e1, e2 = problem.tables.values
    return Assignment(v_blocks, p_v, out_index, infeasible[t_idx], e1[t_idx], e2[t_idx], method)


def select_codewords(e1: np.ndarray, e2: np.ndarray, threshold: float) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise covering map on ``(n_v, n_words)`` eta tables.

    Returns the chosen column per row and whether the fallback case applied.
    Columns must be in codebook order so the first minimum is the lowest index.
    """
    k2 = keyed(e2)
    feasible = keyed(e1) <= keyed(threshold)
    has = feasible.any(axis=1)
    pool = np.where(has[:, None], feasible, True)
    masked = np.where(pool, k2, np.inf)
    best = masked.min(axis=1)
    return np.argmax(masked == best[:, None], axis=1), ~has


def _assign_dense(problem: CoveringProblem, v_blocks, words, first, thr):
    if len(v_blocks) * len(words) > DENSE_CAP:
        raise CapacityError("dense assignment matrix over cap", required=len(v_blocks) * len(words),
                            cap=DENSE_CAP)
    pugv = problem._u_given_v_blocks()
    rows = pugv[block_code(v_blocks, problem.kv)]
    c1, c2 = problem._dense_costs(words)
    e1, e2 = rows @ c1, rows @ c2
    j, fallback = select_codewords(e1, e2, thr)
    r = np.arange(len(v_blocks))
    return first[j], e1[r, j], e2[r, j], fallback


def evaluate_codebook_exact(triple: MarkovTriple, acceptance: AcceptanceSet | None,
                            distortion: DistortionMeasure | None, codebook: Codebook,
                            t1_threshold: float | None = None, *, method: str = "auto",
                            problem: CoveringProblem | None = None) -> tuple[float, float]:
    """``(Pr{(U, F(V)) not in A}, E[d(U, F(V))])`` for a fixed codebook."""
    if problem is None:
        problem = CoveringProblem(triple, acceptance, distortion)
    a = assign_codewords(problem, codebook, t1_threshold, method)
    return a.miss_prob, a.achieved_distortion


# --------------------------------------------------------------------------
# Monte Carlo over codebooks


@dataclass(frozen=True)
class CoveringConfig:
    gamma: float
    blocklength: int
    trials: int = 20
    seed: int = 0
    m_cap: int = DEFAULT_M_CAP
    rho: float | None = None
    i_bar: float | None = None
    threads: int = 1
    method: str = "auto"
    enum_cap: int = ENUM_CAP

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValidationError(f"gamma must be > 0, got {self.gamma}")
        if self.m_cap < 1:
            raise ValidationError("m_cap must be >= 1")
        if self.trials < 1 or self.blocklength < 1 or self.threads < 1:
            raise ValidationError("trials, blocklength and threads must be >= 1")


@dataclass(frozen=True)
class TrialResult:
    trial: int
    miss_prob: float
    achieved_distortion: float
    distinct_codewords: int
    fallback_rate: float


def _sem(x) -> float:
    x = np.asarray(x, float)
    return float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0


@dataclass(frozen=True)
class CoveringReport:
    n: int
    gamma: float
    i_bar: float
    rho: float
    m_used: int
    delta_n: float
    t1_threshold: float
    baseline_distortion: float
    d_zero: float
    prob_outside_t1: float
    prob_outside_t2: float
    miss_prob: float
    achieved_distortion: float
    per_trial: tuple[TrialResult, ...]
    method: str = ""

    @property
    def miss_prob_stderr(self) -> float:
        return _sem([t.miss_prob for t in self.per_trial])

    @property
    def achieved_distortion_stderr(self) -> float:
        return _sem([t.achieved_distortion for t in self.per_trial])

    @property
    def distortion_excess(self) -> float:
        return self.achieved_distortion - self.baseline_distortion

    @property
    def fallback_rate(self) -> float:
        return float(np.mean([t.fallback_rate for t in self.per_trial]))

    @property
    def max_distinct(self) -> int:
        return max(t.distinct_codewords for t in self.per_trial)

    @property
    def cardinality_ok(self) -> bool:
        return self.max_distinct <= self.m_used

    @property
    def markov_ok(self) -> bool:
        return self.prob_outside_t1 <= self.t1_threshold + 1e-12

    @property
    def _tail(self) -> float:
        return math.exp(-self.m_used * math.exp(-self.n * self.rho))

    @property
    def miss_bound(self) -> float:
        """Finite-n bound on the codebook-averaged miss probability."""
        return 2 * math.sqrt(self.delta_n) + self.prob_outside_t2 + self._tail

    @property
    def excess_bound(self) -> float:
        """Finite-n bound on the codebook-averaged distortion excess."""
        return self.d_zero * (math.sqrt(self.delta_n) + self.prob_outside_t2 + self._tail)


def _problem_for(triple, acceptance, distortion, config) -> CoveringProblem:
    if triple.single_letter and triple.blocklength != config.blocklength:
        triple = triple.at_blocklength(config.blocklength)
    elif triple.blocklength != config.blocklength:
        raise ValidationError("config blocklength differs from the block-level triple")
    return CoveringProblem(triple, acceptance, distortion, cap=config.enum_cap)


def _w_marginal(problem: CoveringProblem) -> np.ndarray:
    if problem.triple.single_letter:
        return problem.triple.p_w
    raise ValidationError("codebook sampling from a block-level W law is not supported")


def monte_carlo_covering(triple: MarkovTriple, acceptance: AcceptanceSet | None,
                         distortion: DistortionMeasure | None, config: CoveringConfig,
                         *, problem: CoveringProblem | None = None) -> CoveringReport:
    """Average the exact per-codebook evaluation over independent codebooks.

    Trial ``t`` draws its codebook from RNG stream ``(config.seed, t)``, so
    results do not depend on ``config.threads``.
    """
    source = triple if problem is None else problem.triple
    n = config.blocklength if problem is None else problem.n
    i_bar = spectral_rate_iid(source) if config.i_bar is None else config.i_bar
    rho = i_bar + config.gamma / 2 if config.rho is None else config.rho
    # size check first: building the problem is the expensive part
    m = codebook_size(i_bar, config.gamma, n, config.m_cap)
    if problem is None:
        problem = _problem_for(triple, acceptance, distortion, config)
    p_w = FiniteDistribution(_w_marginal(problem))
    thr = problem.t1_threshold
    if problem.tables is not None:
        _type_ranks(problem, thr)  # warm the shared cache before threads start

    def one(t: int) -> tuple[TrialResult, str]:
        cb = sample_codebook(p_w, n, m, config.seed, t)
        a = assign_codewords(problem, cb, thr, config.method)
        return TrialResult(t, a.miss_prob, a.achieved_distortion, a.distinct_codewords,
                           a.fallback_rate), a.method

    if config.threads > 1:
        with ThreadPoolExecutor(config.threads) as pool:
            results = list(pool.map(one, range(config.trials)))
    else:
        results = [one(t) for t in range(config.trials)]
    trials = tuple(r for r, _ in results)
    return CoveringReport(
        n=n, gamma=config.gamma, i_bar=i_bar, rho=rho, m_used=m,
        delta_n=problem.delta_n, t1_threshold=thr,
        baseline_distortion=problem.baseline_distortion, d_zero=problem.d_zero,
        prob_outside_t1=problem.prob_outside_t1(thr), prob_outside_t2=problem.prob_outside_t2(rho),
        miss_prob=float(np.mean([t.miss_prob for t in trials])),
        achieved_distortion=float(np.mean([t.achieved_distortion for t in trials])),
        per_trial=trials, method=results[0][1])


@dataclass(frozen=True)
class PropositionReport:
    covered_probability: float
    baseline_probability: float
    per_trial_covered: tuple[float, ...]
    covering: CoveringReport = field(repr=False)


def proposition_reduction(triple: MarkovTriple, target: AcceptanceSet, gamma: float,
                          config: CoveringConfig) -> PropositionReport:
    """Cover a set ``B`` by running the construction with ``A`` = everything and
    ``d = 1{(u, w) not in B}``; the covered probability is ``1 - E[d]``."""
    if config.gamma != gamma:
        config = CoveringConfig(**{**config.__dict__, "gamma": gamma})
    rep = monte_carlo_covering(triple, AcceptanceSet.full(), DistortionMeasure.miss_indicator(target),
                               config)
    return PropositionReport(
        covered_probability=1.0 - rep.achieved_distortion,
        baseline_probability=1.0 - rep.baseline_distortion,
        per_trial_covered=tuple(1.0 - t.achieved_distortion for t in rep.per_trial),
        covering=rep)


# --------------------------------------------------------------------------
# the elementary inequality used twice in the construction's analysis


def check_covering_inequality(x: float, y: float, n: int) -> bool:
    """``(1 - x y)^n <= 1 - x + exp(-y n)`` for ``0 <= x, y <= 1``, ``n >= 1``."""
    if not (0 <= x <= 1 and 0 <= y <= 1) or n < 1 or int(n) != n:
        raise ValidationError(f"domain is 0 <= x, y <= 1 and integer n >= 1; got {(x, y, n)}")
    return (1 - x * y) ** n <= 1 - x + math.exp(-y * n)


def covering_inequality_grid(steps: int = 100, n_max: int = 100) -> tuple[int, int]:
    """Check the inequality on ``x, y in {0, 1/steps, ..., 1}``, ``n in 1..n_max``.

    Returns ``(checks, failures)``.
    """
    g = np.arange(steps + 1) / steps
    x, y = np.meshgrid(g, g, indexing="ij")
    n = np.arange(1, n_max + 1, dtype=float)[:, None, None]
    lhs = (1 - x * y)[None] ** n
    rhs = 1 - x[None] + np.exp(-y[None] * n)
    ok = lhs <= rhs
    return int(ok.size), int((~ok).sum())
