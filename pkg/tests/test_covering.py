import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from covlab.covering import (AcceptanceSet, Codebook, CoveringConfig, CoveringProblem,
                             DistortionMeasure, assign_codewords, check_covering_inequality,
                             codebook_size, covering_inequality_grid, covering_map, delta_n,
                             eta1, eta2, evaluate_codebook_exact, in_t1, in_t2,
                             monte_carlo_covering, proposition_reduction, sample_codebook,
                             select_codewords)
from covlab.errors import CapacityError, ValidationError
from covlab.prob import (ConditionalKernel, FiniteDistribution, all_blocks, bsc, compose_markov,
                         dsbs, identity_kernel, product, uniform)

import oracles

HAM = DistortionMeasure.hamming(2)


def chain(n):
    return compose_markov(dsbs(0.1), bsc(0.2), n)


def threshold_set(level):
    return AcceptanceSet.distortion_threshold(HAM, level)


def miss_fn(level):
    return lambda u, w: float(oracles.hamming_frac(u, w) > level + 1e-12)


class TestSets:
    def test_full_and_empty(self):
        u = np.zeros((3, 4), int)
        assert AcceptanceSet.full()(u, u).all()
        assert not AcceptanceSet.empty()(u, u).any()

    def test_threshold_membership(self):
        a = threshold_set(0.25)
        assert a.contains([0, 0, 0, 0], [0, 0, 0, 1])
        assert not a.contains([0, 0, 0, 0], [0, 0, 1, 1])

    def test_explicit_list(self):
        a = AcceptanceSet.explicit_list([((0, 1), (1, 1))])
        assert a.contains([0, 1], [1, 1])
        assert not a.contains([0, 1], [0, 1])

    def test_distortion_validation(self):
        with pytest.raises(ValidationError):
            DistortionMeasure.from_table([[0, -1], [1, 0]])
        with pytest.raises(ValidationError):
            DistortionMeasure(block_fn=lambda u, w: u)

    def test_d_zero(self):
        assert DistortionMeasure.from_table([[0, 3], [1, 0]]).d_zero == 3.0

    @given(st.lists(st.integers(0, 1), min_size=1, max_size=8), st.data())
    def test_hamming_is_mismatch_fraction(self, u, data):
        w = data.draw(st.lists(st.integers(0, 1), min_size=len(u), max_size=len(u)))
        assert float(HAM(u, w)) == pytest.approx(oracles.hamming_frac(u, w))


class TestEta:
    def test_full_acceptance(self):
        for v in all_blocks(2, 3):
            assert eta1(chain(3), AcceptanceSet.full(), v, [1, 0, 1]) == 0.0

    def test_independent_u_half(self):
        t = compose_markov(product(uniform(2), uniform(2)), identity_kernel(2), 1)
        a = AcceptanceSet.from_predicate(lambda u, w: (u == w).all(axis=-1))
        for v in (0, 1):
            for w in (0, 1):
                assert eta1(t, a, [v], [w]) == pytest.approx(0.5)

    def test_threshold_against_enumeration(self):
        p_uv = dsbs(0.1).weights
        v, w = (0, 1, 1, 0), (0, 0, 1, 1)
        expected = oracles.eta_direct(p_uv, miss_fn(0.2), v, w, 2)
        assert eta1(chain(4), threshold_set(0.2), v, w) == pytest.approx(expected, abs=1e-12)

    def test_zero_distortion(self):
        assert eta2(chain(2), DistortionMeasure.zero(2, 2), [0, 1], [1, 1]) == 0.0

    def test_point_mass_conditional(self):
        t = compose_markov(FiniteDistribution(np.diag([0.5, 0.5])), bsc(0.3), 1)
        for v in (0, 1):
            for w in (0, 1):
                assert eta2(t, HAM, [v], [w]) == pytest.approx(float(v != w))

    def test_dsbs_n2(self):
        # four-term sum: P(u|v) over u in {0,1}^2 with v = (0,0), w = (0,1)
        p = {0: 0.9, 1: 0.1}
        expected = sum(p[u1] * p[u2] * ((u1 != 0) + (u2 != 1)) / 2 for u1 in (0, 1) for u2 in (0, 1))
        assert eta2(chain(2), HAM, [0, 0], [0, 1]) == pytest.approx(expected, abs=1e-14)

    def test_types_match_dense(self):
        a = threshold_set(0.3)
        t = chain(5)
        typed = CoveringProblem(t, a, HAM)
        dense = CoveringProblem(t, a, HAM, use_types=False)
        assert typed.uses_types and not dense.uses_types
        words = all_blocks(2, 5)
        for v in all_blocks(2, 5)[::5]:
            for x, y in zip(typed.eta(v, words), dense.eta(v, words)):
                assert np.allclose(x, y, atol=1e-12)

    def test_monte_carlo_estimate(self):
        p = CoveringProblem(chain(6), threshold_set(0.3), HAM)
        v, w = [0, 1, 0, 1, 1, 0], [0, 1, 1, 1, 0, 0]
        est = p.eta_estimate(v, w, 2, 20000, np.random.default_rng(0))
        assert abs(est.value - p.eta2(v, w)) < 5 * est.stderr

    def test_capacity_without_fallback(self):
        # a predicate without the type-invariance flag forces block enumeration
        a = AcceptanceSet.from_predicate(lambda u, w: HAM(u, w) <= 0.3)
        with pytest.raises(CapacityError):
            eta1(chain(12), a, [0] * 12, [1] * 12, cap=2**10)
        val = eta1(chain(12), a, [0] * 12, [1] * 12, cap=2**10, mc_samples=500)
        assert 0.0 <= val <= 1.0


class TestDelta:
    def test_trivial(self):
        assert delta_n(chain(3), AcceptanceSet.full()) == 0.0
        assert delta_n(chain(3), AcceptanceSet.empty()) == pytest.approx(1.0)

    def test_against_enumeration(self):
        expected = oracles.delta_direct(dsbs(0.1).weights, bsc(0.2).matrix, miss_fn(0.3), 4)
        assert delta_n(chain(4), threshold_set(0.3)) == pytest.approx(expected, abs=1e-12)

    def test_baseline_is_single_letter(self):
        # P(U != W) for the DSBS(0.1) -> BSC(0.2) chain
        p = CoveringProblem(chain(4), None, HAM)
        assert p.baseline_distortion == pytest.approx(0.1 * 0.8 + 0.9 * 0.2, abs=1e-12)


class TestTypicality:
    def test_t1_trivial(self):
        p = CoveringProblem(chain(2), AcceptanceSet.full(), HAM)
        assert p.t1_threshold == 0.0
        assert all(in_t1(p, v, w, 0.0) for v in all_blocks(2, 2) for w in all_blocks(2, 2))

    def test_t2_independent(self):
        t = compose_markov(dsbs(0.1), ConditionalKernel(np.full((2, 2), 0.5)), 2)
        p = CoveringProblem(t, None, None)
        assert all(in_t2(p, v, w, 0.0) for v in all_blocks(2, 2) for w in all_blocks(2, 2))

    def test_t2_identity(self):
        t = compose_markov(product(uniform(2), uniform(2)), identity_kernel(2), 1)
        p = CoveringProblem(t, None, None)
        assert p.density_vw([0], [0]) == pytest.approx(math.log(2))
        assert not in_t2(p, [0], [0], 0.5)

    def test_t2_zero_marginal(self):
        t = compose_markov(dsbs(0.1), ConditionalKernel(np.array([[1.0, 0.0], [1.0, 0.0]])), 1)
        assert not in_t2(CoveringProblem(t, None, None), [0], [1], 10.0)

    @pytest.mark.parametrize("n", [2, 4, 6])
    @pytest.mark.parametrize("level", [0.1, 0.3])
    def test_markov_inequality(self, n, level):
        for types in (None, False):
            p = CoveringProblem(chain(n), threshold_set(level), HAM, use_types=types)
            assert p.prob_outside_t1() <= p.t1_threshold + 1e-12


class TestCodebookSize:
    def test_examples(self):
        assert codebook_size(0.0, 0.1, 10) == 3
        assert codebook_size(math.log(2), 1e-18, 1) == 2
        assert codebook_size(0.5, 0.1, 4) == 12
        assert math.exp(2.4) == pytest.approx(11.02, abs=0.01)

    def test_errors(self):
        with pytest.raises(CapacityError) as exc:
            codebook_size(0.5, 0.1, 40, m_cap=1000)
        assert exc.value.cap == 1000
        with pytest.raises(ValidationError):
            codebook_size(0.5, 0.0, 4)
        with pytest.raises(ValidationError):
            codebook_size(-0.1, 0.1, 4)


class TestCoveringMap:
    def test_single_word(self):
        p = CoveringProblem(chain(3), threshold_set(0.0), HAM)
        cb = Codebook([[1, 1, 1]])
        for v in all_blocks(2, 3):
            c = covering_map(v, cb, p.t1_threshold, problem=p)
            assert c.index == 0
            assert c.used_fallback == (not in_t1(p, v, [1, 1, 1], p.t1_threshold))

    def test_constrained_choice(self):
        # word 0: eta1 = 0.1 (outside T1 at threshold 0.05), eta2 = 0.0
        # word 1: eta1 = 0.0 (inside), eta2 = 0.1
        e1 = np.array([[0.1, 0.0]])
        e2 = np.array([[0.0, 0.1]])
        j, fb = select_codewords(e1, e2, 0.05)
        assert j[0] == 1 and not fb[0]
        j, fb = select_codewords(e1, e2, 0.0 - 1.0)
        assert j[0] == 0 and fb[0]

    def test_ties_lowest_index(self):
        j, _ = select_codewords(np.zeros((1, 3)), np.array([[0.3, 0.1, 0.1]]), 0.0)
        assert j[0] == 1

    def test_reproducible(self):
        t = chain(4)
        p = CoveringProblem(t, threshold_set(0.35), HAM)
        picks = []
        for _ in range(2):
            cb = sample_codebook(t.p_w, 4, 12, seed=99)
            picks.append([covering_map(v, cb, p.t1_threshold, problem=p).index for v in all_blocks(2, 4)])
        assert picks[0] == picks[1]

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_oracle_choice(self, seed):
        n = 4
        t = chain(n)
        p = CoveringProblem(t, threshold_set(0.25), HAM)
        cb = sample_codebook(t.p_w, n, 6, seed=seed)
        _, _, chosen = oracles.covering_eval_direct(
            dsbs(0.1).weights, miss_fn(0.25), oracles.hamming_frac,
            [tuple(w) for w in cb.words], p.t1_threshold)
        for v in all_blocks(2, n):
            c = covering_map(v, cb, p.t1_threshold, problem=p)
            assert np.array_equal(cb.words[chosen[tuple(v)]], c.word)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 20))
    def test_constrained_optimality(self, seed, m):
        n = 4
        t = chain(n)
        p = CoveringProblem(t, threshold_set(0.25), HAM)
        cb = sample_codebook(t.p_w, n, m, seed=seed)
        thr = p.t1_threshold
        for v in all_blocks(2, n):
            c = covering_map(v, cb, thr, problem=p)
            e1, e2 = p.eta(v, cb.words)
            pool = e1 <= thr + 1e-12 if not c.used_fallback else np.ones(m, bool)
            assert c.used_fallback == (not (e1 <= thr + 1e-12).any())
            assert e2[c.index] <= e2[pool].min() + 1e-12
            assert c.index == np.flatnonzero(pool & (np.round(e2, 12) == np.round(e2[c.index], 12)))[0]


class TestExactEvaluation:
    def test_trivial(self):
        t = chain(3)
        cb = sample_codebook(t.p_w, 3, 4, seed=1)
        miss, _ = evaluate_codebook_exact(t, AcceptanceSet.full(), HAM, cb)
        assert miss == 0.0
        _, dist = evaluate_codebook_exact(t, threshold_set(0.3), DistortionMeasure.zero(2, 2), cb)
        assert dist == 0.0

    @pytest.mark.parametrize("seed", range(4))
    def test_against_oracle_n6(self, seed):
        n = 6
        t = chain(n)
        p = CoveringProblem(t, threshold_set(0.35), HAM)
        cb = sample_codebook(t.p_w, n, 20, seed=seed)
        miss, dist = evaluate_codebook_exact(t, None, None, cb, problem=p)
        o_miss, o_dist, _ = oracles.covering_eval_direct(
            dsbs(0.1).weights, miss_fn(0.35), oracles.hamming_frac,
            [tuple(w) for w in cb.words], p.t1_threshold)
        assert miss == pytest.approx(o_miss, abs=1e-10)
        assert dist == pytest.approx(o_dist, abs=1e-10)

    @pytest.mark.parametrize("n,m", [(4, 10), (6, 40), (8, 200)])
    def test_methods_agree(self, n, m):
        t = chain(n)
        p = CoveringProblem(t, threshold_set(0.35), HAM)
        cb = sample_codebook(t.p_w, n, m, seed=n)
        res = {meth: assign_codewords(p, cb, method=meth) for meth in ("dense", "scan", "enumerate")}
        base = res["dense"]
        for a in res.values():
            assert np.array_equal(a.index, base.index)
            assert a.miss_prob == pytest.approx(base.miss_prob, abs=1e-12)
            assert a.achieved_distortion == pytest.approx(base.achieved_distortion, abs=1e-12)

    def test_non_type_invariant_set(self):
        # explicit list is not permutation invariant, so the dense path runs
        n = 2
        t = chain(n)
        acc = AcceptanceSet.explicit_list([(u, u) for u in [(0, 0), (1, 1), (0, 1)]])
        p = CoveringProblem(t, acc, HAM)
        assert not p.uses_types
        cb = sample_codebook(t.p_w, n, 3, seed=0)
        miss, dist = evaluate_codebook_exact(t, None, None, cb, problem=p)
        members = {(0, 0), (1, 1), (0, 1)}
        o_miss, o_dist, _ = oracles.covering_eval_direct(
            dsbs(0.1).weights, lambda u, w: float(not (u == w and u in members)),
            oracles.hamming_frac, [tuple(w) for w in cb.words], p.t1_threshold)
        assert miss == pytest.approx(o_miss, abs=1e-12)
        assert dist == pytest.approx(o_dist, abs=1e-12)


class TestMonteCarlo:
    def test_single_trial_is_exact_eval(self):
        t = chain(1)
        a = threshold_set(0.35)
        cfg = CoveringConfig(gamma=0.5, blocklength=6, trials=1, seed=3)
        rep = monte_carlo_covering(t, a, HAM, cfg)
        n6 = chain(6)
        cb = sample_codebook(n6.p_w, 6, rep.m_used, seed=3, stream=0)
        miss, dist = evaluate_codebook_exact(n6, a, HAM, cb)
        assert rep.miss_prob == miss and rep.achieved_distortion == dist

    def test_report_invariants(self):
        cfg = CoveringConfig(gamma=0.5, blocklength=8, trials=5, seed=1)
        rep = monte_carlo_covering(chain(1), threshold_set(0.35), HAM, cfg)
        assert rep.m_used == math.ceil(math.exp(8 * (rep.i_bar + 0.5)))
        assert rep.rho == pytest.approx(rep.i_bar + 0.25)
        assert rep.cardinality_ok and rep.markov_ok
        for tr in rep.per_trial:
            assert 0 <= tr.miss_prob <= 1
            assert 0 <= tr.achieved_distortion <= rep.d_zero
        assert rep.miss_prob_stderr >= 0

    def test_threads_do_not_change_results(self):
        a = threshold_set(0.35)
        r1 = monte_carlo_covering(chain(1), a, HAM, CoveringConfig(0.5, 8, trials=6, seed=7))
        r3 = monte_carlo_covering(chain(1), a, HAM, CoveringConfig(0.5, 8, trials=6, seed=7, threads=3))
        assert r1.per_trial == r3.per_trial

    def test_large_codebook_reaches_delta_floor(self):
        # with every w-block in the codebook many times over, the miss
        # probability drops to the best achievable value per v, which is
        # bounded by delta_n
        n = 4
        a = threshold_set(0.35)
        cfg = CoveringConfig(gamma=3.0, blocklength=n, trials=2, seed=0)
        rep = monte_carlo_covering(chain(1), a, HAM, cfg)
        p = CoveringProblem(chain(n), a, HAM)
        full = Codebook(all_blocks(2, n))
        best, _ = evaluate_codebook_exact(chain(n), None, None, full, problem=p)
        assert rep.miss_prob == pytest.approx(best, abs=1e-12)
        assert rep.miss_prob <= rep.delta_n

    def test_capacity_propagates(self):
        with pytest.raises(CapacityError):
            monte_carlo_covering(chain(1), threshold_set(0.3), HAM,
                                 CoveringConfig(0.5, 30, trials=1, m_cap=1000))


class TestProposition:
    def test_full_and_empty(self):
        cfg = CoveringConfig(gamma=0.5, blocklength=4, trials=3, seed=0)
        assert proposition_reduction(chain(1), AcceptanceSet.full(), 0.5, cfg).covered_probability == 1.0
        assert proposition_reduction(chain(1), AcceptanceSet.empty(), 0.5, cfg).covered_probability == 0.0

    def test_consistency(self):
        b = AcceptanceSet.density_typical(chain(1).joint_uw, 0.3)
        rep = proposition_reduction(chain(1), b, 0.5, CoveringConfig(0.5, 6, trials=4, seed=2))
        assert rep.covered_probability == 1.0 - rep.covering.achieved_distortion
        assert rep.covering.miss_prob == 0.0


class TestInequality:
    def test_examples(self):
        assert check_covering_inequality(0.0, 0.7, 5)
        assert check_covering_inequality(0.4, 0.0, 9)

    def test_domain(self):
        with pytest.raises(ValidationError):
            check_covering_inequality(1.5, 0.1, 2)
        with pytest.raises(ValidationError):
            check_covering_inequality(0.5, 0.1, 0)

    @given(st.floats(0, 1), st.floats(0, 1), st.integers(1, 500))
    def test_property(self, x, y, n):
        assert check_covering_inequality(x, y, n)

    def test_small_grid(self):
        assert covering_inequality_grid(10, 10) == (1210, 0)
