import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from covlab.errors import (DensityUndefinedError, EstimationError, NegativeInfiniteDensityError,
                           UnsupportedFamilyError, ValidationError)
from covlab.prob import (FiniteDistribution, all_blocks, bsc, compose_markov, dsbs, point_mass,
                         product, product_extension, rng_stream, uniform)
from covlab.spectrum import (DensitySample, conditional_entropy, density_csv, empirical_spectral_rate,
                             entropy, information_density, mutual_information,
                             sample_information_density, spectral_rate_iid)

from oracles import mutual_information_direct

H01 = -0.1 * math.log(0.1) - 0.9 * math.log(0.9)
IDENT = FiniteDistribution(np.diag([0.5, 0.5]))


def random_joint(seed, a, b):
    w = np.random.default_rng(seed).random((a, b))
    return FiniteDistribution(w / w.sum())


def test_entropy_examples():
    assert entropy(uniform(4)) == pytest.approx(math.log(4))
    assert entropy(point_mass(3, 1)) == 0.0
    assert conditional_entropy(dsbs(0.1)) == pytest.approx(H01, abs=1e-12)
    assert H01 == pytest.approx(0.3251, abs=1e-4)


def test_mutual_information_examples():
    assert mutual_information(product(uniform(2), uniform(3))) < 1e-12
    assert mutual_information(IDENT) == pytest.approx(math.log(2))
    assert mutual_information(dsbs(0.1)) == pytest.approx(math.log(2) - H01, abs=1e-12)


@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(1, 4))
def test_mutual_information_matches_direct_sum(seed, a, b):
    j = random_joint(seed, a, b)
    assert mutual_information(j) >= 0
    assert mutual_information(j) == pytest.approx(mutual_information_direct(j.weights), abs=1e-10)


@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(1, 4))
def test_product_has_zero_information(seed, a, b):
    rng = np.random.default_rng(seed)
    pa, pb = rng.random(a) + 0.01, rng.random(b) + 0.01
    j = product(FiniteDistribution(pa / pa.sum()), FiniteDistribution(pb / pb.sum()))
    assert mutual_information(j) <= 1e-10


@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(1, 4))
def test_entropy_chain_rule(seed, a, b):
    j = random_joint(seed, a, b)
    w = j.weights
    pv = w.sum(axis=1)
    h_w_given_v = -sum(w[i, k] * math.log(w[i, k] / pv[i]) for i in range(a) for k in range(b) if w[i, k] > 0)
    assert entropy(j) == pytest.approx(entropy(pv) + h_w_given_v, abs=1e-10)


class TestInformationDensity:
    def test_independent(self):
        j = product(uniform(2), FiniteDistribution(np.array([0.3, 0.7])))
        assert information_density(j, [0, 1, 1], [1, 0, 1]).value == pytest.approx(0.0, abs=1e-15)

    def test_identical(self):
        assert information_density(IDENT, [0, 1, 1, 0], [0, 1, 1, 0]).value == pytest.approx(math.log(2))

    def test_dsbs_nine_one(self):
        v = [0] * 10
        w = [0] * 9 + [1]
        expected = (9 * math.log(1.8) + math.log(0.2)) / 10
        assert information_density(dsbs(0.1), v, w).value == pytest.approx(expected, abs=1e-12)

    def test_markers(self):
        j = FiniteDistribution(np.array([[0.5, 0.0], [0.0, 0.5]]))
        with pytest.raises(NegativeInfiniteDensityError):
            information_density(j, [0], [1])
        z = FiniteDistribution(np.array([[1.0, 0.0], [0.0, 0.0]]))
        with pytest.raises(DensityUndefinedError):
            information_density(z, [1], [0])

    def test_nonfinite_sample_rejected(self):
        with pytest.raises(ValidationError):
            DensitySample(float("-inf"), 3)

    @pytest.mark.parametrize("n", [1, 3, 8])
    def test_average_over_enumeration(self, n):
        # enumeration-weighted density average equals the single-letter information
        j = compose_markov(dsbs(0.1), bsc(0.2)).joint_vw
        bd = product_extension(j, n)
        blocks = all_blocks(2, n)
        total = 0.0
        for v in blocks:
            for w in blocks:
                total += bd.prob(v, w) * information_density(j, v, w).value
        assert total == pytest.approx(mutual_information(j), abs=1e-9)


class TestSpectralRate:
    def test_iid_examples(self):
        for direction in ("sup", "inf"):
            assert spectral_rate_iid(product(uniform(2), uniform(2)), direction) == pytest.approx(0, abs=1e-12)
            assert spectral_rate_iid(IDENT, direction) == pytest.approx(math.log(2))
            assert spectral_rate_iid(dsbs(0.1), direction) == pytest.approx(0.3680, abs=1e-4)

    def test_non_iid_rejected(self):
        with pytest.raises(UnsupportedFamilyError):
            spectral_rate_iid(dsbs(0.1), iid=False)

    def test_constant_samples(self):
        for eps in (0.01, 0.2, 0.45):
            assert empirical_spectral_rate([0.7] * 150, eps).rate == 0.7
            assert empirical_spectral_rate([0.7] * 150, eps, "inf").rate == 0.7

    def test_single_outlier(self):
        s = [0.0] * 99 + [1.0]
        assert empirical_spectral_rate(s, 0.1).rate == 0.0

    def test_too_few(self):
        with pytest.raises(EstimationError):
            empirical_spectral_rate([0.1] * 99)

    def test_bad_eps(self):
        with pytest.raises(ValidationError):
            empirical_spectral_rate([0.1] * 200, eps=0.5)

    @settings(max_examples=30)
    @given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=100, max_size=300),
           st.floats(0.01, 0.3), st.floats(0.01, 0.3))
    def test_sup_above_inf_and_monotone(self, samples, e1, e2):
        lo, hi = sorted((e1, e2))
        sup_lo = empirical_spectral_rate(samples, lo).rate
        sup_hi = empirical_spectral_rate(samples, hi).rate
        assert sup_hi <= sup_lo
        assert empirical_spectral_rate(samples, lo, "inf").rate <= sup_lo

    def test_sampler_deterministic(self):
        a = sample_information_density(dsbs(0.1), 20, 50, rng_stream(4))
        b = sample_information_density(dsbs(0.1), 20, 50, rng_stream(4))
        assert np.array_equal(a, b)

    def test_csv(self):
        text = density_csv([0.5, 0.25], 7)
        assert text.splitlines() == ["n,sample_index,density_nats", "7,0,0.5", "7,1,0.25"]


def test_quantile_estimates_tighten_with_blocklength():
    # the per-letter density has standard deviation ~0.659 nats, so the 5% tails
    # of the block average sit ~1.645 * 0.659 / sqrt(n) from the mean
    target = mutual_information(dsbs(0.1))
    spread = []
    for n in (100, 1000):
        z = sample_information_density(dsbs(0.1), n, 2000, rng_stream(2024, n))
        sup = empirical_spectral_rate(z, 0.05, "sup").rate
        inf = empirical_spectral_rate(z, 0.05, "inf").rate
        assert inf <= target <= sup
        spread.append(max(sup - target, target - inf))
    assert spread[1] < spread[0] / 2
    assert spread[1] <= 0.05
