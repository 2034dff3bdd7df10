import math
from itertools import product

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hyperevent.errors import DataValidationError
from hyperevent.nonempty_bernoulli import (
    gibbs_prob,
    intensity,
    log_normalizer,
    log_pmf,
    sample,
    sample_rows,
    softplus,
)


def brute_force_log_normalizer(lam, exclude):
    idx = [j for j in range(len(lam)) if j != exclude]
    total = 0.0
    for bits in product([0, 1], repeat=len(idx)):
        if sum(bits) == 0:
            continue
        total += math.exp(sum(l * b for l, b in zip(lam[idx], bits)))
    return math.log(total)


def enumerate_support(n_slots, exclude):
    for bits in product([0, 1], repeat=n_slots):
        if bits[exclude] or sum(bits) == 0:
            continue
        yield np.array(bits, dtype=np.uint8)


class TestIntensity:
    def test_zero_coefficients(self, rng):
        x = rng.standard_normal((4, 3))
        assert np.all(intensity(np.zeros(3), x) == 0.0)

    def test_intercept_only(self):
        x = np.ones((5, 1))
        lam = intensity(np.array([0.7]), x)
        assert np.allclose(lam, 0.7)

    def test_matches_naive_loop(self, rng):
        coef = rng.standard_normal(4)
        x = rng.standard_normal((6, 4))
        lam = intensity(coef, x)
        naive = [sum(coef[p] * x[j, p] for p in range(4)) for j in range(6)]
        assert np.allclose(lam, naive, atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DataValidationError):
            intensity(np.zeros(3), np.zeros((4, 2)))


class TestLogNormalizer:
    def test_single_candidate(self):
        assert log_normalizer(np.zeros(2), exclude=0) == pytest.approx(0.0, abs=1e-14)

    def test_four_candidates_zero_intensity(self):
        assert log_normalizer(np.zeros(5), exclude=0) == pytest.approx(math.log(15), abs=1e-12)

    def test_matches_enumeration(self, rng):
        for a in range(2, 7):
            for _ in range(40):
                lam = rng.normal(0.0, 2.0, a)
                got = log_normalizer(lam, exclude=0)
                want = brute_force_log_normalizer(lam, 0)
                assert abs(got - want) < 1e-10

    def test_extreme_intensities_stay_finite(self):
        assert math.isfinite(log_normalizer(np.array([0.0, 200.0, -200.0]), exclude=0))
        assert math.isfinite(log_normalizer(np.full(4, -40.0), exclude=0))


class TestLogPmf:
    def test_single_candidate_certain(self):
        assert log_pmf(np.array([0, 1]), np.zeros(2), exclude=0) == pytest.approx(0.0)

    def test_three_equiprobable(self):
        lam = np.zeros(3)
        for u in enumerate_support(3, 0):
            assert log_pmf(u, lam, exclude=0) == pytest.approx(math.log(1 / 3), abs=1e-12)

    def test_empty_vector_excluded(self):
        assert log_pmf(np.zeros(3), np.zeros(3), exclude=0) == -np.inf

    @given(st.integers(min_value=2, max_value=6), st.integers(min_value=0, max_value=10_000))
    def test_pmf_sums_to_one(self, n_slots, seed):
        lam = np.random.default_rng(seed).normal(0.0, 2.0, n_slots)
        total = sum(math.exp(log_pmf(u, lam, exclude=0)) for u in enumerate_support(n_slots, 0))
        assert total == pytest.approx(1.0, abs=1e-10)


class TestSampler:
    def test_single_candidate_always_selected(self, rng):
        for _ in range(20):
            assert sample(np.zeros(2), rng, exclude=0).tolist() == [0, 1]

    def test_never_empty_even_under_hostile_intensities(self, rng):
        lam = np.full((20_000, 5), -12.0)
        active = np.array([False, True, True, True, True])
        u = sample_rows(lam, rng, active)
        assert (u.sum(axis=1) >= 1).all()
        assert (u[:, 0] == 0).all()

    def test_frequencies_match_pmf(self, rng):
        lam_row = np.array([0.0, 1.0, -0.7, 0.4])
        n = 300_000
        u = sample_rows(np.tile(lam_row, (n, 1)), rng, np.array([False, True, True, True]))
        counts = {}
        for bits in enumerate_support(4, 0):
            counts[tuple(bits)] = math.exp(log_pmf(bits, lam_row, exclude=0))
        codes = u[:, 1] * 4 + u[:, 2] * 2 + u[:, 3]
        freq = np.bincount(codes, minlength=8) / n
        tv = 0.5 * sum(
            abs(freq[b1 * 4 + b2 * 2 + b3] - counts[(0, b1, b2, b3)])
            for b1, b2, b3 in product([0, 1], repeat=3)
            if b1 + b2 + b3 > 0
        )
        assert tv < 0.01

    def test_fallback_branch_matches_pmf(self, rng):
        # all-negative intensities make the first-stage draw land on the
        # empty vector almost always, exercising the sequential scheme
        lam_row = np.array([0.0, -4.0, -5.0, -4.5])
        n = 200_000
        u = sample_rows(np.tile(lam_row, (n, 1)), rng, np.array([False, True, True, True]))
        codes = u[:, 1] * 4 + u[:, 2] * 2 + u[:, 3]
        freq = np.bincount(codes, minlength=8) / n
        tv = 0.0
        for bits in enumerate_support(4, 0):
            p = math.exp(log_pmf(bits, lam_row, exclude=0))
            tv += abs(freq[bits[1] * 4 + bits[2] * 2 + bits[3]] - p)
        assert 0.5 * tv < 0.01


class TestGibbsProb:
    def test_neutral_intensity(self):
        assert gibbs_prob(0.0, True) == pytest.approx(0.5)

    def test_forced_when_rest_empty(self):
        assert gibbs_prob(-17.3, False) == 1.0

    def test_reference_value(self):
        assert gibbs_prob(0.274, True) == pytest.approx(0.56807, abs=1e-4)

    @given(st.floats(min_value=-30, max_value=30), st.floats(min_value=-30, max_value=30))
    def test_monotone_in_intensity(self, a, b):
        lo, hi = min(a, b), max(a, b)
        assert gibbs_prob(lo, True) <= gibbs_prob(hi, True)

    def test_vectorized(self):
        lam = np.array([0.0, 2.0])
        rest = np.array([True, False])
        out = gibbs_prob(lam, rest)
        assert out[0] == pytest.approx(0.5)
        assert out[1] == 1.0


class TestGibbsStationarity:
    def test_sweep_preserves_marginals(self, rng):
        # start rows exactly at the target law, apply coordinate sweeps,
        # and require the per-coordinate occupation to stay put
        from scipy.special import expit

        from hyperevent.inference import gibbs_sweep

        lam_row = np.array([0.0, 0.9, -0.6, 0.2])
        active = np.array([False, True, True, True])
        n = 200_000
        u0 = sample_rows(np.tile(lam_row, (n, 1)), rng, active)
        exact = np.zeros(3)
        for bits in enumerate_support(4, 0):
            p = math.exp(log_pmf(bits, lam_row, exclude=0))
            exact += p * np.asarray(bits[1:])
        u = np.zeros((n, 4, 4), np.uint8)
        u[:, 0, :] = u0
        pinned = np.ones((n, 4), bool)
        pinned[:, 0] = False
        probs = np.zeros((n, 4, 4))
        probs[:, 0, :] = expit(lam_row)
        for _ in range(4):
            gibbs_sweep(u, probs, pinned, rng)
        got = u[:, 0, 1:].mean(axis=0)
        assert np.abs(got - exact).max() < 0.005


class TestSoftplus:
    @given(st.floats(min_value=-700, max_value=700))
    def test_positive_and_finite(self, v):
        out = float(softplus(np.array([v])))
        assert out >= 0.0
        assert math.isfinite(out)

    def test_matches_reference(self):
        v = np.array([-3.0, -0.5, 0.0, 0.5, 3.0])
        assert np.allclose(softplus(v), np.log1p(np.exp(v)), atol=1e-12)
