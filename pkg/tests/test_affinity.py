"""Affinity construction against independent oracles.

The oracles here are deliberately written in the slowest, most literal way:
double loops over points and a scalar root-finder per row, sharing no code
with the module under test.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from forceflow.affinity import (
    AffinityMatrix,
    calibrate_bandwidths,
    compute_affinities,
    conditional_affinities,
    pairwise_sq_dists,
    symmetrize,
)
from forceflow.data import Dataset
from forceflow.errors import ConfigError, DataError, NumericalError


def oracle_sq_dists(X):
    n = len(X)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            out[i, j] = sum((X[i, d] - X[j, d]) ** 2 for d in range(X.shape[1]))
    return out


def oracle_conditional_row(d2_row, i, sigma):
    """p_{j|i} for one row via scipy's softmax (stable at any sigma)."""
    from scipy.special import softmax

    others = np.delete(np.arange(len(d2_row)), i)
    p = softmax(-d2_row[others] / (2.0 * sigma**2))
    out = np.zeros(len(d2_row))
    out[others] = p
    return out


def oracle_row_perplexity(d2_row, i, sigma):
    from scipy.stats import entropy

    p = oracle_conditional_row(d2_row, i, sigma)
    return 2.0 ** entropy(p[p > 0], base=2)


def oracle_sigma(d2_row, i, target):
    """Scalar root-find for one row's bandwidth, independent of the module."""
    f = lambda s: oracle_row_perplexity(d2_row, i, s) - target
    return brentq(f, 1e-6, 1e6, xtol=1e-14, rtol=1e-15)


class TestPairwiseSqDists:
    def test_matches_double_loop_oracle(self, tiny_points):
        got = pairwise_sq_dists(tiny_points)
        want = oracle_sq_dists(tiny_points)
        assert np.allclose(got, want, atol=1e-12, rtol=0)

    def test_zero_diagonal_and_symmetry(self, rng):
        X = rng.normal(size=(25, 6))
        d2 = pairwise_sq_dists(X)
        assert np.all(np.diagonal(d2) == 0)
        assert np.array_equal(d2, d2.T) or np.allclose(d2, d2.T, atol=0)

    def test_never_negative_despite_cancellation(self):
        # nearly identical large-magnitude points provoke the expansion
        # formula into tiny negative values unless clipped
        X = np.array([[1e8, 1e8], [1e8 + 1e-4, 1e8]])
        d2 = pairwise_sq_dists(X)
        assert np.all(d2 >= 0)


class TestCalibrateBandwidths:
    def test_matches_scalar_oracle(self, tiny_points):
        d2 = pairwise_sq_dists(tiny_points)
        target = 5.0
        sigmas = calibrate_bandwidths(d2, target)
        for i in range(len(tiny_points)):
            want = oracle_sigma(d2[i], i, target)
            assert sigmas[i] == pytest.approx(want, rel=1e-6)

    def test_achieves_target_perplexity(self, rng):
        X = rng.normal(size=(40, 5))
        d2 = pairwise_sq_dists(X)
        target = 12.0
        sigmas = calibrate_bandwidths(d2, target)
        for i in range(40):
            perp = oracle_row_perplexity(d2[i], i, sigmas[i])
            assert perp == pytest.approx(target, rel=1e-5)

    def test_perplexity_bounds(self, tiny_points):
        d2 = pairwise_sq_dists(tiny_points)
        with pytest.raises(ConfigError):
            calibrate_bandwidths(d2, 1.0)
        with pytest.raises(ConfigError):
            calibrate_bandwidths(d2, 10.0)  # n = 10 rows

    def test_duplicate_heavy_row_fails_loudly(self):
        # five coincident points: each row sees 4 neighbors at distance 0,
        # so its perplexity cannot drop below 4; target 2 is unreachable
        X = np.zeros((5, 2))
        X = np.vstack([X, [[10.0, 0.0]]])
        d2 = pairwise_sq_dists(X)
        with pytest.raises(NumericalError):
            calibrate_bandwidths(d2, 2.0)

    @settings(max_examples=20, deadline=None)
    @given(
        seed=st.integers(0, 10_000),
        n=st.integers(8, 30),
        target=st.floats(2.0, 6.0),
    )
    def test_calibration_invariant_random_clouds(self, seed, n, target):
        X = np.random.default_rng(seed).normal(size=(n, 3))
        d2 = pairwise_sq_dists(X)
        sigmas = calibrate_bandwidths(d2, target)
        assert np.all(sigmas > 0)
        cond = conditional_affinities(d2, sigmas)
        with np.errstate(divide="ignore", invalid="ignore"):
            H = -np.sum(np.where(cond > 0, cond * np.log2(cond), 0.0), axis=1)
        assert np.allclose(2.0**H, target, rtol=1e-4)

    def test_scale_equivariance(self, tiny_points):
        # scaling the data by c scales every calibrated bandwidth by c
        d2 = pairwise_sq_dists(tiny_points)
        d2_scaled = pairwise_sq_dists(3.0 * tiny_points)
        s1 = calibrate_bandwidths(d2, 4.0)
        s2 = calibrate_bandwidths(d2_scaled, 4.0)
        assert np.allclose(s2, 3.0 * s1, rtol=1e-8)


class TestConditionalAffinities:
    def test_matches_literal_oracle(self, tiny_points):
        d2 = pairwise_sq_dists(tiny_points)
        sigmas = calibrate_bandwidths(d2, 4.0)
        got = conditional_affinities(d2, sigmas)
        for i in range(len(tiny_points)):
            want = oracle_conditional_row(d2[i], i, sigmas[i])
            assert np.allclose(got[i], want, atol=1e-12, rtol=0)

    def test_rows_stochastic_zero_diagonal(self, rng):
        X = rng.normal(size=(30, 4))
        d2 = pairwise_sq_dists(X)
        cond = conditional_affinities(d2, calibrate_bandwidths(d2, 8.0))
        assert np.allclose(cond.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(np.diagonal(cond) == 0)
        assert np.all(cond >= 0)

    def test_underflowed_row_raises(self):
        d2 = pairwise_sq_dists(np.array([[0.0, 0.0], [1e6, 0.0], [0.0, 1e6]]))
        with pytest.raises(NumericalError):
            conditional_affinities(d2, np.full(3, 1e-3))


class TestSymmetrize:
    def test_matches_formula(self, tiny_points):
        d2 = pairwise_sq_dists(tiny_points)
        sigmas = calibrate_bandwidths(d2, 4.0)
        cond = conditional_affinities(d2, sigmas)
        aff = symmetrize(cond, sigmas, 4.0)
        n = len(tiny_points)
        for i in range(n):
            for j in range(n):
                want = (cond[i, j] + cond[j, i]) / (2 * n)
                assert aff.P[i, j] == pytest.approx(want, abs=1e-15)

    def test_sums_to_one(self, rng):
        X = rng.normal(size=(20, 3))
        aff = compute_affinities(Dataset(points=X), perplexity=6.0)
        assert aff.P.sum() == pytest.approx(1.0, abs=1e-12)

    def test_validation_rejects_asymmetric(self):
        P = np.array([[0.0, 0.6], [0.4, 0.0]])
        with pytest.raises(DataError):
            AffinityMatrix(P=P, sigmas=np.ones(2), perplexity=1.5)

    def test_validation_rejects_bad_sum(self):
        P = np.array([[0.0, 0.4], [0.4, 0.0]])
        with pytest.raises(DataError):
            AffinityMatrix(P=P, sigmas=np.ones(2), perplexity=1.5)


class TestComputeAffinities:
    def test_permutation_equivariance(self, rng):
        X = rng.normal(size=(15, 3))
        perm = rng.permutation(15)
        a1 = compute_affinities(Dataset(points=X), 5.0)
        a2 = compute_affinities(Dataset(points=X[perm]), 5.0)
        assert np.allclose(a2.P, a1.P[np.ix_(perm, perm)], atol=1e-12)
        assert np.allclose(a2.sigmas, a1.sigmas[perm], rtol=1e-10)

    def test_deterministic(self, rng):
        X = rng.normal(size=(12, 3))
        a1 = compute_affinities(Dataset(points=X), 5.0)
        a2 = compute_affinities(Dataset(points=X.copy()), 5.0)
        assert np.array_equal(a1.P, a2.P)
