"""Force extraction against literal triple-loop oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from forceflow.affinity import AffinityMatrix, compute_affinities
from forceflow.data import Dataset, gen_gaussians, separated_gaussians_spec
from forceflow.embedder import (
    Embedding,
    TsneConfig,
    decompose_forces,
    output_affinities,
    pca_init,
    run_tsne,
)
from forceflow.errors import ConfigError
from forceflow.forcefield import (
    DEFAULT_FLIP_SIGN,
    extract,
    modified_attraction,
    negative_gradient,
    raw_attraction,
    repulsion,
)


def make_embedding(Y):
    Q, Z = output_affinities(Y)
    return Embedding(Y=Y, Q=Q, Z=Z, cost=0.0, iterations_run=0, converged=True)


def make_affinities(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.uniform(0.1, 1.0, size=(n, n))
    A = A + A.T
    np.fill_diagonal(A, 0.0)
    return AffinityMatrix(P=A / A.sum(), sigmas=np.ones(n), perplexity=2.0)


def oracle_modified(P, Y):
    """f_i = sum_{j != i} Z (y_i - y_j) sum_{k != i} p_ik q_kj, three loops."""
    n = len(Y)
    Q, Z = output_affinities(Y)
    F = np.zeros_like(Y)
    for i in range(n):
        for j in range(n):
            if j == i:
                continue
            coeff = 0.0
            for k in range(n):
                if k != i:
                    coeff += P[i, k] * Q[k, j]
            F[i] += Z * coeff * (Y[i] - Y[j])
    return F


class TestModifiedAttraction:
    def test_matches_triple_loop_oracle(self, rng):
        n = 12
        aff = make_affinities(n, 0)
        emb = make_embedding(rng.normal(size=(n, 2)))
        got = modified_attraction(aff, emb, flip_sign=False)
        want = oracle_modified(aff.P, emb.Y)
        assert np.allclose(got.forces, want, atol=1e-12)

    def test_two_points_vanish(self, rng):
        # with n = 2 the only j is the only k's partner: q_kj pairs against
        # p_ik so both directed terms cancel exactly
        aff = AffinityMatrix(
            P=np.array([[0.0, 0.5], [0.5, 0.0]]), sigmas=np.ones(2), perplexity=1.5
        )
        emb = make_embedding(rng.normal(size=(2, 2)))
        s = modified_attraction(aff, emb, flip_sign=False)
        assert np.allclose(s.forces, 0.0, atol=1e-15)

    @settings(max_examples=10, deadline=None)
    @given(seed=st.integers(0, 9999), n=st.integers(3, 10))
    def test_oracle_equivalence_random(self, seed, n):
        rng = np.random.default_rng(seed)
        aff = make_affinities(n, seed)
        emb = make_embedding(rng.normal(size=(n, 2)))
        got = modified_attraction(aff, emb, flip_sign=False)
        assert np.allclose(got.forces, oracle_modified(aff.P, emb.Y), atol=1e-12)

    def test_anchor_copy_is_safe(self, rng):
        aff = make_affinities(5, 1)
        Y = rng.normal(size=(5, 2))
        s = modified_attraction(aff, make_embedding(Y), flip_sign=False)
        Y[0, 0] = 99.0
        assert s.anchors[0, 0] != 99.0


class TestRawForces:
    def test_raw_attraction_equals_decomposition(self, rng):
        aff = make_affinities(9, 2)
        emb = make_embedding(rng.normal(size=(9, 2)))
        s = raw_attraction(aff, emb, flip_sign=False)
        att, _ = decompose_forces(aff.P, emb.Y)
        assert np.array_equal(s.forces, att)

    def test_repulsion_equals_decomposition(self, rng):
        aff = make_affinities(9, 3)
        emb = make_embedding(rng.normal(size=(9, 2)))
        s = repulsion(aff, emb)
        _, rep = decompose_forces(aff.P, emb.Y)
        assert np.array_equal(s.forces, rep)
        assert s.flipped is False

    def test_negative_gradient_is_descent_direction(self, rng):
        from forceflow.embedder import gradient

        aff = make_affinities(7, 4)
        emb = make_embedding(rng.normal(size=(7, 2)))
        s = negative_gradient(aff, emb)
        assert np.allclose(s.forces, -gradient(aff.P, emb.Y), atol=1e-15)


class TestFlipSign:
    def test_flip_negates(self, rng):
        aff = make_affinities(8, 5)
        emb = make_embedding(rng.normal(size=(8, 2)))
        plain = modified_attraction(aff, emb, flip_sign=False)
        flipped = modified_attraction(aff, emb, flip_sign=True)
        assert np.array_equal(flipped.forces, -plain.forces)
        assert plain.flipped is False and flipped.flipped is True

    def test_default_is_recorded(self, rng):
        aff = make_affinities(8, 6)
        emb = make_embedding(rng.normal(size=(8, 2)))
        s = modified_attraction(aff, emb)
        assert s.flipped == DEFAULT_FLIP_SIGN

    def test_default_flip_contracts_two_clusters(self):
        # the reason DEFAULT_FLIP_SIGN is True: with the default, forces at
        # cluster members point toward their cluster's center of mass
        data = gen_gaussians(
            separated_gaussians_spec(separation=10.0, count=60, dimension=20), seed=0
        )
        aff = compute_affinities(data, 20.0)
        emb = run_tsne(aff, pca_init(data), TsneConfig(perplexity=20.0))
        s = modified_attraction(aff, emb)
        centers = np.array([emb.Y[data.labels == c].mean(axis=0) for c in (0, 1)])
        to_center = centers[data.labels] - emb.Y
        dots = (s.forces * to_center).sum(axis=1)
        assert (dots > 0).mean() > 0.9


class TestExtract:
    def test_dispatch_matches_direct_calls(self, rng):
        aff = make_affinities(6, 7)
        emb = make_embedding(rng.normal(size=(6, 2)))
        for kind, fn in [
            ("modified_attraction", modified_attraction),
            ("raw_attraction", raw_attraction),
            ("repulsion", repulsion),
            ("negative_gradient", negative_gradient),
        ]:
            via_extract = extract(kind, aff, emb)
            direct = fn(aff, emb)
            assert np.array_equal(via_extract.forces, direct.forces)
            assert via_extract.kind == kind

    def test_unknown_kind(self, rng):
        aff = make_affinities(4, 8)
        emb = make_embedding(rng.normal(size=(4, 2)))
        with pytest.raises(ConfigError):
            extract("levitation", aff, emb)
