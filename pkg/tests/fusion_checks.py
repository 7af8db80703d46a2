"""Randomized fusion-algebra checks shared by the unit and acceptance suites."""

import numpy as np

from wvloc.fusion import (
    distance_threshold_fuse,
    hadamard_fuse,
    median_fuse,
    probability_threshold_fuse,
    topk_fuse,
)
from wvloc.model import CellGrid, LikelihoodVector


def random_vec(rng, n, source="wifi"):
    return LikelihoodVector(rng.dirichlet(np.ones(n)), source)


def random_triple(rng, n):
    return (random_vec(rng, n, "wifi"), random_vec(rng, n, "visual"),
            random_vec(rng, n, "joint"))


def check_hadamard_permutation_invariance(rng, instances=100):
    for _ in range(instances):
        n = int(rng.integers(2, 30))
        trip = random_triple(rng, n)
        base = hadamard_fuse(*trip).probs
        for perm in [(1, 0, 2), (2, 1, 0), (1, 2, 0)]:
            shuffled = hadamard_fuse(trip[perm[0]], trip[perm[1]], trip[perm[2]]).probs
            assert np.allclose(shuffled, base, atol=1e-9)


def check_uniform_factor_neutrality(rng, instances=100):
    for _ in range(instances):
        n = int(rng.integers(2, 30))
        a, b, _ = random_triple(rng, n)
        uniform = LikelihoodVector(np.full(n, 1.0 / n), "joint")
        fused = hadamard_fuse(a, b, uniform)
        pair_product = a.probs * b.probs
        assert fused.probs.argmax() == pair_product.argmax()
        assert np.allclose(fused.probs, pair_product / pair_product.sum(), atol=1e-9)


def check_median_of_equals_identity(rng, instances=100):
    for _ in range(instances):
        n = int(rng.integers(2, 30))
        v = random_vec(rng, n)
        out = median_fuse(v, LikelihoodVector(v.probs, "visual"),
                          LikelihoodVector(v.probs, "hadamard"))
        assert np.allclose(out.probs, v.probs, atol=1e-9)


def check_gamma_one_reduction(rng, instances=100):
    for _ in range(instances):
        n = int(rng.integers(2, 30))
        prim, sec, _ = random_triple(rng, n)
        out = probability_threshold_fuse(prim, sec, gamma=1.0)
        assert np.allclose(out.probs, sec.probs, atol=1e-9)
        assert not out.flagged


def check_top_n_reduction(rng, instances=100):
    for _ in range(instances):
        n = int(rng.integers(2, 30))
        prim, sec, _ = random_triple(rng, n)
        out = topk_fuse(prim, sec, k=n)
        assert np.allclose(out.probs, sec.probs, atol=1e-9)


def check_map_diameter_reduction(rng, instances=100):
    for _ in range(instances):
        rows = int(rng.integers(1, 4))
        cols = int(rng.integers(2, 5))
        grid = CellGrid.regular(rows, cols, 2.0, 2.0)
        n = grid.n_cells
        p_w, p_v, _ = random_triple(rng, n)
        out = distance_threshold_fuse(p_w, p_v, grid, d=grid.diameter())
        assert np.allclose(out.probs, p_v.probs, atol=1e-9)


def check_monotone_relaxation(rng, instances=100):
    for _ in range(instances):
        n = int(rng.integers(3, 30))
        prim, sec, _ = random_triple(rng, n)
        support = []
        for gamma in [0.2, 0.5, 0.8, 1.0]:
            out = probability_threshold_fuse(prim, sec, gamma)
            support.append(set(np.flatnonzero(out.probs)))
        for small, big in zip(support, support[1:]):
            assert small <= big
        support = []
        for k in range(1, n + 1):
            out = topk_fuse(prim, sec, k)
            support.append(set(np.flatnonzero(out.probs)))
        for small, big in zip(support, support[1:]):
            assert small <= big


def check_soft_fusion_totality(rng, instances=100):
    for _ in range(instances):
        n = int(rng.integers(2, 30))
        trip = random_triple(rng, n)
        wvm = hadamard_fuse(*trip)
        final = median_fuse(trip[0], trip[1], wvm)
        assert np.all(wvm.probs > 0.0)
        assert np.all(final.probs > 0.0)


ALL_CHECKS = (
    check_hadamard_permutation_invariance,
    check_uniform_factor_neutrality,
    check_median_of_equals_identity,
    check_gamma_one_reduction,
    check_top_n_reduction,
    check_map_diameter_reduction,
    check_monotone_relaxation,
    check_soft_fusion_totality,
)
