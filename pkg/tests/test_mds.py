import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgdtraj.equivalence import DistanceMatrix, distance_matrix
from sgdtraj.mds import (
    Embedding,
    classical_mds,
    double_center,
    embed,
    guttman_transform,
    pairwise_distances,
    smacof,
    stress,
)


def planar(m, seed, dims=2):
    X = np.random.default_rng(seed).normal(size=(m, dims))
    return X, pairwise_distances(X)


def max_relative_error(d_true, X):
    iu = np.triu_indices(d_true.shape[0], 1)
    return float(np.max(np.abs(pairwise_distances(X)[iu] - d_true[iu]) / d_true[iu]))


def assert_history_monotone(emb):
    h = emb.history
    assert all(b <= a for a, b in zip(h, h[1:]))


# --- stress -----------------------------------------------------------------

def test_stress_examples():
    X, d = planar(6, 0)
    assert stress(d, X) == pytest.approx(0.0, abs=1e-24)
    assert stress(np.array([[0, 2.0], [2.0, 0]]), np.array([[0.0, 0.0], [1.0, 0.0]])) == 1.0


def test_stress_matches_double_loop():
    X, _ = planar(9, 1)
    d = distance_matrix(list(np.random.default_rng(2).random((9, 4)))).values
    direct = 0.0
    for i in range(9):
        for j in range(i + 1, 9):
            direct += (d[i, j] - np.sqrt(((X[i] - X[j]) ** 2).sum())) ** 2
    assert stress(d, X) == pytest.approx(direct, rel=1e-13)


def test_stress_shape_mismatch():
    with pytest.raises(ValueError):
        stress(np.zeros((3, 3)), np.zeros((4, 2)))


# --- classical --------------------------------------------------------------

def test_double_center_of_euclidean_is_gram():
    X, d = planar(7, 3)
    Xc = X - X.mean(0)
    assert np.allclose(double_center(d), Xc @ Xc.T, atol=1e-12)


def test_all_zero_matrix_at_origin():
    emb = classical_mds(np.zeros((4, 4)), 2)
    assert not emb.coords.any()


def test_collinear_points():
    d = np.array([[0, 1, 3], [1, 0, 2], [3, 2, 0]], dtype=float)
    x = classical_mds(d, 1).coords[:, 0]
    x = x if x[2] > 0 else -x
    assert np.allclose(x, [-4 / 3, -1 / 3, 5 / 3], atol=1e-12)


@pytest.mark.parametrize("method", ["jacobi", "lapack"])
def test_planar_recovery(method):
    _, d = planar(50, 4)
    emb = classical_mds(d, 2, method=method)
    assert max_relative_error(d, emb.coords) < 1e-8
    assert np.all(np.abs(emb.coords.mean(0)) < 1e-9)


@settings(max_examples=20, deadline=None)
@given(st.integers(4, 30), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_exact_recovery_in_any_dimension(m, dims, seed):
    if dims > m - 1:
        return
    _, d = planar(m, seed, dims)
    assert max_relative_error(d, classical_mds(d, dims).coords) < 1e-8


def test_ids_carried_from_distance_matrix():
    _, d = planar(3, 5)
    dm = DistanceMatrix(("0:0", "0:1", "1:0"), d)
    assert classical_mds(dm, 2).ids == ("0:0", "0:1", "1:0")


def test_non_euclidean_mass_reported():
    # Hamming-style distances on 4 points: equal pairwise distance 1 is realizable;
    # the 'square with short diagonals' is not.
    d = np.array([[0, 1, 2, 1], [1, 0, 1, 2], [2, 1, 0, 1], [1, 2, 1, 0]], dtype=float) ** 1.5
    emb = classical_mds(d, 2)
    assert emb.clamped_mass > 0
    assert classical_mds(planar(5, 6)[1], 2).clamped_mass < 1e-10


def test_dims_bounds():
    with pytest.raises(ValueError):
        classical_mds(np.zeros((3, 3)), 3)
    with pytest.raises(ValueError):
        classical_mds(np.zeros((3, 3)), 0)
    with pytest.raises(ValueError):
        classical_mds(np.zeros((2, 3)), 1)


# --- smacof -----------------------------------------------------------------

def test_exact_configuration_is_fixed_point():
    X, d = planar(8, 7)
    emb = smacof(d, X)
    assert emb.stress == pytest.approx(0.0, abs=1e-20)
    assert np.allclose(emb.coords, X, atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_random_init_reaches_classical_stress(seed):
    _, d = planar(20, 10 + seed)
    init = np.random.default_rng(seed).normal(size=(20, 2))
    emb = smacof(d, init, max_iters=3000, tol=1e-12)
    assert_history_monotone(emb)
    assert emb.stress <= classical_mds(d, 2).stress + 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 15), st.integers(0, 2**32 - 1))
def test_stress_never_increases_on_non_euclidean_input(m, seed):
    g = np.random.default_rng(seed)
    d = distance_matrix(list(g.integers(0, 3, size=(m, 12)))).values
    emb = embed(d, 2)
    assert_history_monotone(emb)
    assert emb.stress <= classical_mds(d, 2).stress + 1e-9


def test_coincident_points_handled():
    d = np.array([[0, 0, 1], [0, 0, 1], [1, 1, 0]], dtype=float)
    X = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.5]])
    Y = guttman_transform(d, X)
    assert np.all(np.isfinite(Y))
    assert_history_monotone(smacof(d, X))


def test_init_shape_checked():
    with pytest.raises(ValueError):
        smacof(np.zeros((3, 3)), np.zeros((4, 2)))


def test_embed_pipeline():
    _, d = planar(12, 8)
    dm = DistanceMatrix(tuple(f"0:{i}" for i in range(12)), d)
    e = embed(dm, 2)
    assert isinstance(e, Embedding) and e.method == "smacof" and e.ids == dm.ids
    assert embed(dm, 2, method="classical").method == "classical"
    with pytest.raises(ValueError):
        embed(dm, 2, method="tsne")
