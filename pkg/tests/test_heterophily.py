import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fullspec.errors import DimensionError, DomainError, PreconditionError
from fullspec.filters import UnivariatePoly
from fullspec.graph import Graph, Partition, cycle_graph, laplacian, path_graph, random_graph
from fullspec.heterophily import (
    ClassModel, EquivariantConv, asymptotic_sweep, class_losses, deletion_drops_rank,
    distance_to_spectral_subspace, greedy_activating_list, heterophily_sweep, is_class_equivariant,
    loss, loss_equivariant, median_energy, near_diagonal_energy, null_space, optimal_convolution,
    reynolds_average, sample_features, sample_model, spectral_obstruction, stacked_pair_rank,
    vertex_block,
)
from fullspec.linalg import eigendecompose, is_simple_spectrum


def ridge_oracle(model):
    """Row-by-row unconstrained minimizer of the loss: (F F^T + D) c = F m_a."""
    P = model.onehot()
    F = P @ model.means
    D = np.diag(P @ np.asarray(model.taus))
    cls = np.asarray(model.partition.class_of)
    rhs = F @ model.means[cls].T
    return np.linalg.solve(F @ F.T + D, rhs).T


def random_model(k, sizes, d, seed):
    rng = np.random.default_rng(seed)
    return sample_model(k, sizes, d, rng.uniform(0.5, 2.0, k), seed)


# ---- model ---------------------------------------------------------------


def test_means_unit_norm():
    m = sample_model(1, (4,), 3, 1.0, seed=0)
    assert abs(np.linalg.norm(m.means[0]) - 1) < 1e-12
    m3 = sample_model(3, (2, 2, 2), 50, (1.0, 2.0, 3.0), seed=1)
    np.testing.assert_allclose(np.linalg.norm(m3.means, axis=1), 1.0, atol=1e-12)


def test_vanishing_noise_features_hit_means():
    m = sample_model(2, (3, 4), 10, 1e-12, seed=2)
    X = sample_features(m, seed=3)
    cls = np.asarray(m.partition.class_of)
    assert np.max(np.abs(X - m.means[cls])) < 1e-5


def test_feature_covariance_trace():
    m = sample_model(2, (5000, 5000), 8, (0.5, 2.0), seed=4)
    X = sample_features(m, seed=5)
    cls = np.asarray(m.partition.class_of)
    for a, tau in enumerate(m.taus):
        Z = X[cls == a] - m.means[a]
        assert abs(np.sum(Z.var(axis=0)) / tau - 1) < 0.05


def test_model_validation():
    with pytest.raises(DomainError):
        ClassModel(np.ones((1, 2)) / np.sqrt(2), (0.0,), Partition.from_sizes([2]))
    with pytest.raises(DimensionError):
        sample_model(2, (3,), 4, 1.0, seed=0)
    with pytest.raises(DomainError):
        sample_model(1, (3,), 0, 1.0, seed=0)


# ---- loss ----------------------------------------------------------------


def test_loss_examples():
    m = sample_model(3, (2, 3, 4), 6, (0.5, 1.0, 2.0), seed=0)
    assert loss(np.zeros((9, 9)), m) == pytest.approx(3.0, abs=1e-12)
    assert loss(np.eye(9), m) == pytest.approx(3.5, abs=1e-12)
    with pytest.raises(DimensionError):
        loss(np.eye(8), m)


@pytest.mark.parametrize("beta", [0.0, 1 / 3, 0.5, 1.0])
def test_loss_single_class_pair(beta):
    m = sample_model(1, (2,), 4, 1.0, seed=0)
    expected = (2 * beta - 1) ** 2 + 2 * beta**2
    assert loss(beta * np.ones((2, 2)), m) == pytest.approx(expected, abs=1e-12)


def test_loss_matches_monte_carlo():
    m = random_model(2, (3, 2), 5, seed=9)
    rng = np.random.default_rng(1)
    C = rng.standard_normal((5, 5)) * 0.4
    cls = np.asarray(m.partition.class_of)
    weights = 1.0 / np.asarray(m.sizes)[cls]
    trials = 20000
    tot = 0.0
    for t in range(trials):
        X = sample_features(m, seed=10_000 + t)
        tot += np.sum(weights * np.sum((C @ X - m.means[cls]) ** 2, axis=1))
    assert tot / trials == pytest.approx(loss(C, m), rel=0.02)


def test_loss_equivariant_examples():
    m = random_model(3, (2, 1, 4), 7, seed=3)
    assert loss_equivariant(EquivariantConv.zeros(3), m) == pytest.approx(3.0, abs=1e-12)
    assert loss_equivariant(EquivariantConv.identity(3), m) == pytest.approx(sum(m.taus), abs=1e-12)


@given(st.integers(0, 2**31 - 1))
def test_loss_equivariant_matches_dense(seed):
    rng = np.random.default_rng(seed)
    m = random_model(3, tuple(rng.integers(1, 5, 3)), 6, seed)
    coeffs = EquivariantConv(rng.standard_normal(3), rng.standard_normal(3), rng.standard_normal((3, 3)))
    dense = loss(coeffs.assemble(m.partition), m)
    assert abs(loss_equivariant(coeffs, m) - dense) <= 1e-10 * max(1, dense)
    assert class_losses(coeffs, m).shape == (3,)


@given(st.integers(0, 2**31 - 1), st.floats(0, 1))
def test_loss_convex(seed, theta):
    rng = np.random.default_rng(seed)
    m = random_model(2, (3, 2), 4, seed)
    C1, C2 = rng.standard_normal((5, 5)), rng.standard_normal((5, 5))
    mix = loss(theta * C1 + (1 - theta) * C2, m)
    assert mix <= theta * loss(C1, m) + (1 - theta) * loss(C2, m) + 1e-10


# ---- Reynolds average ----------------------------------------------------


def brute_force_reynolds(C, partition):
    """Average of P C P^T over every within-class permutation."""
    members = [list(partition.members(a)) for a in range(partition.k)]
    n = partition.n
    acc = np.zeros_like(C)
    count = 0
    for perms in itertools.product(*(itertools.permutations(V) for V in members)):
        sigma = np.arange(n)
        for V, p in zip(members, perms):
            sigma[V] = p
        acc += C[np.ix_(sigma, sigma)]
        count += 1
    return acc / count


@pytest.mark.parametrize("sizes", [(2, 3), (1, 3), (2, 1, 2)])
def test_reynolds_matches_group_average(sizes, rng):
    part = Partition.from_sizes(sizes)
    C = rng.standard_normal((part.n, part.n))
    np.testing.assert_allclose(reynolds_average(C, part), brute_force_reynolds(C, part), atol=1e-12)


def test_reynolds_fixed_point_and_invariance(rng):
    part = Partition.from_sizes((3, 2))
    coeffs = EquivariantConv(rng.standard_normal(2), rng.standard_normal(2), rng.standard_normal((2, 2)))
    C = coeffs.assemble(part)
    assert is_class_equivariant(C, part)
    np.testing.assert_allclose(reynolds_average(C, part), C, atol=1e-14)
    R = rng.standard_normal((5, 5))
    swap = np.array([1, 0, 2, 4, 3])
    np.testing.assert_allclose(reynolds_average(R[np.ix_(swap, swap)], part), reynolds_average(R, part), atol=1e-14)
    assert not is_class_equivariant(R, part)


@given(st.integers(0, 2**31 - 1))
def test_reynolds_contraction(seed):
    rng = np.random.default_rng(seed)
    m = random_model(2, (3, 4), 5, seed)
    C = rng.standard_normal((7, 7))
    assert loss(reynolds_average(C, m.partition), m) <= loss(C, m) + 1e-12


def test_coefficient_vector_round_trip(rng):
    c = EquivariantConv(rng.standard_normal(3), rng.standard_normal(3), rng.standard_normal((3, 3)))
    back = EquivariantConv.from_vector(c.to_vector(), 3)
    assert back.to_vector().size == 3 + 3 + 6
    np.testing.assert_array_equal(back.to_vector(), c.to_vector())


# ---- optimum -------------------------------------------------------------


def test_optimum_single_class_pair():
    m = sample_model(1, (2,), 5, 1.0, seed=0)
    coeffs, C = optimal_convolution(m)
    assert coeffs.beta[0] == pytest.approx(1 / 3, abs=1e-15)
    np.testing.assert_allclose(C, np.full((2, 2), 1 / 3), atol=1e-15)


@pytest.mark.parametrize("n,tau", [(1, 0.5), (4, 1.0), (7, 2.5)])
def test_optimum_single_class_closed_form(n, tau):
    coeffs, _ = optimal_convolution(sample_model(1, (n,), 3, tau, seed=1))
    assert coeffs.beta[0] == pytest.approx(1 / (n + tau), rel=1e-14)
    assert coeffs.alpha[0] == 0.0


@pytest.mark.parametrize("sizes", [(3, 2), (1, 4, 2), (2, 2, 2, 1)])
def test_optimum_matches_unconstrained_ridge(sizes):
    m = random_model(len(sizes), sizes, 6, seed=sum(sizes))
    _, C = optimal_convolution(m)
    np.testing.assert_allclose(C, ridge_oracle(m), atol=1e-10)


def test_optimum_stationary_by_finite_differences():
    m = random_model(2, (3, 4), 50, seed=11)
    coeffs, _ = optimal_convolution(m)
    v = coeffs.to_vector()
    h = 1e-6
    grad = np.array([
        (loss_equivariant(EquivariantConv.from_vector(v + h * e, 2), m)
         - loss_equivariant(EquivariantConv.from_vector(v - h * e, 2), m)) / (2 * h)
        for e in np.eye(v.size)])
    assert np.linalg.norm(grad) < 1e-8


def test_optimum_beats_perturbations():
    m = random_model(3, (3, 2, 3), 8, seed=5)
    _, C = optimal_convolution(m)
    best = loss(C, m)
    rng = np.random.default_rng(0)
    for _ in range(1000):
        d = rng.standard_normal(C.shape)
        d *= rng.uniform(0, 0.1) / np.linalg.norm(d)
        assert best <= loss(C + d, m)


def test_asymptotic_single_class_is_exact():
    out = asymptotic_sweep(1, (5,), 1.0, [4, 16, 64], seeds=3)
    assert max(out["beta_median"]) < 1e-15 and max(out["gamma_median"]) == 0.0
    with pytest.raises(DomainError):
        asymptotic_sweep(1, (5,), 1.0, [16, 4], seeds=1)


def test_asymptotic_small_sweep_shrinks():
    out = asymptotic_sweep(2, (5, 5), 1.0, [8, 512], seeds=20)
    assert out["gamma_median"][1] < out["gamma_median"][0]
    assert out["beta_median"][1] < out["beta_median"][0]
    assert len(out["rows"]) == 2 * 20 * 2


# ---- energy and distance -------------------------------------------------


def simple_spectrum_graph(n, seed0=0):
    for seed in range(seed0, seed0 + 200):
        g = random_graph(n, 0.5, seed, connected=True)
        s = eigendecompose(laplacian(g))
        if is_simple_spectrum(s):
            return g, s
    raise AssertionError


def test_energy_of_spectral_filter_is_diagonal():
    g, s = simple_spectrum_graph(7)
    C = UnivariatePoly.monomial([0.3, -1.0, 0.2]).apply(laplacian(g), np.eye(7))
    e = near_diagonal_energy(C, s, [0.0, 0.5])
    np.testing.assert_allclose(e, 1.0, atol=1e-12)


def test_energy_single_offdiagonal_atom():
    g, s = simple_spectrum_graph(6)
    C = np.outer(s.U[:, 0], s.U[:, -1])
    span = s.eigenvalues[-1] - s.eigenvalues[0]
    e = near_diagonal_energy(C, s, [0.0, span * 0.99, span])
    np.testing.assert_allclose(e, [0.0, 0.0, 1.0], atol=1e-12)


def test_energy_zero_operator_rejected():
    s = eigendecompose(laplacian(path_graph(3)))
    with pytest.raises(DomainError):
        near_diagonal_energy(np.zeros((3, 3)), s, [0.1])


@given(st.integers(0, 2**31 - 1))
def test_energy_monotone_and_reaches_one(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(6, 0.5, seed)
    s = eigendecompose(laplacian(g, "normalized"))
    C = rng.standard_normal((6, 6))
    span = s.eigenvalues[-1] - s.eigenvalues[0]
    deltas = np.linspace(0, span, 9)
    e = near_diagonal_energy(C, s, deltas)
    assert np.all(np.diff(e) >= -1e-15)
    assert e[-1] == pytest.approx(1.0, abs=1e-12)


def test_distance_of_spectral_members_is_zero():
    g = cycle_graph(6)  # repeated eigenvalues exercise the grouping
    L = laplacian(g)
    s = eigendecompose(L)
    assert distance_to_spectral_subspace(UnivariatePoly.monomial([1.0, 0.5, -0.2]).apply(L, np.eye(6)), s) < 1e-9
    assert distance_to_spectral_subspace(3.0 * np.eye(6), s) < 1e-9
    assert distance_to_spectral_subspace(np.outer(s.U[:, 0], s.U[:, 3]), s) == pytest.approx(1.0, abs=1e-12)


def test_optimum_is_far_from_spectral_subspace():
    g, s = simple_spectrum_graph(8, seed0=10)
    obs = spectral_obstruction(g, s)
    assert obs.verdict
    m = sample_model(2, (4, 4), 8, 1.0, seed=0)
    _, C = optimal_convolution(m)
    assert distance_to_spectral_subspace(C, s) > 0.01


# ---- obstruction ---------------------------------------------------------


def test_obstruction_p3():
    s = eigendecompose(laplacian(path_graph(3)))
    obs = spectral_obstruction(path_graph(3), s)
    assert obs.activating_list == (0,) and obs.K == 1
    assert obs.stacked_rank == 2 and obs.verdict
    # direct 2 x 3 rank of the endpoint block
    assert np.linalg.matrix_rank(vertex_block(s.U, 0)) == 2


def test_obstruction_p2_block():
    s = eigendecompose(laplacian(path_graph(2)))
    M0 = vertex_block(s.U, 0)
    r = 1 / np.sqrt(2)
    np.testing.assert_allclose(M0, [[r * r, -r * r]], atol=1e-15)
    obs = spectral_obstruction(path_graph(2), s)
    assert obs.stacked_rank == 1 and obs.verdict
    assert set(obs.to_json()) >= {"activating_list", "stacked_rank", "K", "verdict"}


def test_obstruction_disconnected_rejected():
    g = Graph(4, ((0, 1), (2, 3)))
    with pytest.raises(PreconditionError):
        spectral_obstruction(g, eigendecompose(laplacian(g)))


def test_obstruction_kernel_is_constants_on_random_graphs():
    rng = np.random.default_rng(4)
    checked = 0
    for _ in range(60):
        n = int(rng.integers(3, 11))
        g = random_graph(n, 0.5, int(rng.integers(2**31)), connected=True)
        s = eigendecompose(laplacian(g))
        obs = spectral_obstruction(g, s)
        if not obs.degenerate:
            assert obs.null_dim == 1 and obs.verdict
            checked += 1
    assert checked >= 20


def test_greedy_tie_break_smallest_id():
    U = np.eye(3)
    assert greedy_activating_list(U) == [0, 1, 2]


def test_null_space_oracle():
    M = np.array([[1.0, -1.0, 0.0], [0.0, 1.0, -1.0]])
    N = null_space(M)
    assert N.shape == (3, 1)
    np.testing.assert_allclose(np.abs(N[:, 0]), 1 / np.sqrt(3), atol=1e-12)


@given(st.integers(2, 8), st.integers(0, 2**31 - 1))
def test_rank_deletion_law(n, seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, n + 1))
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    Uk = Q[:, :k]
    if rng.random() < 0.5:
        # plant a unit row: make column 0 a coordinate vector
        s_row = int(rng.integers(n))
        rest, _ = np.linalg.qr(np.delete(rng.standard_normal((n, n)), s_row, axis=0))
        Uk = np.zeros((n, k))
        Uk[s_row, 0] = 1.0
        Uk[np.arange(n) != s_row, 1:] = rest[:, : k - 1]
    for row in range(n):
        observed, predicted = deletion_drops_rank(Uk, row)
        assert observed == predicted


def test_stacked_rank_law_random_graphs():
    rng = np.random.default_rng(8)
    tested = 0
    for _ in range(40):
        n = int(rng.integers(3, 9))
        g = random_graph(n, 0.5, int(rng.integers(2**31)), connected=True)
        s = eigendecompose(laplacian(g))
        if not is_simple_spectrum(s):
            continue
        # ground eigenvector is entrywise non-zero, so supports always overlap
        assert np.all(np.abs(s.U[:, 0]) > 1e-8)
        for i in range(n):
            for j in range(i + 1, n):
                observed, predicted = stacked_pair_rank(s.U, i, j)
                assert observed == predicted
        tested += 1
    assert tested >= 10


# ---- sweep plumbing ------------------------------------------------------


def test_heterophily_sweep_rows_and_medians():
    rows = heterophily_sweep([0.0, 1.0], (10, 10), 4, 16, 1.0, seeds=2, deltas=[0.25, 2.0])
    assert len(rows) == 2 * 2 * 2
    med = median_energy(rows, 2.0)
    assert set(med) == {0.0, 1.0}
    # delta covering the whole normalized spectrum captures everything
    assert all(v == pytest.approx(1.0) for v in med.values())
    with pytest.raises(DomainError):
        heterophily_sweep([0.5], (5, 5), 2, 4, 1.0, 1, deltas=[])
