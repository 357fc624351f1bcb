import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spectralweak.errors import ParameterError
from spectralweak.simgraph import GraphParams, SimilarityGraph, connected_components
from spectralweak.spectral import (
    Grouping,
    kmeans,
    kmeans_detailed,
    normalized_laplacian,
    smallest_k_eigenvectors,
    spectral_grouping,
    unnormalized_laplacian,
)

from helpers import two_blobs


def graph_of(w):
    return SimilarityGraph(w=np.asarray(w, dtype=float), model="fully_connected", params=GraphParams())


def random_graph(seed, n=None, density=0.4, integer=False):
    rng = np.random.default_rng(seed)
    if n is None:
        n = int(rng.integers(3, 12))
    mask = np.triu(rng.random((n, n)) < density, 1)
    vals = rng.integers(1, 5, (n, n)).astype(float) if integer else rng.uniform(0.1, 2.0, (n, n))
    w = np.where(mask, vals, 0.0)
    w = w + w.T
    return graph_of(w)


# ---------------------------------------------------------------------------
# Laplacians

def test_unnormalized_single_edge():
    lap = unnormalized_laplacian(graph_of([[0.0, 1.0], [1.0, 0.0]]))
    assert np.array_equal(lap.matrix, [[1.0, -1.0], [-1.0, 1.0]])
    assert lap.kind == "unnormalized"


def test_random_walk_triangle():
    w = np.ones((3, 3)) - np.eye(3)
    lap = normalized_laplacian(graph_of(w), kind="rw")
    expected = np.eye(3) - w / 2.0
    assert np.allclose(lap.matrix, expected, atol=1e-15)


def test_bad_kind_rejected():
    g = graph_of([[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(ParameterError):
        normalized_laplacian(g, kind="hybrid")


@given(st.integers(0, 2**31 - 1))
def test_unnormalized_rows_sum_to_zero(seed):
    lap = unnormalized_laplacian(random_graph(seed))
    assert np.max(np.abs(lap.matrix.sum(axis=1))) < 1e-10


@given(st.integers(0, 2**31 - 1))
def test_unnormalized_is_positive_semidefinite(seed):
    lap = unnormalized_laplacian(random_graph(seed))
    assert np.linalg.eigvalsh(lap.matrix).min() >= -1e-9


@given(st.integers(0, 2**31 - 1))
def test_rw_and_sym_share_eigenvalues(seed):
    g = random_graph(seed)
    rw = normalized_laplacian(g, kind="rw").matrix
    sym = normalized_laplacian(g, kind="sym").matrix
    ev_rw = np.sort(np.linalg.eigvals(rw).real)
    ev_sym = np.linalg.eigvalsh(sym)
    assert np.max(np.abs(ev_rw - ev_sym)) < 1e-9


def test_zero_degree_vertex_is_clamped():
    w = np.zeros((3, 3))
    w[0, 1] = w[1, 0] = 1.0
    lap = normalized_laplacian(graph_of(w), kind="rw")
    assert lap.clamped == (2,)
    # the isolated vertex keeps an all-zero row, hence an eigenvalue-zero indicator
    assert np.array_equal(lap.matrix[2], [0.0, 0.0, 0.0])


def test_permutation_equivariance_exact():
    # integer weights make row sums exact, so equality is bitwise
    g = random_graph(7, n=9, integer=True)
    perm = np.random.default_rng(1).permutation(9)
    gp = graph_of(g.w[np.ix_(perm, perm)])
    lap = normalized_laplacian(g, kind="rw").matrix
    lap_p = normalized_laplacian(gp, kind="rw").matrix
    assert np.array_equal(lap_p, lap[np.ix_(perm, perm)])


# ---------------------------------------------------------------------------
# eigenvectors

def test_embedding_requires_rw_kind():
    g = graph_of([[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(ParameterError):
        smallest_k_eigenvectors(unnormalized_laplacian(g), 1)
    lap = normalized_laplacian(g, kind="rw")
    with pytest.raises(ParameterError):
        smallest_k_eigenvectors(lap, 0)
    with pytest.raises(ParameterError):
        smallest_k_eigenvectors(lap, 3)


def test_connected_graph_first_eigenpair():
    g = random_graph(3, n=8, density=0.9)
    assert connected_components(g.w)[0] == 1
    emb = smallest_k_eigenvectors(normalized_laplacian(g), 1)
    assert abs(emb.eigenvalues[0]) < 1e-10
    v = emb.vectors[:, 0]
    assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)
    # constant direction: all entries equal and positive after sign fixing
    assert np.max(np.abs(v - 1.0 / np.sqrt(8))) < 1e-8


def test_embedding_columns_unit_norm_positive_pivot():
    g = random_graph(11, n=10, density=0.8)
    emb = smallest_k_eigenvectors(normalized_laplacian(g), 4)
    norms = np.linalg.norm(emb.vectors, axis=0)
    assert np.max(np.abs(norms - 1.0)) < 1e-12
    for col in emb.vectors.T:
        assert col[np.argmax(np.abs(col))] > 0


def test_full_spectrum_matches_dense_eigensolver():
    g = random_graph(5, n=6, density=1.0)
    lap = normalized_laplacian(g, kind="rw")
    emb = smallest_k_eigenvectors(lap, 6)
    reference = np.sort(np.linalg.eigvals(lap.matrix).real)
    assert np.max(np.abs(emb.eigenvalues - reference)) < 1e-8
    resid = lap.matrix @ emb.vectors - emb.vectors * emb.eigenvalues[None, :]
    assert np.max(np.linalg.norm(resid, axis=0)) < 1e-8


def two_clique_graph(sizes=(3, 4)):
    n = sum(sizes)
    w = np.zeros((n, n))
    start = 0
    for size in sizes:
        block = slice(start, start + size)
        w[block, block] = 1.0
        start += size
    np.fill_diagonal(w, 0.0)
    return graph_of(w), np.repeat(np.arange(len(sizes)), sizes)


def test_two_cliques_zero_multiplicity_and_indicators():
    g, truth = two_clique_graph()
    emb = smallest_k_eigenvectors(normalized_laplacian(g), 3)
    assert np.all(np.abs(emb.eigenvalues[:2]) < 1e-10)
    assert emb.eigenvalues[2] > 0.1
    # embedding rows coincide within a clique
    rows = emb.vectors[:, :2]
    for group in (0, 1):
        members = rows[truth == group]
        assert np.max(np.abs(members - members[0])) < 1e-8


@given(st.integers(0, 2**31 - 1), st.integers(1, 4))
@settings(max_examples=40)
def test_zero_eigenvalue_multiplicity_counts_components(seed, blocks):
    rng = np.random.default_rng(seed)
    parts = [random_graph(int(rng.integers(0, 2**31)), n=int(rng.integers(2, 5)), density=1.0).w
             for _ in range(blocks)]
    n = sum(p.shape[0] for p in parts)
    w = np.zeros((n, n))
    at = 0
    for p in parts:
        w[at:at + p.shape[0], at:at + p.shape[0]] = p
        at += p.shape[0]
    g = graph_of(w)
    count, _ = connected_components(w)
    emb = smallest_k_eigenvectors(normalized_laplacian(g), n)
    assert int(np.sum(np.abs(emb.eigenvalues) < 1e-8)) == count == blocks


# ---------------------------------------------------------------------------
# k-means

def test_kmeans_k_equals_n_zero_objective():
    pts = np.array([[0.0], [1.0], [5.0], [9.0]])
    res = kmeans_detailed(pts, 4, seed=0)
    assert res.objective == pytest.approx(0.0, abs=1e-12)
    assert sorted(res.grouping.assignments.tolist()) == [0, 1, 2, 3]


def test_kmeans_requires_seed_and_valid_k():
    pts = np.zeros((3, 2))
    with pytest.raises(ParameterError):
        kmeans_detailed(pts, 0, seed=0)
    with pytest.raises(ParameterError):
        kmeans_detailed(pts, 4, seed=0)
    with pytest.raises(ParameterError):
        kmeans_detailed(pts, 2, seed=None)


def test_kmeans_deterministic_per_seed():
    pts, _ = two_blobs(n_per=10, gap=3.0, seed=2)
    a = kmeans_detailed(pts, 2, seed=13)
    b = kmeans_detailed(pts, 2, seed=13)
    assert np.array_equal(a.grouping.assignments, b.grouping.assignments)
    assert a.objective == b.objective
    assert a.best_run == b.best_run


def brute_force_objective(points, k):
    n = points.shape[0]
    best = np.inf
    for labels in itertools.product(range(k), repeat=n):
        labels = np.asarray(labels)
        if len(set(labels.tolist())) < k:
            continue
        total = 0.0
        for c in range(k):
            member = points[labels == c]
            total += float(((member - member.mean(axis=0)) ** 2).sum())
        best = min(best, total)
    return best


def test_kmeans_matches_exhaustive_partition_search():
    pts, _ = two_blobs(n_per=4, gap=6.0, spread=0.5, seed=5)
    res = kmeans_detailed(pts, 2, seed=0, restarts=20)
    assert res.objective == pytest.approx(brute_force_objective(pts, 2), abs=1e-9)


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=30)
def test_kmeans_objective_trace_non_increasing(seed):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(int(rng.integers(5, 20)), 2))
    res = kmeans_detailed(pts, int(rng.integers(2, 4)), seed=int(rng.integers(0, 100)))
    for run in res.runs:
        trace = np.asarray(run.objective_trace)
        assert np.all(np.diff(trace) <= 1e-12)
        assert run.objective == trace[-1]
    assert res.objective == min(r.objective for r in res.runs)


def test_grouping_validation():
    with pytest.raises(ParameterError):
        Grouping(assignments=np.array([0, 2]), k=2)
    g = Grouping(assignments=np.array([0, 0, 1]), k=3)
    assert g.sizes().tolist() == [2, 1, 0]
    assert g.has_empty_group()


# ---------------------------------------------------------------------------
# end-to-end spectral grouping

def test_spectral_grouping_recovers_cliques():
    g, truth = two_clique_graph((4, 5))
    got = spectral_grouping(g, 2, seed=0).assignments
    # same partition regardless of which numeric label each clique drew
    assert len({(int(a), int(t)) for a, t in zip(got, truth)}) == 2


def test_spectral_grouping_k_bound():
    g, _ = two_clique_graph()
    with pytest.raises(ParameterError):
        spectral_grouping(g, 1, seed=0)


@given(st.integers(-8, 8))
@settings(max_examples=17)
def test_spectral_grouping_invariant_to_power_of_two_scaling(exp):
    # scaling by 2**exp is exact in floating point, so the random-walk
    # normalization cancels it bit for bit
    g = random_graph(21, n=9, density=0.7)
    scaled = graph_of(g.w * 2.0**exp)
    a = spectral_grouping(g, 2, seed=3).assignments
    b = spectral_grouping(scaled, 2, seed=3).assignments
    assert np.array_equal(a, b)


def test_kmeans_convenience_wrapper():
    pts, labels = two_blobs(n_per=6, gap=8.0, seed=1)
    grouping = kmeans(pts, 2, seed=0)
    # perfect separation: the two blobs are the two groups
    assert len({(int(a), int(t)) for a, t in zip(grouping.assignments, labels)}) == 2
