import itertools

import numpy as np
import pytest

from dmfw.exceptions import ConstructionError
from dmfw.topology import (Topology, build_gossip_matrix, build_topology, check_gossip_matrix,
                           second_eigenvalue_magnitude)

KINDS = ("complete", "cycle", "line", "star", "erdos_renyi")


def test_line3_edges():
    assert build_topology("line", 3).edges == frozenset({(0, 1), (1, 2)})


@pytest.mark.parametrize("kind,n,count", [("cycle", 7, 7), ("line", 7, 6), ("complete", 7, 21),
                                          ("complete", 13, 78), ("cycle", 13, 13), ("line", 13, 12)])
def test_edge_counts(kind, n, count):
    assert build_topology(kind, n).num_edges == count


def test_star_shape():
    topo = build_topology("star", 5)
    assert topo.degrees().tolist() == [4, 1, 1, 1, 1]


def test_small_n_rejected():
    with pytest.raises(ConstructionError):
        build_topology("cycle", 1)


def test_unknown_kind_rejected():
    with pytest.raises(ConstructionError):
        build_topology("torus", 4)


def test_self_loop_rejected():
    with pytest.raises(ValueError):
        Topology(3, frozenset({(1, 1)}))


def test_erdos_renyi_connected_and_seeded():
    a = build_topology("erdos_renyi", 20, seed=3, p=0.2)
    b = build_topology("erdos_renyi", 20, seed=3, p=0.2)
    assert a == b and a.is_connected()


def test_erdos_renyi_gives_up():
    with pytest.raises(ConstructionError):
        build_topology("erdos_renyi", 30, seed=0, p=1e-6)


def test_line3_weights():
    w = build_gossip_matrix(build_topology("line", 3)).entries
    expected = np.array([[2 / 3, 1 / 3, 0], [1 / 3, 1 / 3, 1 / 3], [0, 1 / 3, 2 / 3]])
    np.testing.assert_allclose(w, expected, atol=1e-15)


@pytest.mark.parametrize("n", [2, 3, 6, 13])
def test_complete_weights(n):
    w = build_gossip_matrix(build_topology("complete", n)).entries
    np.testing.assert_allclose(w, np.full((n, n), 1.0 / n), atol=1e-15)


def test_two_node_line():
    w = build_gossip_matrix(build_topology("line", 2)).entries
    np.testing.assert_array_equal(w, [[0.5, 0.5], [0.5, 0.5]])


def test_disconnected_rejected():
    with pytest.raises(ConstructionError):
        build_gossip_matrix(Topology(4, frozenset({(0, 1), (2, 3)})))


@pytest.mark.parametrize("n", [2, 5, 9])
def test_lambda2_complete_is_zero(n):
    assert second_eigenvalue_magnitude(build_gossip_matrix(build_topology("complete", n))) < 1e-12


def test_lambda2_cycle4():
    w = build_gossip_matrix(build_topology("cycle", 4))
    assert abs(second_eigenvalue_magnitude(w) - 1 / 3) < 1e-8


def test_lambda2_matches_circulant_formula():
    n = 9
    w = build_gossip_matrix(build_topology("cycle", n))
    eig = [(1 + 2 * np.cos(2 * np.pi * k / n)) / 3 for k in range(n)]
    expect = sorted(np.abs(eig))[-2]
    assert abs(w.lambda2() - expect) < 1e-8


@pytest.mark.parametrize("kind,n", list(itertools.product(KINDS, range(2, 51, 3))))
def test_gossip_invariants(kind, n):
    w = build_gossip_matrix(build_topology(kind, n, seed=n, p=0.4))
    check_gossip_matrix(w)
    e = w.entries
    topo = w.topology
    deg = topo.degrees()
    for i, j in topo.edges:
        assert e[i, j] == e[j, i] == 1.0 / (1 + max(deg[i], deg[j]))


def test_check_names_violation():
    w = np.array(build_gossip_matrix(build_topology("cycle", 5)).entries)
    w[0, 0] -= 0.1
    with pytest.raises(ConstructionError, match="doubly stochastic"):
        check_gossip_matrix(w)
    asym = np.array(build_gossip_matrix(build_topology("cycle", 5)).entries)
    asym[0, 1] += 1e-3
    with pytest.raises(ConstructionError, match="symmetric"):
        check_gossip_matrix(asym)


def test_sparsity_violation_detected():
    from dmfw.topology import GossipMatrix

    topo = build_topology("line", 3)
    bad = GossipMatrix(topo, np.full((3, 3), 1 / 3))
    with pytest.raises(ConstructionError, match="sparsity"):
        check_gossip_matrix(bad)


@pytest.mark.parametrize("kind", KINDS)
def test_repeated_averaging_bound(kind, rng):
    w = build_gossip_matrix(build_topology(kind, 8, seed=1, p=0.4))
    lam = w.lambda2()
    x = rng.standard_normal(8)
    dev0 = np.linalg.norm(x - x.mean())
    y = x.copy()
    for k in range(1, 101):
        y = w.entries @ y
        assert np.linalg.norm(y - x.mean()) <= lam ** k * dev0 + 1e-9


@pytest.mark.parametrize("kind", KINDS)
def test_relabel_permutes_matrix_exactly(kind, rng):
    topo = build_topology(kind, 9, seed=2, p=0.4)
    perm = rng.permutation(9)
    w = build_gossip_matrix(topo).entries
    w2 = build_gossip_matrix(topo.relabel(perm)).entries
    P = np.zeros((9, 9))
    P[perm, np.arange(9)] = 1.0
    np.testing.assert_array_equal(w2, P @ w @ P.T)


def test_edge_list_round_trip():
    topo = build_topology("erdos_renyi", 10, seed=4, p=0.3)
    text = topo.to_edgelist()
    assert text.splitlines()[0] == "n 10"
    assert Topology.from_edgelist(text) == topo


def test_mix_matches_matmul(rng):
    w = build_gossip_matrix(build_topology("star", 6))
    vals = rng.standard_normal((6, 4, 3))
    np.testing.assert_allclose(w.mix(vals), np.einsum("ij,jlk->ilk", w.entries, vals))


def test_matrix_is_read_only():
    w = build_gossip_matrix(build_topology("cycle", 4))
    with pytest.raises(ValueError):
        w.entries[0, 0] = 1.0
