import numpy as np
import pytest

from dmfw.constraints import L1Ball, L2Ball, Simplex
from dmfw.exceptions import NumericError
from dmfw.oracles import FTPLOracle, OGDOracle, OracleLog, average_regret, make_oracle


def test_ogd_starts_at_canonical_vertex():
    np.testing.assert_array_equal(OGDOracle(L1Ball(2)).next_vector(), [1.0, 0.0])


def test_ogd_hand_step_l2():
    o = OGDOracle(L2Ball(2), step_scale=0.5)
    o.current = np.array([1.0, 0.0])
    o.next_vector()
    o.feedback([1.0, 0.0])
    np.testing.assert_allclose(o.current, [0.5, 0.0])


def test_ogd_hand_step_l1():
    o = OGDOracle(L1Ball(2), step_scale=1.0)
    o.next_vector()
    o.feedback([0.0, 1.0])
    np.testing.assert_allclose(o.current, [0.5, -0.5], atol=1e-15)
    assert o.step_count == 1


def test_ogd_step_decays_as_inverse_sqrt():
    o = OGDOracle(L2Ball(1, 100.0), step_scale=2.0)
    o.current = np.zeros(1)
    for k in range(1, 5):
        before = o.current.copy()
        o.feedback([1.0])
        assert abs((before - o.current)[0] - 2.0 / np.sqrt(k)) < 1e-14


def test_zero_cost_leaves_ogd_unchanged():
    o = OGDOracle(L1Ball(3), step_scale=1.0)
    start = o.next_vector()
    o.feedback(np.zeros(3))
    np.testing.assert_array_equal(o.next_vector(), start)


def test_ftpl_zero_cost_plays_lmo_of_perturbation():
    k = L1Ball(3)
    o = FTPLOracle(k, amplitude=2.0)
    z = np.array([0.1, 0.9, 0.4])
    np.testing.assert_array_equal(o.next_vector(z), k.lmo(2.0 * z))


def test_ftpl_accumulates():
    o = FTPLOracle(L1Ball(2))
    o.accumulated_cost = [1.0, 2.0]
    o.next_vector()
    o.feedback([0.5, -1.0])
    np.testing.assert_array_equal(o.accumulated_cost, [1.5, 1.0])


def test_feedback_rejects_non_finite():
    with pytest.raises(NumericError):
        OGDOracle(L1Ball(2)).feedback([np.nan, 0.0])


def test_regret_examples():
    k = L1Ball(1)
    log = OracleLog(played=[np.array([1.0]), np.array([1.0])], costs=[np.array([1.0]), np.array([-1.0])])
    assert average_regret(log, k) == 0.0
    c = np.array([0.3, -2.0])
    assert average_regret(OracleLog([L1Ball(2).lmo(c)], [c]), L1Ball(2)) == 0.0
    assert average_regret(OracleLog([np.array([0.5, 0.0])] * 3, [np.zeros(2)] * 3), L1Ball(2)) == 0.0
    with pytest.raises(ValueError):
        average_regret(OracleLog(), k)


def test_running_regret_matches_log():
    rng = np.random.default_rng(0)
    k = Simplex(4)
    o = OGDOracle(k, step_scale=0.3)
    for _ in range(50):
        o.next_vector()
        o.feedback(rng.standard_normal(4))
    assert abs(o.average_regret() - average_regret(o.log, k)) < 1e-12


def _adversary(T, dim, G, rng):
    # Costs flip sign in blocks so that lazily tracking the leader is punished.
    base = rng.standard_normal(dim)
    base *= G / np.linalg.norm(base)
    signs = np.where((np.arange(T) // 7) % 2 == 0, 1.0, -0.8)
    noise = 0.3 * G * rng.standard_normal((T, dim)) / np.sqrt(dim)
    costs = signs[:, None] * base + noise
    norms = np.linalg.norm(costs, axis=1, keepdims=True)
    return costs * np.minimum(1.0, G / norms)


@pytest.mark.parametrize("k", [L1Ball(5, 1.0), L2Ball(5, 2.0), Simplex(5)], ids=repr)
def test_ogd_regret_bound(k):
    T, G = 1000, 3.0
    D = k.diameter()
    for seed in range(5):
        costs = _adversary(T, k.dim, G, np.random.default_rng(seed))
        o = OGDOracle(k, step_scale=D / G)
        for c in costs:
            o.next_vector()
            o.feedback(c)
        assert o.average_regret() <= 1.5 * G * D / np.sqrt(T)


def _ftpl_regret(T, seed):
    k = L1Ball(4)
    rng = np.random.default_rng([seed, 99])
    mean = np.array([0.2, -0.1, 0.05, 0.15])
    costs = mean + rng.standard_normal((T, 4))
    o = FTPLOracle(k, amplitude=np.sqrt(T), seed=seed)
    for c in costs:
        o.next_vector()
        o.feedback(c)
    return o.average_regret()


def test_ftpl_regret_decreases_with_horizon():
    short = np.mean([_ftpl_regret(400, s) for s in range(50)])
    long = np.mean([_ftpl_regret(1600, s) for s in range(50)])
    assert long <= 0.6 * short


@pytest.mark.parametrize("kind", ["ogd", "ftpl"])
def test_deterministic_replay(kind):
    rng = np.random.default_rng(5)
    costs = rng.standard_normal((40, 3))

    def play():
        o = make_oracle(kind, L1Ball(3), step_scale=0.5, amplitude=2.0, seed=11)
        out = []
        for c in costs:
            out.append(o.next_vector())
            o.feedback(c)
        return np.array(out)

    np.testing.assert_array_equal(play(), play())


@pytest.mark.parametrize("kind", ["ogd", "ftpl"])
def test_played_vectors_feasible(kind):
    k = L1Ball(4, 0.7)
    o = make_oracle(kind, k, step_scale=1.0, amplitude=1.0, seed=2)
    rng = np.random.default_rng(1)
    for _ in range(100):
        v = o.next_vector()
        assert k.contains(v, 1e-9)
        o.feedback(5 * rng.standard_normal(4))
    assert o.step_count == 100


def test_batched_oracles_match_independent_ones():
    k = L1Ball(3)
    rng = np.random.default_rng(3)
    costs = rng.standard_normal((10, 2, 4, 3))
    batch = OGDOracle(k, 0.7, shape=(2, 4))
    singles = [[OGDOracle(k, 0.7) for _ in range(4)] for _ in range(2)]
    for c in costs:
        batch.next_vector()
        batch.feedback(c)
        for i in range(2):
            for j in range(4):
                singles[i][j].next_vector()
                singles[i][j].feedback(c[i, j])
    for i in range(2):
        for j in range(4):
            np.testing.assert_array_equal(batch.current[i, j], singles[i][j].current)
            assert abs(batch.average_regret()[i, j] - singles[i][j].average_regret()) < 1e-14


def test_unknown_kind():
    with pytest.raises(ValueError):
        make_oracle("bandit", L1Ball(2))
