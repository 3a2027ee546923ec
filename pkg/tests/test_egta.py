import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stylerank.egta import (
    CsvFormatError,
    FirstFitPolicy,
    PayoffTensor,
    RandomLegalPolicy,
    aggregate,
    estimate_payoffs,
    play_game,
    pure_nash,
    violation_stats,
)
from stylerank._seeding import seed_sequence
from stylerank.files import fixture_path
from stylerank.game import GridConfig, generate_grid


class LastBlock:
    """Deterministic: highest white block, color picked from the block index."""

    def __init__(self, num_colors):
        self.num_colors = num_colors

    def act(self, state):
        b = state.white_blocks[-1]
        return b, b % self.num_colors


NO_HIDDEN = GridConfig(hidden_fraction=0.0)


def test_fixture_values(gcg):
    assert gcg.shape == (11, 11)
    assert gcg.entry("WL", "CA") == (3.17, 3.22)
    assert gcg.entry("L", "WL") == (3.15, 3.21)
    assert gcg.entry("WL", "L") == (3.21, 3.15)
    assert (gcg.runs == 5000).all()


@pytest.mark.parametrize("name", ["gcg_payoff_matrix.csv", "rps.csv"])
def test_csv_roundtrip_is_byte_identical(name):
    with open(fixture_path(name)) as fh:
        text = fh.read()
    assert PayoffTensor.from_csv(text).to_csv() == text


def test_csv_roundtrip_of_simulated_values():
    rng = np.random.default_rng(3)
    t = PayoffTensor(["a", "b"], rng.normal(size=(2, 2)), rng.normal(size=(2, 2)) / 3, [[7, 7], [7, 7]],
                     comments=["x"])
    back = PayoffTensor.from_csv(t.to_csv())
    assert back == t and back.to_csv() == t.to_csv()


@pytest.mark.parametrize("text, needle", [
    ("a,b,c\n", ":1: expected header"),
    ("row_strategy,col_strategy,p1,p2,n_runs\nA,A,1,2\n", ":2: expected 5 fields"),
    ("row_strategy,col_strategy,p1,p2,n_runs\nA,A,1,2,3\nA,A,1,2,3\n", ":3: duplicate profile"),
    ("row_strategy,col_strategy,p1,p2,n_runs\nA,A,1,nan,3\n", ":2: non-finite"),
    ("# c\nrow_strategy,col_strategy,p1,p2,n_runs\nA,A,1,2,3\nA,B,1,2,3\nB,A,1,2,3\n", "incomplete"),
    ("", "missing header"),
])
def test_csv_errors(text, needle):
    with pytest.raises(CsvFormatError, match=needle):
        PayoffTensor.from_csv(text, source="t.csv")


def test_csv_columns_follow_row_order():
    text = ("row_strategy,col_strategy,p1,p2,n_runs\n"
            "A,B,1,2,1\nA,A,3,4,1\nB,B,5,6,1\nB,A,7,8,1\n")
    t = PayoffTensor.from_csv(text)
    assert t.col_strategies == ["A", "B"]
    assert t.entry("A", "B") == (1.0, 2.0) and t.entry("B", "A") == (7.0, 8.0)


def test_pure_nash_examples(gcg, rps):
    assert pure_nash(rps) == []
    assert pure_nash(PayoffTensor(["x"], [[0.3]], [[-1.0]])) == [("x", "x")]
    # standard reading: p1 is the payoff of the row seat
    assert sorted(pure_nash(gcg)) == [("CA", "LE"), ("CA", "M"), ("CA", "W"), ("WL", "CA")]
    # reading p1 as the column seat's payoff
    swapped = PayoffTensor(gcg.row_strategies, gcg.p2, gcg.p1)
    assert sorted(pure_nash(swapped)) == [("L", "WL"), ("WL", "L")]


def test_pure_nash_weak_inequalities():
    t = PayoffTensor(["a", "b"], [[1, 1], [1, 1]], [[0, 0], [0, 0]])
    assert len(pure_nash(t)) == 4


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.data())
def test_pure_nash_matches_best_response_scan(n, k, data):
    cells = st.integers(-2, 2)
    p1 = np.array(data.draw(st.lists(st.lists(cells, min_size=k, max_size=k), min_size=n, max_size=n)))
    p2 = np.array(data.draw(st.lists(st.lists(cells, min_size=k, max_size=k), min_size=n, max_size=n)))
    rows = [f"r{i}" for i in range(n)]
    cols = [f"c{j}" for j in range(k)]
    want = [(rows[i], cols[j]) for i in range(n) for j in range(k)
            if p1[i, j] == p1[:, j].max() and p2[i, j] == p2[i, :].max()]
    assert pure_nash(PayoffTensor(rows, p1, p2, col_strategies=cols)) == want


def test_aggregate():
    a = PayoffTensor(["x"], [[1.0]], [[2.0]], [[10]])
    b = PayoffTensor(["x"], [[3.0]], [[4.0]], [[20]])
    m = aggregate([a, b])
    assert m.entry("x", "x") == (2.0, 3.0) and m.runs[0, 0] == 30
    assert aggregate([a]) == a
    assert aggregate([b, a]) == m
    assert aggregate([a, a]).entry("x", "x") == a.entry("x", "x")
    with pytest.raises(ValueError, match=r"symmetric difference \['x', 'y'\]"):
        aggregate([a, PayoffTensor(["y"], [[0.0]], [[0.0]])])
    with pytest.raises(ValueError, match="order"):
        aggregate([PayoffTensor(["x", "y"], np.zeros((2, 2)), np.zeros((2, 2))),
                   PayoffTensor(["y", "x"], np.zeros((2, 2)), np.zeros((2, 2)))])
    with pytest.raises(ValueError):
        aggregate([])


def test_single_deterministic_game_is_the_entry():
    graph = generate_grid(NO_HIDDEN)
    pols = {"F": FirstFitPolicy(graph, 10), "L": LastBlock(10)}
    t = estimate_payoffs(pols, NO_HIDDEN, 1, seed=11, graph=graph)
    rng = np.random.default_rng(seed_sequence(11, "sim/F/L").spawn(1)[0])
    game = play_game(graph, NO_HIDDEN, (pols["F"], pols["L"]), rng)
    assert t.entry("F", "L") == tuple(game.payoffs)
    assert t.runs[0, 1] == 1


def test_permutation_consistency():
    graph = generate_grid(GridConfig())
    pols = {"F": FirstFitPolicy(graph, 10), "L": LastBlock(10)}
    a = estimate_payoffs(pols, GridConfig(), 20, seed=2, strategies=["F", "L"], graph=graph)
    b = estimate_payoffs(pols, GridConfig(), 20, seed=2, strategies=["L", "F"], graph=graph)
    assert b.permuted(["F", "L"]) == a


def test_parallel_matches_serial():
    graph = generate_grid(GridConfig())
    pols = {"F": FirstFitPolicy(graph, 10), "L": LastBlock(10)}
    a = estimate_payoffs(pols, GridConfig(), 10, seed=2, graph=graph)
    b = estimate_payoffs(pols, GridConfig(), 10, seed=2, graph=graph, n_jobs=2)
    assert a == b


def test_symmetric_profile_has_symmetric_payoffs():
    graph = generate_grid(GridConfig())
    pols = {"F": FirstFitPolicy(graph, 10)}
    t = estimate_payoffs(pols, GridConfig(), 2000, seed=5, graph=graph, antithetic=True)
    p1, p2 = t.entry("F", "F")
    assert abs(p1 - p2) < 0.05
    # without pairing the seats differ only by noise
    plain = estimate_payoffs(pols, GridConfig(), 2000, seed=5, graph=graph)
    p1, p2 = plain.entry("F", "F")
    assert abs(p1 - p2) < 4 * np.hypot(*plain.stderr[:, 0, 0])


def test_mirrored_game_swaps_seat_roles():
    graph = generate_grid(GridConfig())
    pols = (FirstFitPolicy(graph, 10), LastBlock(10))
    a = play_game(graph, GridConfig(), pols, np.random.default_rng(9))
    b = play_game(graph, GridConfig(), pols[::-1], np.random.default_rng(9), mirror=True)
    assert np.array_equal(a.payoffs, b.payoffs[::-1])
    assert a.final_state == b.final_state


def test_per_seat_policies():
    graph = generate_grid(GridConfig())
    first, last = FirstFitPolicy(graph, 10), LastBlock(10)
    shared = estimate_payoffs({"s": first}, GridConfig(), 5, seed=1, graph=graph)
    # a pair of identical mappings is the shared mapping
    assert estimate_payoffs(({"s": first}, {"s": first}), GridConfig(), 5, seed=1, graph=graph) == shared
    split = estimate_payoffs(({"s": first}, {"s": last}), GridConfig(), 5, seed=1, graph=graph)
    assert split.shape == (1, 1) and split != shared
    with pytest.raises(KeyError):
        estimate_payoffs(({"s": first}, {}), GridConfig(), 1)
    with pytest.raises(ValueError):
        estimate_payoffs(({"s": first},), GridConfig(), 1)


def test_missing_policy_and_bad_n():
    with pytest.raises(KeyError, match="no policy"):
        estimate_payoffs({"a": None}, GridConfig(), 1, strategies=["a", "b"])
    with pytest.raises(ValueError):
        estimate_payoffs({"a": None}, GridConfig(), 0)


def test_with_violations_reports_each_profile():
    graph = generate_grid(GridConfig())
    pols = {"F": FirstFitPolicy(graph, 10), "L": LastBlock(10)}
    t, stats = estimate_payoffs(pols, GridConfig(), 5, seed=0, graph=graph, with_violations=True)
    assert set(stats) == set(t.profiles())
    assert all(0.0 <= s["violation_rate"] <= 1.0 and s["games"] == 5 for s in stats.values())


def test_violation_stats():
    graph = generate_grid(NO_HIDDEN)
    ff = {"F": FirstFitPolicy(graph, 10)}
    clean = violation_stats(ff, ("F", "F"), NO_HIDDEN, 20, seed=0, graph=graph)
    assert clean == {"violation_rate": 0.0, "games": 20, "truncated": 0}
    graph = generate_grid(GridConfig())
    rnd = {"R": RandomLegalPolicy(10, random_state=0)}
    noisy = violation_stats(rnd, ("R", "R"), GridConfig(), 50, seed=0, graph=graph)
    assert 0.0 < noisy["violation_rate"] <= 1.0
    with pytest.raises(KeyError):
        violation_stats(rnd, ("R", "X"), GridConfig(), 1)


def test_truncation_is_flagged():
    graph = generate_grid(GridConfig())

    class Stubborn:
        def act(self, state):
            return 0, 0

    res = play_game(graph, GridConfig(), [Stubborn(), Stubborn()], np.random.default_rng(0), max_rounds=30)
    assert res.truncated and res.rounds == 30 and res.sanctions.sum() > 0
