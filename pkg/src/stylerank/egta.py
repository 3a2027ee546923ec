"""Empirical game construction from simulated play.

Every ordered profile of styles is played ``N`` times with each seat acting
greedily under its style's policy; the meta-game payoff of a seat is its mean
undiscounted base reward (gains, penalties, sanctions and delays, without the
preference terms used in training).
"""

import csv
import io
from dataclasses import dataclass

import numpy as np

from ._seeding import seed_sequence
from .game import count_violations, generate_grid, init_state, is_terminal, reveal_phase, step


class CsvFormatError(ValueError):
    """A payoff CSV violates the schema; the message names the offending line."""


class PayoffTensor:
    """Two-population empirical game.

    ``p1[i, j]`` and ``p2[i, j]`` are the mean payoffs of the row and column
    seat when row plays ``row_strategies[i]`` and column plays
    ``col_strategies[j]``; ``runs[i, j]`` counts the simulations behind them.
    """

    HEADER = ("row_strategy", "col_strategy", "p1", "p2", "n_runs")

    def __init__(self, row_strategies, p1, p2, runs=None, col_strategies=None,
                 stderr=None, comments=()):
        self.row_strategies = list(row_strategies)
        self.col_strategies = list(self.row_strategies if col_strategies is None else col_strategies)
        shape = (len(self.row_strategies), len(self.col_strategies))
        self.p1 = np.asarray(p1, dtype=float).reshape(shape)
        self.p2 = np.asarray(p2, dtype=float).reshape(shape)
        self.runs = np.zeros(shape, dtype=int) if runs is None else np.asarray(runs, dtype=int).reshape(shape)
        self.stderr = None if stderr is None else np.asarray(stderr, dtype=float).reshape((2,) + shape)
        self.comments = list(comments)
        if not (np.isfinite(self.p1).all() and np.isfinite(self.p2).all()):
            raise ValueError("payoff tensor is incomplete or non-finite")
        for names in (self.row_strategies, self.col_strategies):
            if len(set(names)) != len(names):
                raise ValueError(f"duplicate strategy names: {names}")

    @property
    def shape(self):
        return self.p1.shape

    @property
    def strategies(self):
        return self.row_strategies

    def payoff_tables(self):
        return [self.p1, self.p2]

    def profiles(self):
        return [(r, c) for r in self.row_strategies for c in self.col_strategies]

    def entry(self, row, col):
        i, j = self.row_strategies.index(row), self.col_strategies.index(col)
        return float(self.p1[i, j]), float(self.p2[i, j])

    def permuted(self, row_order, col_order=None):
        col_order = row_order if col_order is None else col_order
        ri = [self.row_strategies.index(s) for s in row_order]
        ci = [self.col_strategies.index(s) for s in col_order]
        idx = np.ix_(ri, ci)
        se = None if self.stderr is None else self.stderr[:, ri][:, :, ci]
        return PayoffTensor(row_order, self.p1[idx], self.p2[idx], self.runs[idx],
                            col_order, se, self.comments)

    def __eq__(self, other):
        return (isinstance(other, PayoffTensor)
                and self.row_strategies == other.row_strategies
                and self.col_strategies == other.col_strategies
                and np.array_equal(self.p1, other.p1) and np.array_equal(self.p2, other.p2)
                and np.array_equal(self.runs, other.runs))

    def __repr__(self):
        return f"PayoffTensor({self.shape[0]}x{self.shape[1]}, strategies={self.row_strategies})"

    # -- CSV -------------------------------------------------------------------

    def to_csv(self):
        buf = io.StringIO()
        for line in self.comments:
            buf.write(f"# {line}\n" if line else "#\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.HEADER)
        for i, r in enumerate(self.row_strategies):
            for j, c in enumerate(self.col_strategies):
                w.writerow([r, c, repr(float(self.p1[i, j])), repr(float(self.p2[i, j])),
                            int(self.runs[i, j])])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text, source="<csv>"):
        comments = []
        rows = []
        header_seen = False
        for lineno, line in enumerate(text.splitlines(), start=1):
            if line.startswith("#"):
                comments.append(line[2:] if line.startswith("# ") else line[1:])
                continue
            if not line.strip():
                continue
            fields = next(csv.reader([line]))
            if not header_seen:
                if tuple(f.strip() for f in fields) != cls.HEADER:
                    raise CsvFormatError(
                        f"{source}:{lineno}: expected header {','.join(cls.HEADER)}, got {line!r}")
                header_seen = True
                continue
            if len(fields) != 5:
                raise CsvFormatError(f"{source}:{lineno}: expected 5 fields, got {len(fields)}")
            try:
                rows.append((fields[0].strip(), fields[1].strip(), float(fields[2]),
                             float(fields[3]), int(fields[4]), lineno))
            except ValueError as exc:
                raise CsvFormatError(f"{source}:{lineno}: {exc}") from None
        if not header_seen:
            raise CsvFormatError(f"{source}: missing header line")
        row_names = list(dict.fromkeys(r[0] for r in rows))
        col_names = list(dict.fromkeys(r[1] for r in rows))
        shape = (len(row_names), len(col_names))
        p1 = np.full(shape, np.nan)
        p2 = np.full(shape, np.nan)
        runs = np.zeros(shape, dtype=int)
        for r, c, a, b, n, lineno in rows:
            i, j = row_names.index(r), col_names.index(c)
            if not np.isnan(p1[i, j]):
                raise CsvFormatError(f"{source}:{lineno}: duplicate profile ({r},{c})")
            if not (np.isfinite(a) and np.isfinite(b)) or n < 0:
                raise CsvFormatError(f"{source}:{lineno}: non-finite payoff or negative n_runs")
            p1[i, j], p2[i, j], runs[i, j] = a, b, n
        missing = [(row_names[i], col_names[j]) for i, j in zip(*np.nonzero(np.isnan(p1)))]
        if missing:
            raise CsvFormatError(f"{source}: incomplete tensor, missing profiles {missing}")
        if set(row_names) == set(col_names) and col_names != row_names:
            order = [col_names.index(n) for n in row_names]
            p1, p2, runs = p1[:, order], p2[:, order], runs[:, order]
            col_names = row_names
        return cls(row_names, p1, p2, runs, col_names, comments=comments)

    @classmethod
    def read_csv(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_csv(fh.read(), source=str(path))


# ---------------------------------------------------------------------------
# simulation


class RandomLegalPolicy:
    """Uniform over white blocks and colors; a stochastic baseline for tests."""

    def __init__(self, num_colors, random_state=None):
        self.num_colors = num_colors
        self.rng = np.random.default_rng(random_state)

    def act(self, state):
        whites = state.white_blocks
        return int(self.rng.choice(whites)), int(self.rng.integers(self.num_colors))


class FirstFitPolicy:
    """Lowest white block, lowest color not used by a colored neighbor."""

    def __init__(self, graph, num_colors):
        self.graph, self.num_colors = graph, num_colors

    def act(self, state):
        b = state.white_blocks[0]
        used = {state.colors[j] for j in self.graph.neighbors[b]}
        free = [c for c in range(self.num_colors) if c not in used]
        return b, (free[0] if free else 0)


@dataclass
class GameResult:
    payoffs: np.ndarray
    final_state: object
    rounds: int
    truncated: bool
    sanctions: np.ndarray
    penalties: np.ndarray
    delays: np.ndarray


def play_game(graph, config, players, rng, max_rounds=200, mirror=False):
    """Play one game; seat ``k`` acts with ``players[k].act(state)``.

    A random permutation drawn once per game assigns seats to roles: role 0
    has its paint applied first within a round, and collision coins are drawn
    over roles. ``mirror=True`` reverses that assignment while every other
    random draw stays the same, which gives the antithetic partner of a game.
    Games still running after ``max_rounds`` rounds are cut off and flagged.
    """
    k = len(players)
    seats = [int(s) for s in rng.permutation(k)]
    if mirror:
        seats.reverse()
    state = init_state(graph, config, rng)
    totals = np.zeros(k)
    sanctions = np.zeros(k, dtype=int)
    penalties = np.zeros(k, dtype=int)
    delays = np.zeros(k, dtype=int)
    rounds = 0
    while not is_terminal(state) and rounds < max_rounds:
        rounds += 1
        if state.is_idle():
            state, _ = reveal_phase(state, rng)
            continue
        joint = [players[s].act(state) for s in seats]
        out = step(graph, state, joint, rng, num_colors=config.num_colors)
        for role, seat in enumerate(seats):
            ev = out.events[role]
            totals[seat] += out.base_reward[role]
            sanctions[seat] += ev.sanctioned
            penalties[seat] += ev.penalties
            delays[seat] += ev.delayed
        state = out.next_state
    return GameResult(totals, state, rounds, not is_terminal(state), sanctions, penalties, delays)


def seat_policies(policies):
    """Normalize ``policies`` to one style->policy mapping per seat.

    A single mapping is shared by both seats; a pair of mappings gives each
    population its own, independently trained, policy instances.
    """
    if isinstance(policies, (list, tuple)):
        if len(policies) != 2:
            raise ValueError("per-seat policies must be a pair of mappings")
        return tuple(policies)
    return policies, policies


def _simulate_profile(graph, config, players, n_runs, master_seed, label, max_rounds,
                      antithetic=False):
    """Per-run payoffs, shape ``(n_runs, 2)``, and the GameResults behind them.

    With ``antithetic`` each run is a mirrored pair of games on one stream and
    its payoff is the pair mean.
    """
    pay, results = [], []
    for ss in seed_sequence(master_seed, label).spawn(n_runs):
        if antithetic:
            pair = [play_game(graph, config, players, np.random.default_rng(ss), max_rounds, mirror=m)
                    for m in (False, True)]
            pay.append((pair[0].payoffs + pair[1].payoffs) / 2)
            results.extend(pair)
        else:
            res = play_game(graph, config, players, np.random.default_rng(ss), max_rounds)
            pay.append(res.payoffs)
            results.append(res)
    return np.array(pay), results


def _violation_summary(graph, results):
    rates = []
    for res in results:
        bad, total = count_violations(graph, res.final_state)
        rates.append(bad / total if total else 0.0)
    return {
        "violation_rate": float(np.mean(rates)),
        "games": len(results),
        "truncated": int(sum(res.truncated for res in results)),
    }


def estimate_payoffs(policies, config, n_runs, seed=0, strategies=None, graph=None,
                     max_rounds=200, n_jobs=1, with_violations=False, antithetic=False):
    """Estimate the empirical payoff tensor by simulation.

    ``policies`` maps style name to an object with ``act(state)``, or is a
    pair of such mappings, one per seat (see :func:`seat_policies`). Profile
    ``(r, c)`` draws its games from the stream labeled ``sim/r/c`` under
    ``seed``, so results do not depend on profile order or on ``n_jobs``.

    ``antithetic=True`` plays every run as a mirrored pair of games sharing one
    random stream (see :func:`play_game`), which cancels seat-role noise; the
    pair mean counts as one run.

    With ``with_violations=True`` the return value is ``(tensor, stats)`` where
    ``stats`` maps each profile to the :func:`violation_stats` summary of the
    very games that produced its payoffs.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be at least 1")
    seats = seat_policies(policies)
    strategies = list(seats[0]) if strategies is None else list(strategies)
    missing = sorted({s for seat in seats for s in strategies if s not in seat})
    if missing:
        raise KeyError(f"no policy for styles {missing}")
    graph = generate_grid(config) if graph is None else graph
    profiles = [(r, c) for r in strategies for c in strategies]

    def job(profile):
        r, c = profile
        pay, results = _simulate_profile(graph, config, (seats[0][r], seats[1][c]), n_runs,
                                         seed, f"sim/{r}/{c}", max_rounds, antithetic)
        return pay, (_violation_summary(graph, results) if with_violations else None)

    if n_jobs == 1:
        outs = [job(p) for p in profiles]
    else:
        from joblib import Parallel, delayed

        outs = Parallel(n_jobs=n_jobs)(delayed(job)(p) for p in profiles)
    stats = dict(zip(profiles, (v for _, v in outs)))
    outs = [pay for pay, _ in outs]
    n = len(strategies)
    means = np.array([o.mean(axis=0) for o in outs]).reshape(n, n, 2)
    if n_runs > 1:
        se = np.array([o.std(axis=0, ddof=1) / np.sqrt(n_runs) for o in outs]).reshape(n, n, 2)
    else:
        se = np.zeros((n, n, 2))
    tensor = PayoffTensor(strategies, means[..., 0], means[..., 1],
                          np.full((n, n), n_runs), stderr=np.moveaxis(se, -1, 0))
    return (tensor, stats) if with_violations else tensor


def violation_stats(policies, profile, config, n_runs, seed=0, graph=None, max_rounds=200):
    """Mean fraction of colored adjacencies sharing a color at game end."""
    r, c = profile
    seats = seat_policies(policies)
    for seat, name in zip(seats, profile):
        if name not in seat:
            raise KeyError(f"no policy for style {name!r}")
    graph = generate_grid(config) if graph is None else graph
    _, results = _simulate_profile(graph, config, (seats[0][r], seats[1][c]), n_runs,
                                   seed, f"viol/{r}/{c}", max_rounds)
    return _violation_summary(graph, results)


# ---------------------------------------------------------------------------
# analysis


def pure_nash(tensor):
    """Profiles where neither seat gains by a unilateral deviation (weak inequalities)."""
    p1, p2 = tensor.p1, tensor.p2
    best_row = p1 >= p1.max(axis=0, keepdims=True)
    best_col = p2 >= p2.max(axis=1, keepdims=True)
    return [(tensor.row_strategies[i], tensor.col_strategies[j])
            for i, j in zip(*np.nonzero(best_row & best_col))]


def aggregate(tensors):
    """Cell-wise mean of congruent tensors; run counts add up."""
    tensors = list(tensors)
    if not tensors:
        raise ValueError("nothing to aggregate")
    first = tensors[0]
    for t in tensors[1:]:
        for attr in ("row_strategies", "col_strategies"):
            a, b = getattr(first, attr), getattr(t, attr)
            if a != b:
                diff = sorted(set(a) ^ set(b))
                detail = f"symmetric difference {diff}" if diff else f"order {a} vs {b}"
                raise ValueError(f"cannot aggregate tensors with different {attr}: {detail}")
    p1 = np.mean([t.p1 for t in tensors], axis=0)
    p2 = np.mean([t.p2 for t in tensors], axis=0)
    runs = np.sum([t.runs for t in tensors], axis=0)
    return PayoffTensor(first.row_strategies, p1, p2, runs, first.col_strategies)
