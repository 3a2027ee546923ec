"""alpha-Rank evaluation of strategy profiles.

Each population sits at a monomorphic strategy; a mutant strategy in one
population fixates with the finite-population probability ``rho`` driven by
its payoff advantage, and these unilateral moves define a Markov chain over
profiles. Profiles are ranked by the chain's stationary distribution.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

NEUTRAL_TOL = 1e-12


def fixation_probability(f_mutant, f_resident, alpha, m):
    """Probability that a single mutant takes over a population of size ``m``.

    ``(1 - exp(-alpha*df)) / (1 - exp(-alpha*m*df))`` with ``df = f_mutant -
    f_resident``, equal to ``1/m`` when ``|df| < 1e-12``. Evaluated in log space
    for strongly disadvantaged mutants so large ``alpha*m*|df|`` cannot overflow.
    Accepts scalars or arrays.
    """
    df = np.asarray(f_mutant, dtype=float) - np.asarray(f_resident, dtype=float)
    if not np.all(np.isfinite(df)) or not math.isfinite(alpha):
        raise ValueError("fixation probability needs finite fitness values and alpha")
    if alpha <= 0 or m < 2:
        raise ValueError("need alpha > 0 and m >= 2")
    out = _rho(df, float(alpha), int(m))
    return float(out) if out.ndim == 0 else out


def _rho(df, alpha, m):
    df = np.asarray(df, dtype=float)
    u = alpha * df
    out = np.full(df.shape, 1.0 / m)
    pos = df >= NEUTRAL_TOL
    neg = df <= -NEUTRAL_TOL
    # advantaged mutant: both expm1 terms are bounded
    out[pos] = np.expm1(-u[pos]) / np.expm1(-m * u[pos])
    # disadvantaged mutant: rho = exp(-(m-1)|u|) * (1 - e^-|u|) / (1 - e^-m|u|)
    a = -u[neg]
    out[neg] = np.exp(-(m - 1) * a + np.log(-np.expm1(-a)) - np.log(-np.expm1(-m * a)))
    return out


# ---------------------------------------------------------------------------
# chain construction


@dataclass
class _Deviations:
    """Every unilateral move between profiles, with the mover's payoff gain."""

    labels: list
    src: np.ndarray
    dst: np.ndarray
    population: np.ndarray
    gain: np.ndarray
    eta: float

    @property
    def n_states(self):
        return len(self.labels)


def _as_tables(payoffs):
    if hasattr(payoffs, "payoff_tables"):
        tables = [np.asarray(t, dtype=float) for t in payoffs.payoff_tables()]
        names = [payoffs.row_strategies, payoffs.col_strategies]
    else:
        tables = [np.asarray(t, dtype=float) for t in payoffs]
        names = [[str(i) for i in range(n)] for n in tables[0].shape]
    shape = tables[0].shape
    if any(t.shape != shape for t in tables):
        raise ValueError("payoff tables must share one shape")
    for t in tables:
        if not np.all(np.isfinite(t)):
            raise ValueError("payoff tables must be complete and finite")
    return tables, names


def _deviations(payoffs, populations="multi"):
    tables, names = _as_tables(payoffs)
    if populations == "single":
        # symmetric game, one population: fitness of r against residents s is P(r, s)
        p = tables[0]
        n = p.shape[0]
        if p.shape != (n, n):
            raise ValueError("single-population ranking needs a square table")
        src, dst = np.nonzero(~np.eye(n, dtype=bool))
        gain = p[dst, src] - p[src, src]
        eta = 1.0 / (n - 1) if n > 1 else 1.0
        return _Deviations(list(names[0]), src, dst, np.zeros_like(src), gain, eta)
    if populations != "multi":
        raise ValueError("populations must be 'multi' or 'single'")
    if len(tables) != tables[0].ndim:
        raise ValueError("need one payoff table per population")
    shape = tables[0].shape
    profiles = np.array(list(np.ndindex(shape)), dtype=int).reshape(-1, len(shape))
    src_idx = np.arange(len(profiles))
    srcs, dsts, pops, gains = [], [], [], []
    for k, n_k in enumerate(shape):
        for t in range(n_k):
            moved = profiles.copy()
            moved[:, k] = t
            mask = profiles[:, k] != t
            d = np.ravel_multi_index(moved[mask].T, shape)
            s = src_idx[mask]
            srcs.append(s)
            dsts.append(d)
            pops.append(np.full(len(s), k))
            flat = tables[k].ravel()
            gains.append(flat[d] - flat[s])
    total = sum(n - 1 for n in shape)
    labels = ["(" + ",".join(names[k][i] for k, i in enumerate(p)) + ")" for p in profiles]
    return _Deviations(labels, np.concatenate(srcs), np.concatenate(dsts),
                       np.concatenate(pops), np.concatenate(gains),
                       1.0 / total if total else 1.0)


@dataclass
class TransitionMatrix:
    C: np.ndarray
    eta: float
    rho: np.ndarray
    labels: list


def _build(dev, alpha, m):
    n = dev.n_states
    rho = np.zeros((n, n))
    rho[dev.src, dev.dst] = _rho(dev.gain, alpha, m)
    C = dev.eta * rho
    off = C.sum(axis=1)
    if np.any(off > 1.0 + 1e-12):
        raise AssertionError("off-diagonal mass exceeds 1; eta is inconsistent with the chain")
    C[np.diag_indices(n)] = 1.0 - off
    return TransitionMatrix(C, dev.eta, rho, dev.labels)


def transition_matrix(payoffs, alpha, m=100, populations="multi"):
    """Row-stochastic profile transition matrix.

    ``payoffs`` is a :class:`~stylerank.egta.PayoffTensor` or a list of K
    arrays of identical K-dimensional shape (one per population).
    """
    if not alpha > 0 or m < 2:
        raise ValueError("need alpha > 0 and m >= 2")
    return _build(_deviations(payoffs, populations), float(alpha), int(m))


# ---------------------------------------------------------------------------
# stationary distribution


def _solve_augmented(C):
    n = C.shape[0]
    A = (C - np.eye(n)).T
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        return np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        return None


def _solve_gth(C):
    """Grassmann-Taksar-Heyman elimination; None if a pivot vanishes.

    Subtraction-free, so transition probabilities far below machine epsilon
    relative to 1 still shape the answer. A vanishing pivot means the chain
    is reducible under the elimination order.
    """
    A = np.array(C, dtype=float)
    n = A.shape[0]
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n - 1, 0, -1):
            s = A[k, :k].sum()
            if not s > 0.0:
                return None
            A[:k, k] /= s
            A[:k, :k] += np.outer(A[:k, k], A[k, :k])
        pi = np.zeros(n)
        pi[0] = 1.0
        for k in range(1, n):
            pi[k] = pi[:k] @ A[:k, k]
            if pi[k] > 1e100:
                pi[:k + 1] /= pi[k]
    if not np.all(np.isfinite(pi)):
        return None
    return pi / pi.sum()


def stationary_residual(pi, C):
    return float(np.abs(pi @ C - pi).max())


def stationary_distribution(C, damping=1e-8, tol=1e-12, max_iter=100_000, max_cond=1e8):
    """Stationary distribution of the row-stochastic matrix ``C``.

    Solves ``pi (C - I) = 0`` with one equation replaced by ``sum(pi) = 1``.
    When that system is ill-conditioned (condition number above ``max_cond``,
    typical at large alpha where some moves have probabilities like 1e-100)
    the same system is solved by GTH elimination instead, which stays accurate
    there. If the chain is reducible (the system is singular, or GTH meets a
    zero pivot) it is mixed with the uniform chain at weight ``damping``,
    solved the same way and refined by power iteration to ``tol``.

    Returns ``(pi, residual, method)`` with ``method`` one of ``"solve"``,
    ``"gth"`` or ``"damped"``; ``residual = max|pi C - pi|`` is measured on the
    undamped ``C``.
    """
    C = np.asarray(C, dtype=float)
    n = C.shape[0]
    A = (C - np.eye(n)).T
    A[-1, :] = 1.0
    if np.linalg.cond(A) < max_cond:
        pi = _solve_augmented(C)
        if pi is not None and np.all(np.isfinite(pi)) and pi.min() > -1e-12:
            pi = np.clip(pi, 0.0, None)
            pi /= pi.sum()
            res = stationary_residual(pi, C)
            if res < 1e-10:
                return pi, res, "solve"
    pi = _solve_gth(C)
    if pi is not None and np.all(np.isfinite(pi)):
        res = stationary_residual(pi, C)
        if res < 1e-10:
            return pi, res, "gth"
    Cd = (1.0 - damping) * C + damping / n
    pi = _solve_augmented(Cd)
    if pi is None or not np.all(np.isfinite(pi)) or pi.min() < -1e-12:
        pi = np.full(n, 1.0 / n)
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    for _ in range(max_iter):
        nxt = pi @ Cd
        nxt /= nxt.sum()
        done = np.abs(nxt - pi).max() < tol
        pi = nxt
        if done:
            break
    return pi, stationary_residual(pi, C), "damped"


# ---------------------------------------------------------------------------
# ranking


@dataclass
class RankResult:
    labels: list
    pi: np.ndarray
    C: np.ndarray
    rho: np.ndarray
    eta: float
    alpha: float
    m: int
    residual: float
    method: str
    ranking: list = field(default_factory=list)
    # (src, dst, population) for every unilateral move
    moves: tuple = ()

    def mass(self, label):
        return float(self.pi[self.labels.index(label)])

    def top(self, k):
        return self.ranking[:k]

    def rho_map(self):
        src, dst, _ = self.moves
        return {(self.labels[s], self.labels[d]): float(self.rho[s, d]) for s, d in zip(src, dst)}


def _ranking(labels, pi):
    # masses equal to 12 decimals count as ties and fall back to name order
    order = sorted(range(len(labels)), key=lambda i: (-round(float(pi[i]), 12), labels[i]))
    return [(labels[i], float(pi[i])) for i in order]


class AlphaRank(BaseEstimator):
    """alpha-Rank as an estimator.

    Parameters
    ----------
    alpha : float
        Selection intensity, > 0.
    m : int
        Population size, >= 2.
    populations : {"multi", "single"}
        ``"multi"``: one population per player (profiles are tuples).
        ``"single"``: a symmetric game ranked over single strategies using the
        row player's payoffs.
    damping : float
        Weight of the uniform chain used only when the chain is reducible.

    Attributes
    ----------
    result_ : RankResult
    pi_ : ndarray
        Stationary mass per profile, in ``labels_`` order.
    ranking_ : list of (label, mass)
        Profiles by descending mass; near-ties broken by label.
    """

    def __init__(self, alpha=2.0, m=100, populations="multi", damping=1e-8):
        self.alpha = alpha
        self.m = m
        self.populations = populations
        self.damping = damping

    def _validate(self):
        if not (isinstance(self.alpha, (int, float)) and math.isfinite(self.alpha) and self.alpha > 0):
            raise ValueError(f"alpha must be a positive finite number, got {self.alpha!r}")
        if int(self.m) != self.m or self.m < 2:
            raise ValueError(f"m must be an integer >= 2, got {self.m!r}")

    def fit(self, X, y=None):
        self._validate()
        dev = _deviations(X, self.populations)
        self.result_ = _rank_with(dev, float(self.alpha), int(self.m), self.damping)
        self.labels_ = self.result_.labels
        self.pi_ = self.result_.pi
        self.ranking_ = self.result_.ranking
        return self

    def response_graph(self, edge_threshold=1.0):
        check_is_fitted(self, "result_")
        return response_graph(self.result_, edge_threshold)


def _rank_with(dev, alpha, m, damping):
    if dev.n_states == 1:
        one = np.ones((1, 1))
        return RankResult(dev.labels, np.ones(1), one, np.zeros((1, 1)), dev.eta, alpha, m,
                          0.0, "trivial", [(dev.labels[0], 1.0)], (dev.src, dev.dst, dev.population))
    tm = _build(dev, alpha, m)
    pi, res, method = stationary_distribution(tm.C, damping)
    return RankResult(dev.labels, pi, tm.C, tm.rho, tm.eta, alpha, m, res, method,
                      _ranking(dev.labels, pi), (dev.src, dev.dst, dev.population))


def rank_profiles(payoffs, alpha=2.0, m=100, populations="multi", damping=1e-8):
    return AlphaRank(alpha, m, populations, damping).fit(payoffs).result_


def alpha_grid(start=0.1, end=10.0, step=0.01):
    """Inclusive arithmetic grid, rounded to suppress float drift."""
    if step <= 0 or end < start:
        raise ValueError("alpha grid needs step > 0 and end >= start")
    n = int(round((end - start) / step)) + 1
    return np.round(start + step * np.arange(n), 10)


def alpha_sweep(payoffs, alphas, m=100, populations="multi", damping=1e-8):
    """Rank at every alpha.

    Returns ``(records, results, failures)``: long-format
    ``(alpha, label, mass)`` records, the RankResult per alpha, and
    ``(alpha, message)`` for grid points that could not be ranked.
    """
    alphas = list(alphas)
    if not alphas:
        raise ValueError("empty alpha grid")
    dev = _deviations(payoffs, populations)
    records, results, failures = [], [], []
    for a in alphas:
        try:
            if not a > 0:
                raise ValueError(f"alpha must be positive, got {a}")
            res = _rank_with(dev, float(a), int(m), damping)
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            failures.append((float(a), str(exc)))
            continue
        results.append(res)
        records.extend((float(a), lab, float(p)) for lab, p in zip(res.labels, res.pi))
    return records, results, failures


# ---------------------------------------------------------------------------
# response graph


def strongly_connected_components(n, successors):
    """Tarjan's algorithm, iterative. ``successors[v]`` lists out-neighbors of ``v``."""
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack, comps = [], []
    counter = 0
    for root in range(n):
        if index[root] >= 0:
            continue
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, i = work[-1]
            succ = successors[v]
            if i < len(succ):
                work[-1] = (v, i + 1)
                w = succ[i]
                if index[w] < 0:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, 0))
                elif on_stack[w]:
                    low[v] = min(low[v], index[w])
                continue
            work.pop()
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
            if low[v] == index[v]:
                comp = set()
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.add(w)
                    if w == v:
                        break
                comps.append(comp)
    return comps


def sink_components(n, successors):
    """Strongly connected components with no edge leaving them."""
    comps = strongly_connected_components(n, successors)
    where = {}
    for ci, comp in enumerate(comps):
        for v in comp:
            where[v] = ci
    return [comp for ci, comp in enumerate(comps)
            if all(where[w] == ci for v in comp for w in successors[v])]


@dataclass
class ResponseGraph:
    labels: list
    mass: np.ndarray
    # (src, dst, population, rho / rho_m)
    edges: list
    mcc_members: set
    alpha: float
    m: int
    edge_threshold: float

    def successors(self, label):
        i = self.labels.index(label)
        return [self.labels[d] for s, d, _, _ in self.edges if s == i]

    def to_dict(self):
        return {
            "alpha": self.alpha,
            "m": self.m,
            "edge_threshold": self.edge_threshold,
            "nodes": [{"profile": lab, "mass": float(self.mass[i]), "mcc": i in self.mcc_members}
                      for i, lab in enumerate(self.labels)],
            "edges": [{"source": self.labels[s], "target": self.labels[d],
                       "population": int(k), "rho_ratio": float(w)}
                      for s, d, k, w in self.edges],
            "mcc_members": sorted(self.labels[i] for i in self.mcc_members),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_dot(self, min_mass=0.0):
        """Graphviz digraph: fill saturation tracks mass, edge labels carry rho/rho_m."""
        keep = {i for i, p in enumerate(self.mass) if p >= min_mass} | set(self.mcc_members)
        top = max(float(self.mass.max()), 1e-300)
        wmax = max((w for *_, w in self.edges), default=1.0)
        lines = [
            "digraph response_graph {",
            f'  graph [label="alpha={self.alpha:g}, m={self.m}", rankdir=LR];',
            '  node [shape=box, style="filled,rounded", fontname="Helvetica"];',
        ]
        for i in sorted(keep):
            sat = float(self.mass[i]) / top
            border = ", penwidth=2" if i in self.mcc_members else ""
            lines.append(
                f'  "{self.labels[i]}" [label="{self.labels[i]}\\n{self.mass[i]:.2f}", '
                f'fillcolor="0.600 {sat:.3f} 1.000"{border}];'
            )
        for s, d, _, w in self.edges:
            if s in keep and d in keep:
                width = 0.5 + 2.5 * w / wmax
                lines.append(
                    f'  "{self.labels[s]}" -> "{self.labels[d]}" [label="{w:.2g}", penwidth={width:.2f}];'
                )
        lines.append("}")
        return "\n".join(lines) + "\n"


def response_graph(result, edge_threshold=1.0):
    """Digraph of unilateral moves whose ``rho / rho_m`` exceeds ``edge_threshold``.

    ``rho_m = 1/m`` is the neutral fixation probability, so the default keeps
    moves that fixate better than neutral drift. MCC members are the union of
    the sink strongly connected components.
    """
    src, dst, pop = result.moves
    ratio = result.rho[src, dst] * result.m
    keep = ratio > edge_threshold
    n = len(result.labels)
    succ = [[] for _ in range(n)]
    edges = []
    for s, d, k, w in zip(src[keep], dst[keep], pop[keep], ratio[keep]):
        succ[s].append(int(d))
        edges.append((int(s), int(d), int(k), float(w)))
    members = set().union(*sink_components(n, succ))
    return ResponseGraph(result.labels, result.pi, edges, members, result.alpha, result.m,
                         edge_threshold)
