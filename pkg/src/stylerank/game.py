"""Stochastic two-player graph-coloring game.

The board is a ``rows x cols`` grid whose cells are merged into connected
blocks; blocks are the vertices of the coloring graph and 4-adjacency between
cells of different blocks gives its edges. Every block carries one status from
``CR* = CR + {hidden, white}``. Hidden blocks hold an environment color that is
revealed at random over the course of the game.

Colors are the integers ``0 .. num_colors - 1``; :data:`WHITE` and
:data:`HIDDEN` are negative sentinels.
"""

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ._seeding import as_rng

WHITE = -1
HIDDEN = -2

GAIN = 1.0
PENALTY = -2.0
SANCTION = -10.0
DELAY = -1.0


class ConfigError(ValueError):
    """Raised for an invalid or inconsistent game configuration."""


@dataclass(frozen=True)
class GridConfig:
    rows: int = 4
    cols: int = 5
    num_blocks: int = 10
    num_colors: int = 10
    hidden_fraction: float = 0.3
    seed: int = 0
    # Optional explicit board: one row of block ids per grid row.
    layout: tuple = None

    def __post_init__(self):
        for name in ("rows", "cols", "num_blocks", "num_colors"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if self.num_blocks > self.rows * self.cols:
            raise ConfigError(
                f"cannot split a {self.rows}x{self.cols} grid into {self.num_blocks} blocks"
            )
        if not 0.0 <= self.hidden_fraction <= 1.0:
            raise ConfigError(f"hidden_fraction must lie in [0, 1], got {self.hidden_fraction!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if self.layout is not None:
            layout = tuple(tuple(int(v) for v in row) for row in self.layout)
            object.__setattr__(self, "layout", layout)
            if len(layout) != self.rows or any(len(row) != self.cols for row in layout):
                raise ConfigError(f"layout must be {self.rows}x{self.cols}")
            ids = sorted({v for row in layout for v in row})
            if ids != list(range(self.num_blocks)):
                raise ConfigError(
                    f"layout must use block ids 0..{self.num_blocks - 1}, got {ids}"
                )

    @property
    def num_hidden(self):
        return math.floor(self.hidden_fraction * self.num_blocks + 1e-9)

    def to_dict(self):
        d = asdict(self)
        if self.layout is None:
            del d["layout"]
        else:
            d["layout"] = [" ".join(str(v) for v in row) for row in self.layout]
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(f"unknown grid keys: {sorted(unknown)}")
        layout = d.get("layout")
        if layout is not None:
            d["layout"] = tuple(
                tuple(int(v) for v in (row.split() if isinstance(row, str) else row))
                for row in layout
            )
            d.setdefault("rows", len(d["layout"]))
            d.setdefault("cols", len(d["layout"][0]))
            d.setdefault("num_blocks", len({v for row in d["layout"] for v in row}))
        return cls(**d)


class BlockGraph:
    """Blocks of grid cells and their adjacency.

    Attributes
    ----------
    blocks : tuple of tuple of (row, col)
        Cells of each block, sorted.
    neighbors : tuple of tuple of int
        Sorted adjacent block indices per block.
    """

    def __init__(self, cell_block):
        cell_block = np.asarray(cell_block, dtype=int)
        if cell_block.ndim != 2:
            raise ConfigError("cell layout must be two-dimensional")
        self.cell_block = cell_block
        rows, cols = cell_block.shape
        n = int(cell_block.max()) + 1
        cells = [[] for _ in range(n)]
        adj = [set() for _ in range(n)]
        for r in range(rows):
            for c in range(cols):
                b = cell_block[r, c]
                if b < 0:
                    continue
                cells[b].append((r, c))
                for rr, cc in ((r + 1, c), (r, c + 1)):
                    if rr < rows and cc < cols:
                        o = cell_block[rr, cc]
                        if o >= 0 and o != b:
                            adj[b].add(o)
                            adj[o].add(b)
        if any(not c for c in cells):
            raise ConfigError("every block id must own at least one cell")
        for b, own in enumerate(cells):
            if not _connected(own):
                raise ConfigError(f"block {b} is not 4-connected")
        self.blocks = tuple(tuple(sorted(c)) for c in cells)
        self.neighbors = tuple(tuple(sorted(a)) for a in adj)
        self.degree = tuple(len(a) for a in self.neighbors)
        self.max_degree = max(self.degree)

    @property
    def num_blocks(self):
        return len(self.blocks)

    @property
    def shape(self):
        return self.cell_block.shape

    def adjacency_matrix(self):
        n = self.num_blocks
        a = np.zeros((n, n), dtype=bool)
        for i, nbrs in enumerate(self.neighbors):
            a[i, list(nbrs)] = True
        return a

    def edges(self):
        return [(i, j) for i, nbrs in enumerate(self.neighbors) for j in nbrs if i < j]

    def __eq__(self, other):
        return isinstance(other, BlockGraph) and np.array_equal(self.cell_block, other.cell_block)

    def __repr__(self):
        return f"BlockGraph(num_blocks={self.num_blocks}, shape={self.shape})"

    def dumps(self):
        """Canonical text dump: grid layout, block cells, adjacency lists."""
        rows, cols = self.shape
        lines = [f"grid {rows} {cols}"]
        lines += [" ".join(str(v) for v in row) for row in self.cell_block]
        for b, cells in enumerate(self.blocks):
            lines.append(f"block {b}: " + " ".join(f"{r},{c}" for r, c in cells))
        for b, nbrs in enumerate(self.neighbors):
            lines.append(f"adjacent {b}: " + " ".join(str(j) for j in nbrs))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text):
        lines = [ln for ln in text.splitlines() if ln.strip()]
        head = lines[0].split()
        if head[0] != "grid":
            raise ConfigError("block graph dump must start with 'grid ROWS COLS'")
        rows, cols = int(head[1]), int(head[2])
        layout = [[int(v) for v in ln.split()] for ln in lines[1:rows + 1]]
        graph = cls(layout)
        for ln in lines[rows + 1:]:
            tag, rest = ln.split(":", 1)
            kind, idx = tag.split()
            if kind == "adjacent":
                listed = tuple(int(v) for v in rest.split())
                if listed != graph.neighbors[int(idx)]:
                    raise ConfigError(f"adjacency of block {idx} disagrees with layout")
        return graph


def _connected(cells):
    cells = set(cells)
    todo = [next(iter(cells))]
    seen = set(todo)
    while todo:
        r, c = todo.pop()
        for nb in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if nb in cells and nb not in seen:
                seen.add(nb)
                todo.append(nb)
    return len(seen) == len(cells)


def generate_grid(config, rng=None):
    """Build the board for ``config``.

    With an explicit ``config.layout`` the layout is used verbatim. Otherwise
    ``num_blocks`` seed cells are drawn uniformly and blocks grow by uniform
    random accretion of 4-adjacent unassigned cells until the grid is covered,
    which keeps every block connected. ``rng`` defaults to ``config.seed``.
    """
    if config.layout is not None:
        return BlockGraph(config.layout)
    rng = as_rng(config.seed if rng is None else rng)
    rows, cols = config.rows, config.cols
    owner = np.full((rows, cols), -1, dtype=int)
    seeds = rng.choice(rows * cols, size=config.num_blocks, replace=False)
    for b, flat in enumerate(seeds):
        owner[divmod(int(flat), cols)] = b
    unassigned = rows * cols - config.num_blocks
    while unassigned:
        frontier = []
        for r in range(rows):
            for c in range(cols):
                if owner[r, c] >= 0:
                    continue
                for rr, cc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                    if 0 <= rr < rows and 0 <= cc < cols and owner[rr, cc] >= 0:
                        frontier.append((owner[rr, cc], r, c))
        b, r, c = frontier[rng.integers(len(frontier))]
        owner[r, c] = b
        unassigned -= 1
    return BlockGraph(owner)


@dataclass(frozen=True)
class GameState:
    colors: tuple
    # block -> environment color for every block that is still hidden
    hidden_palette: dict = field(default_factory=dict)

    def __post_init__(self):
        hidden = {b for b, s in enumerate(self.colors) if s == HIDDEN}
        if hidden != set(self.hidden_palette):
            raise ValueError("hidden_palette must cover exactly the hidden blocks")

    @property
    def white_blocks(self):
        return [b for b, s in enumerate(self.colors) if s == WHITE]

    @property
    def hidden_blocks(self):
        return [b for b, s in enumerate(self.colors) if s == HIDDEN]

    def is_idle(self):
        """No block is paintable but hidden blocks remain."""
        return WHITE not in self.colors and HIDDEN in self.colors


@dataclass
class PlayerEvents:
    gains: int = 0
    penalties: int = 0
    sanctioned: bool = False
    delayed: bool = False
    # player that painted a contested block, if this player was in a collision
    painter: int = None

    @property
    def reward(self):
        return (GAIN * self.gains + PENALTY * self.penalties
                + SANCTION * self.sanctioned + DELAY * self.delayed)


@dataclass
class StepOutcome:
    next_state: GameState
    base_reward: tuple
    events: tuple
    revealed: frozenset


def init_state(graph, config, rng=None):
    rng = as_rng(rng)
    n = graph.num_blocks
    k = math.floor(config.hidden_fraction * n + 1e-9)
    hidden = sorted(int(b) for b in rng.choice(n, size=k, replace=False))
    palette = {b: int(c) for b, c in zip(hidden, rng.integers(config.num_colors, size=k))}
    colors = [WHITE] * n
    for b in hidden:
        colors[b] = HIDDEN
    return GameState(tuple(colors), palette)


def reveal_phase(state, rng=None):
    """Reveal a uniform number of hidden blocks, chosen uniformly."""
    hidden = state.hidden_blocks
    if not hidden:
        return state, frozenset()
    rng = as_rng(rng)
    k = int(rng.integers(len(hidden) + 1))
    if k == 0:
        return state, frozenset()
    chosen = frozenset(int(b) for b in rng.choice(hidden, size=k, replace=False))
    colors = list(state.colors)
    palette = dict(state.hidden_palette)
    for b in chosen:
        colors[b] = palette.pop(b)
    return GameState(tuple(colors), palette), chosen


def is_terminal(state):
    return all(s >= 0 for s in state.colors)


def _paint(graph, colors, action, events, num_colors):
    b, c = action
    if not 0 <= b < len(colors) or c < 0 or (num_colors is not None and c >= num_colors):
        raise ValueError(f"action {action!r} outside B x CR")
    if colors[b] != WHITE:
        events.sanctioned = True
        return
    for j in graph.neighbors[b]:
        s = colors[j]
        if s == c:
            events.penalties += 1
        elif s >= 0:
            events.gains += 1
    colors[b] = c


def step(graph, state, joint, rng=None, *, num_colors=None, order=None):
    """Play one round.

    ``joint`` holds one ``(block, color)`` per player, or ``None`` for a player
    that does not act. Actions are resolved against ``state`` in ``order``
    (default: player 0 first), then the environment reveals hidden blocks,
    giving the state the players observe next round. When no block is white
    the round is idle: actions are ignored and only the reveal happens.
    """
    if is_terminal(state):
        raise ValueError("cannot step a terminal state")
    rng = as_rng(rng)
    k = len(joint)
    events = [PlayerEvents() for _ in range(k)]
    colors = list(state.colors)
    if WHITE in colors:
        active = [p for p in range(k) if joint[p] is not None]
        voided = set()
        if len(active) == 2 and joint[active[0]][0] == joint[active[1]][0]:
            painter = active[int(rng.integers(2))]
            for p in active:
                events[p].delayed = True
                events[p].painter = painter
            voided = {p for p in active if p != painter}
        for p in (order if order is not None else range(k)):
            if p in active and p not in voided:
                _paint(graph, colors, tuple(int(v) for v in joint[p]), events[p], num_colors)
    painted = GameState(tuple(colors), state.hidden_palette)
    next_state, revealed = reveal_phase(painted, rng)
    return StepOutcome(next_state, tuple(e.reward for e in events), tuple(events), revealed)


def count_violations(graph, state):
    """Return (same-color adjacencies, adjacencies with both ends colored)."""
    bad = total = 0
    for i, j in graph.edges():
        a, b = state.colors[i], state.colors[j]
        if a >= 0 and b >= 0:
            total += 1
            bad += a == b
    return bad, total


def legal_actions(state, num_colors):
    return [(b, c) for b in state.white_blocks for c in range(num_colors)]

