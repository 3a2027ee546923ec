"""Styles of play and the preference-adoption reward.

A style is a point in a three-dimensional preference space:

* ``tone``: warm (+) versus cool (-) colors,
* ``difficulty``: ambitious, high-degree blocks (+) versus lazy, low-degree
  blocks (-),
* ``approach``: extravagant, rarely used colors (+) versus minimalistic reuse
  of colors already on the board (-).
"""

from dataclasses import dataclass

from .game import ConfigError

PREFERENCE_WEIGHT = 0.7

# Fixed 10-color palette; the first half is warm, the second half cool.
PALETTE = (
    "red", "orange", "yellow", "magenta", "brown",
    "blue", "green", "cyan", "violet", "teal",
)

_LETTERS = {
    "W": ("tone", +1), "C": ("tone", -1),
    "A": ("difficulty", +1), "L": ("difficulty", -1),
    "E": ("approach", +1), "M": ("approach", -1),
}

CATALOG_NAMES = ("I", "C", "W", "E", "M", "L", "A", "AE", "CA", "LE", "WL")


@dataclass(frozen=True)
class StyleSpec:
    name: str
    tone: float = 0.0
    difficulty: float = 0.0
    approach: float = 0.0

    def __post_init__(self):
        for dim in ("tone", "difficulty", "approach"):
            if not -1.0 <= getattr(self, dim) <= 1.0:
                raise ConfigError(f"style {self.name}: {dim} must lie in [-1, 1]")

    @property
    def vector(self):
        return (self.tone, self.difficulty, self.approach)

    @classmethod
    def from_letters(cls, name, weight=PREFERENCE_WEIGHT):
        """Build a style from its letter code, e.g. ``"CA"`` = cool + ambitious."""
        dims = {"tone": 0.0, "difficulty": 0.0, "approach": 0.0}
        if name != "I":
            for letter in name:
                if letter not in _LETTERS:
                    raise ConfigError(f"unknown style letter {letter!r} in {name!r}")
                dim, sign = _LETTERS[letter]
                if dims[dim]:
                    raise ConfigError(f"style {name!r} sets {dim} twice")
                dims[dim] = sign * weight
        return cls(name, **dims)


def style_catalog():
    return [StyleSpec.from_letters(n) for n in CATALOG_NAMES]


def resolve_styles(entries):
    """Turn config entries (names or ``{name, tone, difficulty, approach}``) into specs."""
    catalog = {s.name: s for s in style_catalog()}
    out = []
    for entry in entries:
        if isinstance(entry, StyleSpec):
            out.append(entry)
        elif isinstance(entry, str):
            if entry not in catalog:
                raise ConfigError(f"unknown style {entry!r}; not in catalog and no weights given")
            out.append(catalog[entry])
        else:
            entry = dict(entry)
            try:
                out.append(StyleSpec(**entry))
            except TypeError as exc:
                raise ConfigError(f"bad style entry {entry!r}: {exc}") from None
    names = [s.name for s in out]
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate style names in {names}")
    return out


def is_warm(color, num_colors):
    return color < (num_colors + 1) // 2


def color_name(color):
    return PALETTE[color] if color < len(PALETTE) else f"color{color}"


def preference_reward(style, state, action, graph, num_colors):
    """Preference-adoption reward for taking ``action`` in ``state``.

    Each dimension contributes ``weight * signal`` with ``signal`` in [-1, 1]:
    the tone of the color, the block's degree relative to the busiest block,
    and how rare the color is among blocks already colored.
    """
    b, c = action
    if not 0 <= b < graph.num_blocks or not 0 <= c < num_colors:
        raise ValueError(f"action {action!r} outside B x CR")
    tone = 1.0 if is_warm(c, num_colors) else -1.0
    if graph.max_degree:
        difficulty = 2.0 * graph.degree[b] / graph.max_degree - 1.0
    else:
        difficulty = 0.0
    colored = [s for s in state.colors if s >= 0]
    freq = colored.count(c) / len(colored) if colored else 0.0
    approach = 1.0 - 2.0 * freq
    return style.tone * tone + style.difficulty * difficulty + style.approach * approach
