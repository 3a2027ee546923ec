"""Pipeline configuration files.

A YAML document with these top-level keys (all optional except where noted)::

    seed: 7                      # master seed; every random stream derives from it
    out: runs/default            # output directory
    grid:                        # GridConfig fields, or an explicit layout
      rows: 4
      cols: 5
      num_blocks: 10
      num_colors: 10
      hidden_fraction: 0.3
      seed: 0
      layout: ["0 0 1 2 2", ...] # optional; one line of block ids per grid row
    styles: [I, C, W, {name: X, tone: 0.3, difficulty: 0, approach: -0.5}]
    hyperparams: {episodes: 2000, gamma: 0.7, ...}
    egta: {runs: 5000, max_rounds: 200, independent_seats: false, antithetic: false}
    rank: {alpha: 2.0, m: 100, alpha_grid: "0.1:10:0.01", edge_threshold: 1.0}
"""

import hashlib
import json
from dataclasses import dataclass, field, replace

import yaml

from ._seeding import derive_seed
from .game import ConfigError, GridConfig
from .learner import Hyperparams
from .styles import resolve_styles, style_catalog


def parse_grid_spec(text):
    """``"START:END:STEP"`` -> (start, end, step)."""
    try:
        start, end, step = (float(v) for v in str(text).split(":"))
    except ValueError:
        raise ConfigError(f"alpha grid must look like START:END:STEP, got {text!r}") from None
    if step <= 0 or end < start:
        raise ConfigError(f"alpha grid {text!r} needs step > 0 and END >= START")
    return start, end, step


@dataclass(frozen=True)
class RankConfig:
    alpha: float = 2.0
    m: int = 100
    alpha_grid: tuple = (0.1, 10.0, 0.01)
    edge_threshold: float = 1.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha!r}")
        if int(self.m) != self.m or self.m < 2:
            raise ConfigError(f"population size m must be an integer >= 2, got {self.m!r}")
        grid = self.alpha_grid
        if isinstance(grid, str):
            grid = parse_grid_spec(grid)
        grid = tuple(float(v) for v in grid)
        if len(grid) != 3 or grid[0] <= 0:
            raise ConfigError("alpha grid values must be positive")
        object.__setattr__(self, "alpha_grid", grid)


@dataclass(frozen=True)
class PipelineConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    styles: tuple = field(default_factory=lambda: tuple(style_catalog()))
    hyperparams: Hyperparams = field(default_factory=Hyperparams)
    runs: int = 5000
    max_rounds: int = 200
    independent_seats: bool = False
    antithetic: bool = False
    seed: int = 0
    rank: RankConfig = field(default_factory=RankConfig)
    out: str = "runs/default"

    def __post_init__(self):
        if self.runs < 1:
            raise ConfigError("egta runs must be at least 1")
        if self.seed is None:
            raise ConfigError("a master seed is required")

    @property
    def style_names(self):
        return [s.name for s in self.styles]

    def style(self, name):
        for s in self.styles:
            if s.name == name:
                return s
        raise ConfigError(f"style {name!r} is not configured")

    def train_seed(self, style, seat=None):
        """Seed for training ``style`` (per seat when seats train independently)."""
        label = f"train/{style}" if seat is None else f"train/{style}/seat{seat}"
        return derive_seed(self.seed, label)

    def with_overrides(self, **kw):
        rank_keys = {"alpha", "m", "alpha_grid", "edge_threshold"}
        rank_kw = {k: v for k, v in kw.items() if k in rank_keys and v is not None}
        top = {k: v for k, v in kw.items() if k not in rank_keys and v is not None}
        cfg = replace(self, **top) if top else self
        return replace(cfg, rank=replace(cfg.rank, **rank_kw)) if rank_kw else cfg

    def to_dict(self):
        return {
            "seed": self.seed,
            "out": self.out,
            "grid": self.grid.to_dict(),
            "styles": [{"name": s.name, "tone": s.tone, "difficulty": s.difficulty,
                        "approach": s.approach} for s in self.styles],
            "hyperparams": self.hyperparams.to_dict(),
            "egta": {"runs": self.runs, "max_rounds": self.max_rounds,
                     "independent_seats": self.independent_seats,
                     "antithetic": self.antithetic},
            "rank": {"alpha": self.rank.alpha, "m": self.rank.m,
                     "alpha_grid": list(self.rank.alpha_grid),
                     "edge_threshold": self.rank.edge_threshold},
        }

    def fingerprint(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        known = {"seed", "out", "grid", "styles", "hyperparams", "egta", "rank"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kw = {}
        if "grid" in d:
            kw["grid"] = GridConfig.from_dict(d["grid"])
        if "styles" in d:
            kw["styles"] = tuple(resolve_styles(d["styles"]))
        if "hyperparams" in d:
            try:
                kw["hyperparams"] = Hyperparams.from_dict(d["hyperparams"])
            except (TypeError, ValueError) as exc:
                raise ConfigError(str(exc)) from None
        egta = dict(d.get("egta") or {})
        for key in ("runs", "max_rounds", "independent_seats", "antithetic"):
            if key in egta:
                kw[key] = egta.pop(key)
        if egta:
            raise ConfigError(f"unknown egta keys: {sorted(egta)}")
        if "rank" in d:
            try:
                kw["rank"] = RankConfig(**d["rank"])
            except TypeError as exc:
                raise ConfigError(str(exc)) from None
        for key in ("seed", "out"):
            if key in d:
                kw[key] = d[key]
        return cls(**kw)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(yaml.safe_load(fh))

    def dump(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

