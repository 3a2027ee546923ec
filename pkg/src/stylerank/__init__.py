"""Rank styles of play in a two-player graph-coloring game with alpha-Rank.

The pipeline: train one policy per style (:mod:`stylerank.learner`), estimate
the empirical payoff matrix by simulation (:mod:`stylerank.egta`), then rank
strategy profiles by their stationary mass under alpha-Rank
(:mod:`stylerank.alpharank`).
"""

from .alpharank import (
    AlphaRank,
    RankResult,
    ResponseGraph,
    alpha_grid,
    alpha_sweep,
    fixation_probability,
    rank_profiles,
    response_graph,
    stationary_distribution,
    transition_matrix,
)
from .config import PipelineConfig, RankConfig
from .egta import PayoffTensor, aggregate, estimate_payoffs, pure_nash, violation_stats
from .files import fixture_path
from .game import BlockGraph, ConfigError, GameState, GridConfig, generate_grid, init_state, step
from .learner import DQNAgent, Hyperparams, train_policy
from .styles import StyleSpec, style_catalog

__version__ = "0.1.0"

__all__ = [
    "AlphaRank", "BlockGraph", "ConfigError", "DQNAgent", "GameState", "GridConfig",
    "Hyperparams", "PayoffTensor", "PipelineConfig", "RankConfig", "RankResult",
    "ResponseGraph", "StyleSpec", "aggregate", "alpha_grid", "alpha_sweep",
    "estimate_payoffs", "fixation_probability", "fixture_path", "generate_grid",
    "init_state", "pure_nash", "rank_profiles", "response_graph",
    "stationary_distribution", "step", "style_catalog", "train_policy",
    "transition_matrix", "violation_stats",
]
