import numpy as np
import pytest

from stylerank.game import (
    DELAY,
    GAIN,
    HIDDEN,
    PENALTY,
    SANCTION,
    WHITE,
    BlockGraph,
    ConfigError,
    GameState,
    GridConfig,
    count_violations,
    generate_grid,
    init_state,
    is_terminal,
    legal_actions,
    reveal_phase,
    step,
)

# 0 0 1
# 2 2 1      block 0 touches 1 and 2, block 1 touches 0 and 2
LAYOUT = ((0, 0, 1), (2, 2, 1))


@pytest.fixture
def small():
    cfg = GridConfig(rows=2, cols=3, num_blocks=3, num_colors=3, hidden_fraction=0.0, layout=LAYOUT)
    return cfg, generate_grid(cfg)


def white(n):
    return GameState((WHITE,) * n, {})


def test_reward_constants():
    assert (GAIN, PENALTY, SANCTION, DELAY) == (1.0, -2.0, -10.0, -1.0)


def test_default_grid_is_connected_partition():
    cfg = GridConfig()
    g = generate_grid(cfg)
    assert g.num_blocks == 10 and g.shape == (4, 5)
    cells = sorted(c for block in g.blocks for c in block)
    assert cells == [(r, c) for r in range(4) for c in range(5)]
    a = g.adjacency_matrix()
    assert np.array_equal(a, a.T) and not a.diagonal().any()
    assert generate_grid(cfg) == g


def test_grid_seed_changes_board():
    boards = {generate_grid(GridConfig(seed=s)).dumps() for s in range(5)}
    assert len(boards) > 1


def test_explicit_layout(small):
    _, g = small
    assert g.neighbors == ((1, 2), (0, 2), (0, 1))
    assert g.degree == (2, 2, 2)
    assert g.edges() == [(0, 1), (0, 2), (1, 2)]


def test_disconnected_block_rejected():
    with pytest.raises(ConfigError, match="not 4-connected"):
        BlockGraph([[0, 1, 0]])


@pytest.mark.parametrize("kw", [
    {"num_blocks": 21}, {"hidden_fraction": 1.5}, {"num_colors": 0}, {"rows": 2.5},
    {"rows": 1, "cols": 2, "num_blocks": 2, "layout": ((0, 0),)},
])
def test_bad_config(kw):
    with pytest.raises(ConfigError):
        GridConfig(**kw)


def test_dump_roundtrip():
    g = generate_grid(GridConfig(seed=3))
    text = g.dumps()
    assert BlockGraph.loads(text) == g
    assert BlockGraph.loads(text).dumps() == text
    broken = text.replace("adjacent 0:", "adjacent 0: 9 ", 1)
    with pytest.raises(ConfigError):
        BlockGraph.loads(broken)


def test_config_dict_roundtrip():
    cfg = GridConfig(rows=2, cols=3, num_blocks=3, layout=LAYOUT)
    assert GridConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ConfigError, match="unknown grid keys"):
        GridConfig.from_dict({"rows": 2, "colour": 1})


def test_init_state_hides_floor_fraction():
    cfg = GridConfig()
    g = generate_grid(cfg)
    s = init_state(g, cfg, 0)
    assert len(s.hidden_blocks) == 3
    assert set(s.hidden_palette) == set(s.hidden_blocks)
    assert all(0 <= c < cfg.num_colors for c in s.hidden_palette.values())
    assert len(s.white_blocks) == 7


def test_gain_and_penalty(small):
    cfg, g = small
    s = GameState((1, WHITE, 1), {})
    out = step(g, s, [(1, 1)], num_colors=3)
    assert out.events[0].penalties == 2 and out.base_reward == (2 * PENALTY,)
    out = step(g, s, [(1, 0)], num_colors=3)
    assert out.events[0].gains == 2 and out.base_reward == (2 * GAIN,)
    assert is_terminal(out.next_state)


def test_white_neighbours_score_nothing(small):
    _, g = small
    out = step(g, white(3), [(0, 0)], num_colors=3)
    assert out.base_reward == (0.0,)


def test_sanction_on_colored_block(small):
    _, g = small
    s = GameState((2, WHITE, WHITE), {})
    out = step(g, s, [(0, 1)], num_colors=3)
    assert out.events[0].sanctioned and out.base_reward == (SANCTION,)
    assert out.next_state.colors == s.colors


def test_out_of_range_action_raises(small):
    _, g = small
    with pytest.raises(ValueError):
        step(g, white(3), [(0, 3)], num_colors=3)


def test_collision_delays_both_and_voids_one(small):
    _, g = small
    painters = set()
    for seed in range(40):
        out = step(g, GameState((1, WHITE, WHITE), {}), [(1, 0), (1, 2)], np.random.default_rng(seed),
                   num_colors=3)
        ev = out.events
        assert ev[0].delayed and ev[1].delayed and ev[0].painter == ev[1].painter
        p = ev[0].painter
        painters.add(p)
        expected_color = (0, 2)[p]
        assert out.next_state.colors[1] == expected_color
        # the painter scores its paint plus the delay; the other only the delay
        assert out.base_reward[1 - p] == DELAY
        assert out.base_reward[p] == DELAY + GAIN
    assert painters == {0, 1}


def test_application_order_matters(small):
    _, g = small
    # both paint color 0 on adjacent blocks 0 and 1; whoever goes second sees the other's paint
    first = step(g, white(3), [(0, 0), (1, 0)], num_colors=3, order=(0, 1))
    assert first.base_reward == (0.0, PENALTY)
    second = step(g, white(3), [(0, 0), (1, 0)], num_colors=3, order=(1, 0))
    assert second.base_reward == (PENALTY, 0.0)


def test_idle_round_only_reveals(small):
    _, g = small
    s = GameState((0, HIDDEN, 1), {1: 2})
    assert s.is_idle()
    out = step(g, s, [(0, 0)], np.random.default_rng(1), num_colors=3)
    assert out.base_reward == (0.0,) and not out.events[0].sanctioned


def test_step_on_terminal_raises(small):
    _, g = small
    with pytest.raises(ValueError):
        step(g, GameState((0, 1, 2), {}), [(0, 0)])


def test_hidden_palette_must_match():
    with pytest.raises(ValueError):
        GameState((HIDDEN, WHITE), {})


def test_reveal_count_is_uniform():
    s = GameState((HIDDEN,) * 3, {0: 1, 1: 2, 2: 3})
    rng = np.random.default_rng(0)
    counts = np.zeros(4)
    for _ in range(8000):
        nxt, revealed = reveal_phase(s, rng)
        counts[len(revealed)] += 1
        for b in revealed:
            assert nxt.colors[b] == s.hidden_palette[b]
    assert np.allclose(counts / counts.sum(), 0.25, atol=0.02)


def test_reveal_free_config_has_no_hidden(small):
    cfg, g = small
    s = init_state(g, cfg, 0)
    assert s.hidden_blocks == [] and reveal_phase(s, 0) == (s, frozenset())


def test_count_violations(small):
    _, g = small
    assert count_violations(g, GameState((0, 0, 1), {})) == (1, 3)
    assert count_violations(g, GameState((0, WHITE, 0), {})) == (1, 1)
    assert count_violations(g, white(3)) == (0, 0)


def test_legal_actions():
    s = GameState((WHITE, 1, WHITE), {})
    assert legal_actions(s, 2) == [(0, 0), (0, 1), (2, 0), (2, 1)]
