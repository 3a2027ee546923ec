import pytest

from stylerank.game import WHITE, ConfigError, GameState, GridConfig, generate_grid
from stylerank.styles import (
    CATALOG_NAMES,
    StyleSpec,
    color_name,
    is_warm,
    preference_reward,
    resolve_styles,
    style_catalog,
)


def test_catalog():
    cat = {s.name: s for s in style_catalog()}
    assert list(cat) == list(CATALOG_NAMES) and len(cat) == 11
    assert cat["I"].vector == (0.0, 0.0, 0.0)
    assert cat["CA"].vector == (-0.7, 0.7, 0.0)
    assert cat["WL"].vector == (0.7, -0.7, 0.0)
    assert cat["AE"].vector == (0.0, 0.7, 0.7)
    assert cat["M"].vector == (0.0, 0.0, -0.7)


def test_letter_conflicts():
    with pytest.raises(ConfigError, match="twice"):
        StyleSpec.from_letters("WC")
    with pytest.raises(ConfigError, match="letter"):
        StyleSpec.from_letters("Z")


def test_resolve_styles():
    specs = resolve_styles(["C", {"name": "X", "tone": 0.3, "approach": -0.5}])
    assert specs[1] == StyleSpec("X", 0.3, 0.0, -0.5)
    with pytest.raises(ConfigError, match="'Q'"):
        resolve_styles(["C", "Q"])
    with pytest.raises(ConfigError, match="duplicate"):
        resolve_styles(["C", "C"])
    with pytest.raises(ConfigError):
        resolve_styles([{"name": "X", "tone": 2.0}])


def test_warm_half():
    assert [is_warm(c, 10) for c in range(10)] == [True] * 5 + [False] * 5
    assert [is_warm(c, 3) for c in range(3)] == [True, True, False]
    assert color_name(0) == "red" and color_name(12) == "color12"


def test_preference_reward_by_hand():
    # blocks: 0 touches 1,2 ; 1 touches 0 ; 2 touches 0  -> degrees 2,1,1
    cfg = GridConfig(rows=1, cols=3, num_blocks=3, layout=((1, 0, 2),))
    g = generate_grid(cfg)
    assert g.degree == (2, 1, 1)
    state = GameState((WHITE, 7, 7), {})
    w = 0.7
    # warm color 0 on the busiest block, unused so far
    assert preference_reward(StyleSpec("W", tone=w), state, (0, 0), g, 10) == pytest.approx(w)
    assert preference_reward(StyleSpec("C", tone=-w), state, (0, 0), g, 10) == pytest.approx(-w)
    assert preference_reward(StyleSpec("A", difficulty=w), state, (0, 0), g, 10) == pytest.approx(w)
    assert preference_reward(StyleSpec("L", difficulty=-w), state, (0, 0), g, 10) == pytest.approx(-w)
    # color 7 covers every colored block: frequency 1, approach signal -1
    assert preference_reward(StyleSpec("M", approach=-w), state, (0, 7), g, 10) == pytest.approx(w)
    assert preference_reward(StyleSpec("E", approach=w), state, (0, 7), g, 10) == pytest.approx(-w)
    assert preference_reward(StyleSpec("I"), state, (0, 7), g, 10) == 0.0


def test_preference_reward_bounds():
    g = generate_grid(GridConfig())
    state = GameState((WHITE,) * g.num_blocks, {})
    for s in style_catalog():
        for b in range(g.num_blocks):
            for c in range(10):
                assert abs(preference_reward(s, state, (b, c), g, 10)) <= 1.4 + 1e-12
    with pytest.raises(ValueError):
        preference_reward(style_catalog()[0], state, (0, 10), g, 10)
