import re

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rpsr_kit.fixtures import fixture_names, fixture_text, load_fixture
from rpsr_kit.parser import (
    PomdpParseError, PomdpSemanticError, collapse_rewards, parse_pomdp, serialize_pomdp,
)
from rpsr_kit.pomdp_model import random_pomdp
from parser_cases import MALFORMED

MINIMAL = """discount: 0.9
values: reward
states: 1
actions: 1
observations: 1
T: 0 identity
O: 0 uniform
"""


def assert_same(m1, m2, tol=1e-12):
    for f in ("transition", "observation", "reward", "start"):
        np.testing.assert_allclose(getattr(m1, f), getattr(m2, f), atol=tol, rtol=0)
    assert m1.discount == pytest.approx(m2.discount, abs=tol)


def test_corpus_size():
    assert len(fixture_names()) >= 5


@pytest.mark.parametrize("name", fixture_names())
def test_corpus_parses_stochastic(name):
    m = load_fixture(name)
    np.testing.assert_allclose(m.transition.sum(-1), 1.0, atol=1e-12)
    np.testing.assert_allclose(m.observation.sum(-1), 1.0, atol=1e-12)
    assert m.start.sum() == pytest.approx(1.0)
    assert 0.0 <= m.discount <= 1.0


@pytest.mark.parametrize("name", fixture_names())
def test_corpus_round_trip(name):
    m = load_fixture(name)
    assert_same(parse_pomdp(serialize_pomdp(m)), m)


def test_loadunload_shape():
    m = load_fixture("loadunload")
    assert (m.num_states, m.num_actions, m.num_observations) == (10, 2, 3)
    assert m.action_names == ("left", "right")
    assert m.observation_names == ("loading", "travel", "unloading")
    want = np.zeros((10, 2))
    want[[1, 8]] = 1.0
    np.testing.assert_array_equal(m.reward, want)


def test_variants_match_originals():
    assert_same(load_fixture("loadunload_wildcard"), load_fixture("loadunload"))
    assert_same(load_fixture("tiger_commented"), load_fixture("tiger"))


def test_minimal_file():
    m = parse_pomdp(MINIMAL)
    assert m.num_states == 1 and m.discount == 0.9
    assert_same(parse_pomdp(serialize_pomdp(m)), m)


@pytest.mark.parametrize("reason", sorted(MALFORMED))
def test_malformed(reason):
    with pytest.raises(PomdpParseError) as exc:
        parse_pomdp(MALFORMED[reason])
    assert exc.value.reason == reason


def test_row_sum_reports_line():
    with pytest.raises(PomdpSemanticError) as exc:
        parse_pomdp(MALFORMED["row-sum"])
    assert exc.value.line == 6
    assert "line 6" in str(exc.value)


def test_row_sum_point_nine():
    text = MINIMAL.replace("states: 1", "states: 2").replace("T: 0 identity", "T: 0 : 0\n0.5 0.4\nT: 0 : 1 uniform")
    with pytest.raises(PomdpSemanticError) as exc:
        parse_pomdp(text)
    assert exc.value.reason == "row-sum"


def test_comments_and_whitespace_ignored():
    base = load_fixture("loadunload")
    text = fixture_text("loadunload")
    noisy = "# header\n\n" + re.sub(r"\n", "   # note\n\t\n", text).replace(":", " :  ")
    assert_same(parse_pomdp(noisy), base)
    assert_same(parse_pomdp(text.replace("\n", "\r\n")), base)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 2**31))
def test_comment_insertion_property(pick, seed):
    text = fixture_text("tiger")
    lines = text.split("\n")
    rng = np.random.default_rng(seed)
    for _ in range(5):
        i = int(rng.integers(len(lines) + 1))
        lines.insert(i, "# " + "x" * int(rng.integers(10)) + " T: 0 : 0 1")
    assert_same(parse_pomdp("\n".join(lines)), load_fixture("tiger"))


def test_collapse_constant_reward_row():
    m = random_pomdp(3, 2, 2, seed=0)
    text = serialize_pomdp(m).split("R:")[0] + "R: * : 1 : * : * 1.0\n"
    got = parse_pomdp(text)
    want = np.zeros((3, 2))
    want[1] = 1.0
    np.testing.assert_allclose(got.reward, want, atol=1e-12)


def test_collapse_two_successor_expectation():
    # successors uniform over two states; R(s,a,s') = 0 and 2
    T = np.full((1, 2, 2), 0.5)
    O = np.ones((1, 2, 1))
    R4 = np.zeros((1, 2, 2, 1))
    R4[0, :, 1, 0] = 2.0
    np.testing.assert_allclose(collapse_rewards(R4, T, O), [[1.0], [1.0]])


def test_cost_values_negate():
    text = MINIMAL.replace("values: reward", "values: cost") + "R: 0 : 0 3.0\n"
    assert parse_pomdp(text).reward[0, 0] == -3.0


def test_later_statements_override():
    text = MINIMAL.replace("states: 1", "states: 2").replace("T: 0 identity", "T: 0 uniform")
    text += "R: * : * : * : * 1.0\nR: 0 : 1 : * : * 5.0\n"
    np.testing.assert_allclose(parse_pomdp(text).reward, [[1.0], [5.0]])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 5), st.integers(1, 3), st.integers(1, 3))
def test_random_round_trip(seed, S, A, O):
    m = random_pomdp(S, A, O, seed=seed, sparsity=0.3)
    assert_same(parse_pomdp(serialize_pomdp(m)), m)
