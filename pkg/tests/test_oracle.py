import math

import numpy as np
import pytest

from kinalloc.best_response import br_objective, water_fill
from kinalloc.family_model import FamilyGame, FitnessKind, validate_game
from kinalloc.oracle import (
    MAX_GRID_POINTS,
    GridSpec,
    GridTooLarge,
    grid_best_response,
    grid_nash_check,
    grid_size,
    random_instance,
)

from conftest import LOG, PARENT_CHILD_EQ, pair


def test_grid_spec_validation():
    with pytest.raises(ValueError):
        GridSpec(step=0.0)
    with pytest.raises(ValueError):
        GridSpec(epsilon=-1.0)


def test_single_target():
    game = FamilyGame(["a"], [1.7], [[1.0]], [LOG])
    alloc, value = grid_best_response(game, 0, [0.3], GridSpec(0.1))
    np.testing.assert_array_equal(alloc, [1.7])
    assert value == pytest.approx(math.log(3.0))


def test_prefers_self_at_unequal_relatedness():
    game = pair(0.5, 0.5, (1.0, 1.0))
    alloc, value = grid_best_response(game, 0, [0.0, 0.0], GridSpec(1e-3))
    np.testing.assert_allclose(alloc, [1.0, 0.0])
    assert value == pytest.approx(math.log(2.0))


def test_symmetric_even_grid_splits_equally():
    game = pair(1.0, 1.0, (1.0, 1.0))
    alloc, _ = grid_best_response(game, 0, [0.0, 0.0], GridSpec(0.1))
    np.testing.assert_allclose(alloc, [0.5, 0.5])


def test_lexicographic_tie_breaking():
    # relatedness zero everywhere except self: every split of the budget
    # between the two unrelated targets ties, the lowest one wins
    game = FamilyGame("abc", [1.0, 1.0, 1.0], [[1, 0, 0], [0, 1, 0], [0, 0, 1]], [LOG, LOG, LOG])
    alloc, _ = grid_best_response(game, 1, [0.0, 0.0, 0.0], GridSpec(0.25))
    np.testing.assert_allclose(alloc, [0.0, 1.0, 0.0])


def test_budget_not_multiple_of_step():
    game = FamilyGame(["a", "b"], [1.05, 1.0], np.eye(2), [LOG, LOG])
    alloc, _ = grid_best_response(game, 0, [0.0, 0.0], GridSpec(0.1))
    assert alloc.sum() == pytest.approx(1.05)


def test_grid_too_large():
    game = random_instance(0, 4, budget_range=(50, 60))
    assert grid_size(4, game.budgets[0], 1e-2) > MAX_GRID_POINTS
    with pytest.raises(GridTooLarge, match="10000000"):
        grid_best_response(game, 0, np.zeros(4), GridSpec(1e-2))
    with pytest.raises(GridTooLarge):
        grid_nash_check(game, np.diag(game.budgets), GridSpec(1e-2))


def test_nash_check_mutual_half():
    game = pair(0.5, 0.5, (1.0, 1.0))
    assert grid_nash_check(game, np.eye(2), GridSpec(1e-2, 1e-4)).passed


def test_nash_check_detects_child_giving_away(parent_child):
    x = PARENT_CHILD_EQ.copy()
    x[1] = [0.1, 0.0]
    res = grid_nash_check(parent_child, x, GridSpec(1e-2, 1e-3))
    assert not res.passed
    assert res.worst_source == 1
    np.testing.assert_allclose(res.deviation, [0.0, 0.1])
    # taking the 0.1 back lifts the child from 0.6 to 0.7 incoming and drops
    # the parent (weighted 1/2) from 2.5 to 2.4
    expected = math.log(1.7 / 1.6) - 0.5 * math.log(3.5 / 3.4)
    assert res.worst_gain == pytest.approx(expected, rel=1e-9)


def test_nash_check_unrelated(unrelated):
    assert grid_nash_check(unrelated, np.diag(unrelated.budgets), GridSpec(1e-2, 1e-4)).passed


def test_random_instance_deterministic():
    a, b = random_instance(42, 5), random_instance(42, 5)
    assert a == b
    assert a != random_instance(43, 5)


def test_random_instance_minimal():
    game = random_instance(3, 1, relatedness_model="symmetric")
    assert game.n == 1 and game.relatedness[0, 0] == 1.0


@pytest.mark.parametrize("model", ["uniform", "symmetric", "dominant"])
def test_random_instances_are_valid(model):
    for seed in range(1000):
        game = random_instance(seed, 1 + seed % 8, relatedness_model=model, fitness_kinds=list(FitnessKind))
        assert validate_game(game).ok, seed


def test_symmetric_model_is_symmetric():
    r = random_instance(9, 6, relatedness_model="symmetric").relatedness
    np.testing.assert_array_equal(r, r.T)


def test_dominant_model_is_strict():
    r = random_instance(9, 6, relatedness_model="dominant").relatedness
    assert np.all(r[~np.eye(6, dtype=bool)] < 1.0)


@pytest.mark.parametrize("seed", range(25))
def test_grid_never_beats_water_fill(seed):
    n = 1 + seed % 4
    game = random_instance(seed, n, budget_range=(0.1, 2.0))
    ext = np.random.default_rng(seed).uniform(0, 1, n)
    _, grid_value = grid_best_response(game, 0, ext, GridSpec(0.02))
    exact = br_objective(game, 0, ext, water_fill(game, 0, ext).allocation)
    assert grid_value <= exact + 1e-9
