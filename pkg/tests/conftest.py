import os

import numpy as np
import pytest

from gameshape.envs import grid_soccer
from gameshape.model import MatrixGame, StochasticGame, single_state_game
from gameshape.solver import shapley_value_iteration

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def fixture_path(name: str) -> str:
    return os.path.join(FIXTURES, name)


def make_chain(gamma: float = 0.9) -> StochasticGame:
    """s0 -(r=0)-> s1 -(r=1)-> end, one player, one action."""
    t = np.zeros((3, 1, 3))
    t[0, 0, 1] = 1.0
    t[1, 0, 2] = 1.0
    t[2, 0, 2] = 1.0
    r = np.zeros((1, 3, 1, 3))
    r[0, 1, 0, 2] = 1.0
    return StochasticGame(
        1, ("s0", "s1", "end"), (1,), t, r, gamma, frozenset({2}), (("go",),)
    )


def pd_matrix() -> MatrixGame:
    return MatrixGame(
        2, (2, 2), np.array([[[3, 0], [5, 1]], [[3, 5], [0, 1]]], dtype=float)
    )


def matching_pennies_matrix() -> MatrixGame:
    return MatrixGame(
        2, (2, 2),
        np.array([[[1, -1], [-1, 1]], [[-1, 1], [1, -1]]], dtype=float),
        zero_sum=True,
    )


def bos_matrix() -> MatrixGame:
    return MatrixGame(
        2, (2, 2), np.array([[[2, 0], [0, 1]], [[1, 0], [0, 2]]], dtype=float)
    )


def pd_game(gamma: float = 0.5) -> StochasticGame:
    return single_state_game(
        pd_matrix(), gamma, state_name="round", action_names=(("C", "D"), ("C", "D"))
    )


def random_game(
    rng: np.random.Generator,
    num_players: int = 2,
    num_states: int = 3,
    actions: int = 2,
    gamma: float = 0.9,
    num_terminals: int = 1,
    zero_sum: bool = False,
) -> StochasticGame:
    """Random well-formed game (absorbing zero-reward terminals at the end)."""
    j = actions ** num_players
    t = rng.dirichlet(np.ones(num_states), size=(num_states, j))
    if zero_sum:
        r1 = rng.normal(size=(num_states, j, num_states))
        r = np.stack([r1, -r1])
    else:
        r = rng.normal(size=(num_players, num_states, j, num_states))
    terminals = list(range(num_states - num_terminals, num_states))
    for s_t in terminals:
        t[s_t] = 0.0
        t[s_t, :, s_t] = 1.0
        r[:, s_t, :, s_t] = 0.0
    return StochasticGame(
        num_players,
        tuple(f"s{i}" for i in range(num_states)),
        (actions,) * num_players,
        t,
        r,
        gamma,
        frozenset(terminals),
    )


def random_potentials(rng: np.random.Generator, game: StochasticGame):
    values = rng.normal(size=(game.num_players, game.num_states))
    values[:, list(game.terminals)] = 0.0
    return values


@pytest.fixture(scope="session")
def soccer():
    """Grid soccer game + sampler, built once per session."""
    return grid_soccer()


@pytest.fixture(scope="session")
def soccer_solution(soccer):
    game, _ = soccer
    return shapley_value_iteration(game)
