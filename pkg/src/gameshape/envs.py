"""Sampling environments for multi-agent learning.

An environment exposes episodic sampling over a set of *sampling states*
that may differ from the model game's states: grid soccer samples the model
game directly, while a repeated matrix game runs undiscounted episodes whose
geometric termination (probability ``1 - gamma`` per step) stands in for
discounting, using an extra episode-end pseudo-state.  Each environment
therefore carries

* ``model_game``     - the stochastic game that solvers/verification use,
* ``agent_discount`` - the discount learners should bootstrap with,
* ``model_state_of`` - sampling state -> model state (-1 when none),

plus flat outcome arrays (CSR over state x joint-action rows) that both the
Python ``step`` and the compiled learning loop sample from, so the step
distribution matches the declared tables by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .model import MatrixGame, StochasticGame, single_state_game
from .shaping import ShapingFunction

GRID_ROWS = 4
GRID_COLS = 5
GOAL_ROWS = (1, 2)
SOCCER_ACTIONS = ("N", "S", "E", "W", "stand")
_MOVES = ((-1, 0), (1, 0), (0, 1), (0, -1), (0, 0))


@dataclass
class Environment:
    """Episodic sampler over a stochastic game's dynamics.

    ``step`` consumes exactly one uniform draw and every outcome row holds
    the realizable next states with their probabilities and per-player
    arrival rewards.
    """

    model_game: StochasticGame
    num_players: int
    num_states: int              # sampling states
    action_counts: tuple[int, ...]
    agent_discount: float
    model_state_of: np.ndarray   # (num_states,) int, -1 for pseudo-states
    terminal_mask: np.ndarray    # (num_states,) bool
    row_ptr: np.ndarray          # (num_states * J + 1,) int
    out_state: np.ndarray        # (nnz,) int
    out_prob: np.ndarray         # (nnz,) float
    out_reward: np.ndarray       # (num_players, nnz) float
    start_cumsum: np.ndarray     # (num_states,) float, cumulative reset law
    state: int = field(default=-1, init=False)

    @property
    def num_joint_actions(self) -> int:
        return int(np.prod(self.action_counts))

    def joint_index(self, actions) -> int:
        return int(np.ravel_multi_index(tuple(actions), self.action_counts))

    def reset(self, rng: np.random.Generator) -> int:
        self.state = int(np.searchsorted(self.start_cumsum, rng.random(), side="right"))
        return self.state

    def step(self, actions, rng: np.random.Generator):
        """Advance one step; returns (next_state, rewards, terminal)."""
        if self.state < 0:
            raise RuntimeError("environment must be reset before stepping")
        if self.terminal_mask[self.state]:
            raise RuntimeError("cannot step from a terminal state")
        row = self.state * self.num_joint_actions + self.joint_index(actions)
        lo, hi = self.row_ptr[row], self.row_ptr[row + 1]
        u = rng.random()
        acc = 0.0
        k = hi - 1
        for idx in range(lo, hi):
            acc += self.out_prob[idx]
            if u < acc:
                k = idx
                break
        self.state = int(self.out_state[k])
        rewards = self.out_reward[:, k].copy()
        return self.state, rewards, bool(self.terminal_mask[self.state])


class ShapedEnvironment(Environment):
    """Wraps an environment, adding ``F_i(s, s')`` over sampling states to
    each player's observed reward.  State dynamics are untouched."""

    def __init__(self, inner: Environment, shaping: ShapingFunction):
        if shaping.values.shape != (inner.num_players, inner.num_states, inner.num_states):
            raise DomainError(
                f"shaping shape {shaping.values.shape} does not match the "
                f"environment ({inner.num_players}, {inner.num_states}, {inner.num_states})"
            )
        self.inner = inner
        self.shaping = shaping
        super().__init__(
            model_game=inner.model_game,
            num_players=inner.num_players,
            num_states=inner.num_states,
            action_counts=inner.action_counts,
            agent_discount=inner.agent_discount,
            model_state_of=inner.model_state_of,
            terminal_mask=inner.terminal_mask,
            row_ptr=inner.row_ptr,
            out_state=inner.out_state,
            out_prob=inner.out_prob,
            out_reward=inner.out_reward,
            start_cumsum=inner.start_cumsum,
        )

    def step(self, actions, rng: np.random.Generator):
        previous = self.state
        next_state, rewards, terminal = super().step(actions, rng)
        rewards = rewards + self.shaping.values[:, previous, next_state]
        return next_state, rewards, terminal


def _cumsum_distribution(weights: np.ndarray) -> np.ndarray:
    total = weights.sum()
    if total <= 0:
        raise DomainError("start distribution has no mass")
    c = np.cumsum(weights / total)
    c[-1] = 1.0
    return c


def table_environment(game: StochasticGame, start="uniform") -> Environment:
    """Sampler over a stochastic game's own transition/reward tables.

    ``start`` is ``"uniform"`` (over non-terminal states), a state index, or
    an explicit probability vector over states.
    """
    s_count, j_count = game.num_states, game.num_joint_actions
    t_flat = game.transition.reshape(s_count * j_count, s_count)
    rows, cols = np.nonzero(t_flat > 0.0)
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    row_ptr = np.zeros(s_count * j_count + 1, dtype=np.int64)
    np.add.at(row_ptr, rows + 1, 1)
    row_ptr = np.cumsum(row_ptr)
    out_prob = t_flat[rows, cols]
    r_flat = game.reward.reshape(game.num_players, s_count * j_count, s_count)
    out_reward = r_flat[:, rows, cols]

    if isinstance(start, str):
        if start != "uniform":
            raise DomainError(f"unknown start distribution {start!r}")
        weights = (~game.terminal_mask).astype(float)
    elif np.isscalar(start):
        weights = np.zeros(s_count)
        weights[int(start)] = 1.0
    else:
        weights = np.asarray(start, dtype=float)
        if weights.shape != (s_count,):
            raise DomainError("start distribution must cover every state")

    return Environment(
        model_game=game,
        num_players=game.num_players,
        num_states=s_count,
        action_counts=game.action_counts,
        agent_discount=game.gamma,
        model_state_of=np.arange(s_count, dtype=np.int64),
        terminal_mask=game.terminal_mask.copy(),
        row_ptr=row_ptr,
        out_state=cols.astype(np.int64),
        out_prob=out_prob.astype(float),
        out_reward=np.ascontiguousarray(out_reward, dtype=float),
        start_cumsum=_cumsum_distribution(weights),
    )


def repeated_matrix_env(game: MatrixGame, gamma: float) -> Environment:
    """Repeated play of a matrix game with geometric episode termination.

    Episodes continue with probability ``gamma`` per step, so the
    undiscounted episodic return matches the gamma-discounted value of the
    single-state stochastic game in expectation; learners should bootstrap
    undiscounted (``agent_discount`` is 1).  Sampling state 1 is the
    episode-end pseudo-state.
    """
    if not (0.0 <= gamma < 1.0):
        raise DomainError("repeated play needs gamma in [0, 1)")
    model = single_state_game(game, gamma)
    j = game.num_joint_actions
    payoff = game.payoff_table()  # (n, J)

    row_ptr = np.zeros(2 * j + 1, dtype=np.int64)
    out_state, out_prob = [], []
    out_reward = []
    for jj in range(j):
        # stay in play w.p. gamma, end the episode w.p. 1 - gamma;
        # the matrix payoff is received either way
        out_state.extend([0, 1])
        out_prob.extend([gamma, 1.0 - gamma])
        out_reward.append(payoff[:, jj])
        out_reward.append(payoff[:, jj])
        row_ptr[jj + 1] = row_ptr[jj] + 2
    for jj in range(j):  # rows for the absorbing pseudo-state
        out_state.append(1)
        out_prob.append(1.0)
        out_reward.append(np.zeros(game.num_players))
        row_ptr[j + jj + 1] = row_ptr[j + jj] + 1

    model_state_of = np.array([0, -1], dtype=np.int64)
    return Environment(
        model_game=model,
        num_players=game.num_players,
        num_states=2,
        action_counts=game.action_counts,
        agent_discount=1.0,
        model_state_of=model_state_of,
        terminal_mask=np.array([False, True]),
        row_ptr=row_ptr,
        out_state=np.array(out_state, dtype=np.int64),
        out_prob=np.array(out_prob, dtype=float),
        out_reward=np.array(out_reward, dtype=float).T.copy(),
        start_cumsum=_cumsum_distribution(np.array([1.0, 0.0])),
    )


def _soccer_cell(row: int, col: int) -> int:
    return row * GRID_COLS + col


def _soccer_move(pos: int, action: int) -> tuple[int, int]:
    """Target of a move: (cell, goal) where goal is -1 none, 0 right, 1 left.

    Off-grid moves that are not goal entries keep the player in place.
    """
    row, col = divmod(pos, GRID_COLS)
    dr, dc = _MOVES[action]
    nr, nc = row + dr, col + dc
    if 0 <= nr < GRID_ROWS and 0 <= nc < GRID_COLS:
        return _soccer_cell(nr, nc), -1
    if nc == GRID_COLS and row in GOAL_ROWS:
        return pos, 0  # right goal
    if nc == -1 and row in GOAL_ROWS:
        return pos, 1  # left goal
    return pos, -1


def _soccer_outcome(pos, ball, actions, first):
    """Resolve both moves with ``first`` moving before the other player.

    Rules: a move onto the other player's square is blocked and hands the
    ball to the stationary player; the ball carrier entering a goal ends the
    game, crediting the goal's attacker (player 1 attacks the right goal,
    player 2 the left, own goals count for the opponent).
    Returns (positions, ball, scored_goal) with scored_goal -1 when play
    continues.
    """
    pos = list(pos)
    for mover in (first, 1 - first):
        other = 1 - mover
        target, goal = _soccer_move(pos[mover], actions[mover])
        if goal >= 0:
            if ball == mover:
                return pos, ball, goal
            continue  # without the ball the edge blocks the move
        if target == pos[other]:
            if ball == mover:
                ball = other
            continue
        pos[mover] = target
    return pos, ball, -1


def grid_soccer(gamma: float = 0.9, start="uniform"):
    """Littman's 4x5 grid soccer as a zero-sum stochastic game plus sampler.

    Two players with actions N/S/E/W/stand move simultaneously but are
    resolved in uniformly random order.  Moving onto the opponent blocks the
    move and transfers ball possession to the stationary player.  Carrying
    the ball off the field through one of the two middle rows on either end
    scores in that end's goal: the right goal pays player 1 ``+1`` (player 2
    ``-1``), the left goal the reverse, and the game ends.  States are all
    20 * 19 * 2 placements of the two players (distinct cells) times ball
    possession, plus the two scored terminals.
    """
    cells = GRID_ROWS * GRID_COLS
    index_of = {}
    names = []
    for p0 in range(cells):
        for p1 in range(cells):
            if p0 == p1:
                continue
            for ball in (0, 1):
                index_of[(p0, p1, ball)] = len(names)
                r0, c0 = divmod(p0, GRID_COLS)
                r1, c1 = divmod(p1, GRID_COLS)
                names.append(f"A{r0}{c0}B{r1}{c1}{'AB'[ball]}")
    goal_right = len(names)      # player 1 scored
    goal_left = goal_right + 1   # player 2 scored
    names.extend(["goal-p1", "goal-p2"])
    s_count = len(names)

    n_actions = len(SOCCER_ACTIONS)
    j_count = n_actions * n_actions
    transition = np.zeros((s_count, j_count, s_count))
    reward = np.zeros((2, s_count, j_count, s_count))
    for t in (goal_right, goal_left):
        transition[t, :, t] = 1.0

    for (p0, p1, ball), s in index_of.items():
        for a0 in range(n_actions):
            for a1 in range(n_actions):
                j = a0 * n_actions + a1
                for first in (0, 1):
                    pos, new_ball, goal = _soccer_outcome((p0, p1), ball, (a0, a1), first)
                    if goal == 0:
                        ns, r0 = goal_right, 1.0
                    elif goal == 1:
                        ns, r0 = goal_left, -1.0
                    else:
                        ns, r0 = index_of[(pos[0], pos[1], new_ball)], 0.0
                    transition[s, j, ns] += 0.5
                    if r0 != 0.0:
                        reward[0, s, j, ns] = r0
                        reward[1, s, j, ns] = -r0

    game = StochasticGame(
        num_players=2,
        states=tuple(names),
        action_counts=(n_actions, n_actions),
        transition=transition,
        reward=reward,
        gamma=gamma,
        terminals=frozenset({goal_right, goal_left}),
        action_names=(SOCCER_ACTIONS, SOCCER_ACTIONS),
    )
    return game, table_environment(game, start=start)
