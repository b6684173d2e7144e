"""Core game types: matrix games, stochastic games, policies, potentials.

Conventions used throughout the package:

* Players, states and actions are 0-indexed integers internally; display
  names live on the game objects and are only used for I/O and messages.
* Joint actions are flattened row-major over players (player 0 is the most
  significant digit), so joint index ``j`` unravels to a tuple of per-player
  actions via ``numpy.unravel_index(j, action_counts)``.
* Transition tables are dense ``(S, J, S)`` arrays of probabilities, reward
  tables are dense ``(n, S, J, S)`` arrays of expected immediate rewards
  received on arrival in the next state.
* Terminal states are absorbing with zero reward; their values, action
  values and potentials are pinned to zero everywhere.

All types are immutable after construction and all operations are pure
functions, so everything here is safe to share across threads.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, DomainError

STRUCT_TOL = 1e-12      # structural checks: row sums, distribution sums
VALUE_TOL = 1e-9        # value fixed points
REGRET_TOL = 1e-8       # equilibrium regret
MAX_SWEEPS = 100_000    # iteration cap for fixed-point loops
DIRECT_SOLVE_MAX_STATES = 64


def _frozen_array(x, dtype=float) -> np.ndarray:
    a = np.ascontiguousarray(x, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MatrixGame:
    """A single-state game: per-player payoff for every joint action.

    ``payoffs`` has shape ``(num_players, *action_counts)`` so for a
    two-player game ``payoffs[0]`` is the row player's matrix and
    ``payoffs[1]`` the column player's.
    """

    num_players: int
    action_counts: tuple[int, ...]
    payoffs: np.ndarray
    zero_sum: bool = False

    def __post_init__(self):
        object.__setattr__(self, "action_counts", tuple(int(a) for a in self.action_counts))
        payoffs = _frozen_array(self.payoffs)
        object.__setattr__(self, "payoffs", payoffs)
        if self.num_players < 1:
            raise DomainError("a matrix game needs at least one player")
        if len(self.action_counts) != self.num_players:
            raise DomainError("action_counts must list one count per player")
        if any(a < 1 for a in self.action_counts):
            raise DomainError("every player needs at least one action")
        expected = (self.num_players, *self.action_counts)
        if payoffs.shape != expected:
            raise DomainError(f"payoffs shape {payoffs.shape} != expected {expected}")
        if not np.all(np.isfinite(payoffs)):
            raise DomainError("payoffs must be finite")
        if self.zero_sum:
            if self.num_players != 2:
                raise DomainError("zero_sum flag applies to 2-player games only")
            gap = np.max(np.abs(payoffs[0] + payoffs[1]))
            if gap > STRUCT_TOL:
                raise DomainError(f"zero_sum flag set but payoffs sum to {gap:.3g} != 0")

    @property
    def num_joint_actions(self) -> int:
        return int(np.prod(self.action_counts))

    def payoff_table(self) -> np.ndarray:
        """Payoffs flattened to ``(num_players, num_joint_actions)``."""
        return self.payoffs.reshape(self.num_players, -1)


@dataclass(frozen=True)
class StochasticGame:
    """A finite discounted n-player stochastic (Markov) game.

    ``transition[s, j]`` is the probability vector over next states after
    joint action ``j`` in state ``s``; ``reward[i, s, j, s']`` is player i's
    expected immediate reward on arriving in ``s'``.
    """

    num_players: int
    states: tuple[str, ...]
    action_counts: tuple[int, ...]
    transition: np.ndarray
    reward: np.ndarray
    gamma: float
    terminals: frozenset[int]
    action_names: tuple[tuple[str, ...], ...] = None
    terminal_mask: np.ndarray = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(str(s) for s in self.states))
        object.__setattr__(self, "action_counts", tuple(int(a) for a in self.action_counts))
        object.__setattr__(self, "terminals", frozenset(int(t) for t in self.terminals))
        object.__setattr__(self, "transition", _frozen_array(self.transition))
        object.__setattr__(self, "reward", _frozen_array(self.reward))
        object.__setattr__(self, "gamma", float(self.gamma))
        if self.action_names is None:
            names = tuple(
                tuple(f"a{k}" for k in range(count)) for count in self.action_counts
            )
            object.__setattr__(self, "action_names", names)
        else:
            object.__setattr__(
                self, "action_names",
                tuple(tuple(str(x) for x in per) for per in self.action_names),
            )

        n, s_count = self.num_players, len(self.states)
        if n < 1:
            raise DomainError("a stochastic game needs at least one player")
        if s_count < 1:
            raise DomainError("a stochastic game needs at least one state")
        if len(set(self.states)) != s_count:
            raise DomainError("state names must be unique")
        if len(self.action_counts) != n:
            raise DomainError("action_counts must list one count per player")
        if any(a < 1 for a in self.action_counts):
            raise DomainError("every player needs at least one action")
        j = self.num_joint_actions
        if self.transition.shape != (s_count, j, s_count):
            raise DomainError(
                f"transition shape {self.transition.shape} != {(s_count, j, s_count)}"
            )
        if self.reward.shape != (n, s_count, j, s_count):
            raise DomainError(
                f"reward shape {self.reward.shape} != {(n, s_count, j, s_count)}"
            )
        if any(not (0 <= t < s_count) for t in self.terminals):
            raise DomainError("terminal index out of range")
        if len(self.action_names) != n or any(
            len(per) != count for per, count in zip(self.action_names, self.action_counts)
        ):
            raise DomainError("action_names must match action_counts")
        mask = np.zeros(s_count, dtype=bool)
        mask[list(self.terminals)] = True
        mask.setflags(write=False)
        object.__setattr__(self, "terminal_mask", mask)

    @property
    def num_states(self) -> int:
        return len(self.states)

    @property
    def num_joint_actions(self) -> int:
        return int(np.prod(self.action_counts))

    def joint_index(self, actions) -> int:
        """Flatten a per-player action tuple to a joint-action index."""
        return int(np.ravel_multi_index(tuple(actions), self.action_counts))

    def joint_actions(self, j: int) -> tuple[int, ...]:
        """Unflatten a joint-action index to the per-player action tuple."""
        return tuple(int(a) for a in np.unravel_index(j, self.action_counts))

    def state_index(self, name: str) -> int:
        try:
            return self.states.index(name)
        except ValueError:
            raise DomainError(f"unknown state {name!r}") from None

    def expected_reward(self) -> np.ndarray:
        """Expected one-step reward ``sum_s' T(s,j,s') R_i(s,j,s')`` as (n, S, J)."""
        return np.einsum("sjt,isjt->isj", self.transition, self.reward)

    def is_zero_sum(self, tol: float = STRUCT_TOL) -> bool:
        return self.num_players == 2 and float(
            np.max(np.abs(self.reward[0] + self.reward[1]))
        ) <= tol


@dataclass(frozen=True)
class Policy:
    """One player's stationary stochastic policy: a distribution per state."""

    table: np.ndarray  # (S, A_i)

    def __post_init__(self):
        object.__setattr__(self, "table", _frozen_array(self.table))
        if self.table.ndim != 2:
            raise DomainError("policy table must be 2-D (states x actions)")
        if np.any(self.table < 0):
            raise DomainError("policy probabilities must be nonnegative")
        sums = self.table.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > STRUCT_TOL)
        if bad.size:
            raise DomainError(
                f"policy rows must sum to 1: state {bad[0]} sums to {sums[bad[0]]!r}"
            )

    @staticmethod
    def uniform(num_states: int, num_actions: int) -> "Policy":
        return Policy(np.full((num_states, num_actions), 1.0 / num_actions))

    @staticmethod
    def deterministic(num_states: int, num_actions: int, choices) -> "Policy":
        """Pure policy from a per-state action array."""
        table = np.zeros((num_states, num_actions))
        table[np.arange(num_states), np.asarray(choices, dtype=int)] = 1.0
        return Policy(table)

    def action_choices(self) -> np.ndarray:
        """Per-state argmax action (the action itself for a pure policy)."""
        return self.table.argmax(axis=1)


@dataclass(frozen=True)
class PolicyProfile:
    """One stationary policy per player."""

    policies: tuple[Policy, ...]

    def __post_init__(self):
        object.__setattr__(self, "policies", tuple(self.policies))
        if not self.policies:
            raise DomainError("a profile needs at least one policy")

    @property
    def num_players(self) -> int:
        return len(self.policies)

    @staticmethod
    def uniform(game: StochasticGame) -> "PolicyProfile":
        return PolicyProfile(tuple(
            Policy.uniform(game.num_states, a) for a in game.action_counts
        ))

    @staticmethod
    def from_tables(tables) -> "PolicyProfile":
        return PolicyProfile(tuple(Policy(t) for t in tables))

    def check_against(self, game: StochasticGame) -> None:
        if self.num_players != game.num_players:
            raise DomainError(
                f"profile has {self.num_players} policies, game has {game.num_players} players"
            )
        for i, pol in enumerate(self.policies):
            if pol.table.shape != (game.num_states, game.action_counts[i]):
                raise DomainError(
                    f"policy {i} shape {pol.table.shape} does not match game "
                    f"({game.num_states}, {game.action_counts[i]})"
                )

    def joint_table(self, game: StochasticGame) -> np.ndarray:
        """Joint action probabilities per state, shape (S, J)."""
        self.check_against(game)
        w = np.ones((game.num_states, 1))
        for pol in self.policies:
            w = w[:, :, None] * pol.table[:, None, :]
            w = w.reshape(game.num_states, -1)
        return w


@dataclass(frozen=True)
class PotentialSet:
    """Per-player real-valued state potentials, zero at terminals."""

    values: np.ndarray  # (n, S)

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(np.atleast_2d(self.values)))
        if not np.all(np.isfinite(self.values)):
            raise DomainError("potentials must be finite")

    @staticmethod
    def zeros(num_players: int, num_states: int) -> "PotentialSet":
        return PotentialSet(np.zeros((num_players, num_states)))

    def check_against(self, game: StochasticGame) -> None:
        if self.values.shape != (game.num_players, game.num_states):
            raise DomainError(
                f"potential shape {self.values.shape} does not match game "
                f"({game.num_players}, {game.num_states})"
            )
        for t in sorted(game.terminals):
            bad = np.flatnonzero(self.values[:, t] != 0.0)
            if bad.size:
                raise DomainError(
                    f"potential of player {bad[0] + 1} at terminal state "
                    f"{game.states[t]!r} must be 0"
                )


# ValueTable is a (num_players, num_states) float array; QTable is
# (num_players, num_states, num_joint_actions).  Plain ndarrays are used for
# both, with terminal entries pinned to zero.
ValueTable = np.ndarray
QTable = np.ndarray


def single_state_game(
    matrix: MatrixGame,
    gamma: float,
    state_name: str = "s0",
    action_names=None,
) -> StochasticGame:
    """Embed a matrix game as a one-state self-looping stochastic game."""
    j = matrix.num_joint_actions
    transition = np.ones((1, j, 1))
    reward = matrix.payoff_table().reshape(matrix.num_players, 1, j, 1)
    return StochasticGame(
        num_players=matrix.num_players,
        states=(state_name,),
        action_counts=matrix.action_counts,
        transition=transition,
        reward=reward,
        gamma=gamma,
        terminals=frozenset(),
        action_names=action_names,
    )


def _escape_set(game: StochasticGame) -> set[int]:
    """Non-terminal states from which some pure profile avoids terminals forever.

    Computed by pruning: repeatedly drop states that have no joint action
    keeping the whole next-state support inside the candidate set.  The game
    is proper (episodic for every policy) iff the result is empty.
    """
    support = game.transition > 0.0
    candidates = set(range(game.num_states)) - set(game.terminals)
    changed = True
    while changed:
        changed = False
        inside = np.zeros(game.num_states, dtype=bool)
        inside[list(candidates)] = True
        for s in list(candidates):
            if not any(
                support[s, j][~inside].sum() == 0 for j in range(game.num_joint_actions)
            ):
                candidates.discard(s)
                changed = True
    return candidates


def validate_game(game: StochasticGame) -> list[str]:
    """Check model invariants; return a list of human-readable violations.

    An empty list means the game is well formed.  Each violation names the
    state (and joint action where relevant) plus the rule that failed.
    """
    violations: list[str] = []
    t_table = game.transition

    def joint_name(j: int) -> str:
        acts = game.joint_actions(j)
        return "(" + ", ".join(
            game.action_names[i][a] for i, a in enumerate(acts)
        ) + ")"

    if not np.all(np.isfinite(t_table)):
        violations.append("transition table contains non-finite entries")
    if not np.all(np.isfinite(game.reward)):
        violations.append("reward table contains non-finite entries")
    if violations:
        return violations

    neg = np.argwhere(t_table < 0.0)
    for s, j, _ in neg[:1]:
        violations.append(
            f"state {game.states[s]!r} joint action {joint_name(j)}: "
            f"negative transition probability"
        )
    row_sums = t_table.sum(axis=2)
    bad = np.argwhere(np.abs(row_sums - 1.0) > STRUCT_TOL)
    for s, j in bad:
        violations.append(
            f"state {game.states[s]!r} joint action {joint_name(j)}: "
            f"transition row sums to {row_sums[s, j]!r}, not 1"
        )

    for t in sorted(game.terminals):
        for j in range(game.num_joint_actions):
            if abs(t_table[t, j, t] - 1.0) > STRUCT_TOL:
                violations.append(
                    f"terminal state {game.states[t]!r} joint action {joint_name(j)}: "
                    f"not absorbing (self-loop probability {t_table[t, j, t]!r})"
                )
        # zero reward on the realizable (absorbing) transition
        worst = np.max(np.abs(game.reward[:, t, :, t]))
        if worst > STRUCT_TOL:
            violations.append(
                f"terminal state {game.states[t]!r}: nonzero reward {worst!r} "
                f"on the absorbing transition"
            )

    if not (0.0 <= game.gamma <= 1.0):
        violations.append(f"gamma {game.gamma!r} outside [0, 1]")
    elif game.gamma == 1.0:
        trapped = _escape_set(game)
        if trapped:
            s = min(trapped)
            violations.append(
                f"gamma = 1 but the game is improper: state {game.states[s]!r} "
                f"can avoid reaching a terminal forever"
            )
    return violations


def _stop_threshold(tol: float, gamma: float) -> float:
    """Sup-norm change threshold for value iteration at accuracy ``tol``."""
    if 0.0 < gamma < 1.0:
        return tol * (1.0 - gamma) / (2.0 * gamma)
    return tol


def evaluate_profile(
    game: StochasticGame, profile: PolicyProfile, tol: float = VALUE_TOL
) -> ValueTable:
    """Per-player values of a fixed stationary profile, shape (n, S).

    Solves ``V_i(s) = sum_a pi(s,a) sum_s' T(s,a,s')[R_i(s,a,s') + gamma V_i(s')]``
    directly when the state space is small and by iteration otherwise.
    Terminal values are exactly zero.
    """
    profile.check_against(game)
    weights = profile.joint_table(game)  # (S, J)
    p_pi = np.einsum("sjt,sj->st", game.transition, weights)  # (S, S)
    r_pi = np.einsum("isj,sj->is", game.expected_reward(), weights)  # (n, S)

    nt = np.flatnonzero(~game.terminal_mask)
    values = np.zeros((game.num_players, game.num_states))
    if nt.size == 0:
        return values

    if nt.size <= DIRECT_SOLVE_MAX_STATES:
        a = np.eye(nt.size) - game.gamma * p_pi[np.ix_(nt, nt)]
        try:
            sol = np.linalg.solve(a, r_pi[:, nt].T)
        except np.linalg.LinAlgError:
            raise DivergenceError(
                "profile evaluation is singular (gamma = 1 on an improper game?)"
            ) from None
        values[:, nt] = sol.T
        return values

    threshold = _stop_threshold(tol, game.gamma)
    p_nt = p_pi[np.ix_(nt, nt)]
    r_nt = r_pi[:, nt]
    v = np.zeros_like(r_nt)
    for _ in range(MAX_SWEEPS):
        v_new = r_nt + game.gamma * v @ p_nt.T
        change = float(np.max(np.abs(v_new - v)))
        v = v_new
        if change <= threshold:
            values[:, nt] = v
            return values
    raise DivergenceError(
        f"profile evaluation did not converge within {MAX_SWEEPS} sweeps"
    )


def induced_mdp(
    game: StochasticGame, player: int, others: PolicyProfile | None
) -> StochasticGame:
    """The single-player MDP player ``player`` faces when everyone else
    plays the fixed policies in ``others`` (whose entry for ``player`` is
    ignored).

    Transitions marginalize the opponents' action distributions; rewards are
    the conditional expectation given the realized next state, and 0 on
    unreachable next states.
    """
    n = game.num_players
    if not (0 <= player < n):
        raise DomainError(f"player index {player} out of range for {n} players")
    if n == 1:
        others = None
    elif others is None:
        raise DomainError("multi-player games need the other players' policies")
    else:
        others.check_against(game)

    s_count = game.num_states
    shape = (s_count, *game.action_counts, s_count)
    t_full = game.transition.reshape(shape)
    r_full = game.reward[player].reshape(shape)

    # opponents' joint weight per state over the non-player action axes
    w = np.ones((s_count, 1))
    opp_counts = []
    for i in range(n):
        if i == player:
            continue
        opp_counts.append(game.action_counts[i])
        w = (w[:, :, None] * others.policies[i].table[:, None, :]).reshape(s_count, -1)
    w = w.reshape(s_count, *opp_counts) if opp_counts else w.reshape(s_count)

    # move the player's own axis right after the state axis
    t_own = np.moveaxis(t_full, 1 + player, 1)
    r_own = np.moveaxis(r_full, 1 + player, 1)
    a_i = game.action_counts[player]
    t_own = t_own.reshape(s_count, a_i, -1, s_count)
    r_own = r_own.reshape(s_count, a_i, -1, s_count)
    w_flat = w.reshape(s_count, 1, -1, 1)

    t_hat = (t_own * w_flat).sum(axis=2)
    num = (t_own * r_own * w_flat).sum(axis=2)
    with np.errstate(invalid="ignore", divide="ignore"):
        r_hat = np.where(t_hat > 0.0, num / np.where(t_hat > 0.0, t_hat, 1.0), 0.0)

    return StochasticGame(
        num_players=1,
        states=game.states,
        action_counts=(a_i,),
        transition=t_hat,
        reward=r_hat[None],
        gamma=game.gamma,
        terminals=game.terminals,
        action_names=(game.action_names[player],),
    )


def enumerate_joint_actions(action_counts) -> list[tuple[int, ...]]:
    """All joint actions in row-major (player-0 most significant) order."""
    return list(itertools.product(*(range(a) for a in action_counts)))
