"""Stochastic-game machinery: value iteration, Shapley iteration for
zero-sum games, Nash verification through induced-MDP best responses, and
exhaustive pure-stationary-equilibrium search.

General-sum multi-state games are verified, never searched for beyond pure
profiles: when several equilibria exist no canonical one is selected, so
every operation returns sets or checks candidates.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import CancelledError, DivergenceError, DomainError, SearchSpaceError
from .lp import solve_matrix_lp
from .matrix import MatrixGame, pure_equilibria, support_enumeration
from .model import (
    MAX_SWEEPS,
    REGRET_TOL,
    STRUCT_TOL,
    VALUE_TOL,
    Policy,
    PolicyProfile,
    QTable,
    StochasticGame,
    ValueTable,
    _stop_threshold,
    evaluate_profile,
    induced_mdp,
)

PURE_SEARCH_GUARD = 10**6


@dataclass(frozen=True)
class EquilibriumSolution:
    """An equilibrium candidate with its value/action-value tables and the
    per-player per-state best-response gaps recorded at construction."""

    profile: PolicyProfile
    values: ValueTable            # (n, S)
    q: QTable                     # (n, S, J)
    regrets: np.ndarray           # (n, S)
    method: str
    iterates: tuple[np.ndarray, ...] | None = None

    @property
    def max_regret(self) -> float:
        return float(self.regrets.max())


def q_from_v(game: StochasticGame, v: ValueTable) -> QTable:
    """One-step backup ``Q_i(s,a) = sum_s' T(s,a,s')[R_i(s,a,s') + gamma v_i(s')]``.

    Rows at terminal states are pinned to zero.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (game.num_players, game.num_states):
        raise DomainError(
            f"value table shape {v.shape} != ({game.num_players}, {game.num_states})"
        )
    q = game.expected_reward() + game.gamma * np.einsum("sjt,it->isj", game.transition, v)
    q[:, game.terminal_mask, :] = 0.0
    return q


def mdp_value_iteration(
    mdp: StochasticGame, tol: float = VALUE_TOL, v0: np.ndarray | None = None
) -> tuple[ValueTable, Policy]:
    """Optimal values and a greedy deterministic policy for a 1-player game.

    Iterates the Bellman optimality backup until the sup-norm change falls
    below ``tol * (1 - gamma) / (2 gamma)``, which bounds the final error by
    ``tol / 2``.  Ties in the greedy policy go to the lowest action index.
    ``v0`` warm-starts the iteration.
    """
    if mdp.num_players != 1:
        raise DomainError("mdp_value_iteration needs a 1-player game")
    er = mdp.expected_reward()[0]                      # (S, A)
    t_flat = mdp.transition.reshape(-1, mdp.num_states)  # (S*A, S)
    nonterminal = ~mdp.terminal_mask
    threshold = _stop_threshold(tol, mdp.gamma)

    s_count, a_count = er.shape
    v = np.zeros(s_count) if v0 is None else np.asarray(v0, dtype=float).copy()
    v[mdp.terminal_mask] = 0.0
    for _ in range(MAX_SWEEPS):
        q = er + mdp.gamma * (t_flat @ v).reshape(s_count, a_count)
        v_new = np.where(nonterminal, q.max(axis=1), 0.0)
        change = float(np.max(np.abs(v_new - v)))
        v = v_new
        if change <= threshold:
            break
    else:
        raise DivergenceError(
            f"value iteration did not converge within {MAX_SWEEPS} sweeps"
        )
    q = er + mdp.gamma * (t_flat @ v).reshape(s_count, a_count)
    q[mdp.terminal_mask] = 0.0
    greedy = Policy.deterministic(s_count, a_count, q.argmax(axis=1))
    return v[None, :], greedy


def verify_nash(
    game: StochasticGame,
    profile: PolicyProfile,
    eps: float = REGRET_TOL,
    value_tol: float | None = None,
) -> tuple[np.ndarray, bool]:
    """Per-player per-state best-response gaps of ``profile`` and whether it
    is an eps-Nash equilibrium.

    For each player the others are frozen, the induced MDP is solved to
    optimality, and the regret is the best-response value minus the
    profile's own value.  Stationary deviations suffice because the induced
    problem is an MDP.
    """
    profile.check_against(game)
    if value_tol is None:
        value_tol = max(eps * 0.01, 1e-10)
    v_profile = evaluate_profile(game, profile, tol=value_tol)
    regrets = np.zeros_like(v_profile)
    for i in range(game.num_players):
        mdp = induced_mdp(game, i, profile if game.num_players > 1 else None)
        v_best, _ = mdp_value_iteration(mdp, tol=value_tol, v0=v_profile[i])
        regrets[i] = v_best[0] - v_profile[i]
    return regrets, bool(regrets.max() <= eps)


def shapley_value_iteration(
    game: StochasticGame, tol: float = VALUE_TOL, record_iterates: bool = False
) -> EquilibriumSolution:
    """Fixed-point solution of a two-player zero-sum stochastic game.

    Each sweep replaces V1(s) with the minimax value of the state-specific
    matrix game built from the one-step backup of the current values; player
    2's per-state strategy comes from the LP dual.  Stops when the sup-norm
    change falls below ``tol * (1 - gamma) / (2 gamma)``.
    """
    if game.num_players != 2:
        raise DomainError("shapley_value_iteration needs a 2-player game")
    if not game.is_zero_sum(tol=max(STRUCT_TOL, tol)):
        raise DomainError("shapley_value_iteration needs a zero-sum game")
    if not game.gamma < 1.0:
        raise DomainError("shapley_value_iteration needs gamma < 1")

    s_count = game.num_states
    a1, a2 = game.action_counts
    er1 = game.expected_reward()[0]                      # (S, J)
    t_flat = game.transition.reshape(-1, s_count)        # (S*J, S)
    nonterminal = np.flatnonzero(~game.terminal_mask)
    threshold = _stop_threshold(tol, game.gamma)

    v1 = np.zeros(s_count)
    history: list[np.ndarray] = [v1.copy()] if record_iterates else []
    for _ in range(MAX_SWEEPS):
        q1 = (er1 + game.gamma * (t_flat @ v1).reshape(s_count, -1))
        q1_mats = q1.reshape(s_count, a1, a2)
        v_new = np.zeros(s_count)
        for s in nonterminal:
            v_new[s], _, _ = solve_matrix_lp(q1_mats[s])
        change = float(np.max(np.abs(v_new - v1)))
        v1 = v_new
        if record_iterates:
            history.append(v1.copy())
        if change <= threshold:
            break
    else:
        raise DivergenceError(
            f"Shapley iteration did not converge within {MAX_SWEEPS} sweeps"
        )

    # one more state-game pass to pin strategies and mutually consistent tables
    q1 = (er1 + game.gamma * (t_flat @ v1).reshape(s_count, -1)).reshape(s_count, a1, a2)
    table1 = np.zeros((s_count, a1))
    table2 = np.zeros((s_count, a2))
    table1[:, 0] = 1.0
    table2[:, 0] = 1.0
    v_out = np.zeros(s_count)
    for s in nonterminal:
        _, p, q = solve_matrix_lp(q1[s])
        table1[s] = p
        table2[s] = q
        v_out[s] = p @ q1[s] @ q
    profile = PolicyProfile.from_tables((table1, table2))
    values = np.vstack([v_out, -v_out])
    values[:, game.terminal_mask] = 0.0
    q_out = q_from_v(game, values)
    regrets, _ = verify_nash(game, profile, eps=10 * tol)
    return EquilibriumSolution(
        profile=profile,
        values=values,
        q=q_out,
        regrets=regrets,
        method="shapley-lp",
        iterates=tuple(history) if record_iterates else None,
    )


def pure_stationary_equilibria(
    game: StochasticGame,
    eps: float = REGRET_TOL,
    cancel=None,
) -> list[PolicyProfile]:
    """Exhaustive search over deterministic stationary profiles, returning
    those that pass ``verify_nash`` at ``eps``.

    Serves as the brute-force oracle for the other components.  Profiles
    are enumerated lexicographically; at terminal states every player is
    pinned to its first action since the choice there is irrelevant.
    ``cancel`` may be a ``threading.Event``-like object checked between
    candidates.
    """
    nonterminal = np.flatnonzero(~game.terminal_mask)
    total = 1
    for a in game.action_counts:
        total *= a ** len(nonterminal)
        if total > PURE_SEARCH_GUARD:
            raise SearchSpaceError(
                f"pure-profile space exceeds the {PURE_SEARCH_GUARD} guard"
            )

    per_player_choices = [
        list(itertools.product(range(a), repeat=len(nonterminal)))
        for a in game.action_counts
    ]
    found = []
    for combo in itertools.product(*per_player_choices):
        if cancel is not None and cancel.is_set():
            raise CancelledError("pure-profile search cancelled")
        policies = []
        for i, choices in enumerate(combo):
            full = np.zeros(game.num_states, dtype=int)
            full[nonterminal] = choices
            policies.append(
                Policy.deterministic(game.num_states, game.action_counts[i], full)
            )
        profile = PolicyProfile(tuple(policies))
        _, is_nash = verify_nash(game, profile, eps=eps)
        if is_nash:
            found.append(profile)
    return found


def solve_single_state(
    game: StochasticGame, tol: float = VALUE_TOL
) -> list[EquilibriumSolution]:
    """Equilibria of a game with exactly one non-terminal, self-looping state.

    The state-specific game is then a plain matrix game over the expected
    immediate rewards, and each of its equilibria lifts to a stationary
    profile with values ``E[r] / (1 - gamma)``.  Two-player games use
    support enumeration; other player counts report pure equilibria only.
    """
    nonterminal = np.flatnonzero(~game.terminal_mask)
    if nonterminal.size != 1:
        raise DomainError(
            f"solve_single_state needs exactly one non-terminal state, "
            f"found {nonterminal.size}"
        )
    s0 = int(nonterminal[0])
    self_loop = game.transition[s0, :, s0]
    if np.max(np.abs(self_loop - 1.0)) > STRUCT_TOL:
        raise DomainError(
            "solve_single_state needs the non-terminal state to self-loop "
            "with probability 1 under every joint action"
        )
    if not game.gamma < 1.0:
        raise DomainError("solve_single_state needs gamma < 1")

    payoffs = game.expected_reward()[:, s0, :].reshape(
        game.num_players, *game.action_counts
    )
    mg = MatrixGame(game.num_players, game.action_counts, payoffs)
    if game.num_players == 2:
        matrix_eqs = [eq.strategies for eq in support_enumeration(mg, tol=tol)]
    else:
        matrix_eqs = []
        for joint in pure_equilibria(mg):
            strategies = []
            for i, a in enumerate(joint):
                s = np.zeros(game.action_counts[i])
                s[a] = 1.0
                strategies.append(s)
            matrix_eqs.append(tuple(strategies))

    solutions = []
    for strategies in matrix_eqs:
        tables = []
        for i, strat in enumerate(strategies):
            table = np.zeros((game.num_states, game.action_counts[i]))
            table[:, 0] = 1.0
            table[s0] = strat
            tables.append(table)
        profile = PolicyProfile.from_tables(tables)
        values = evaluate_profile(game, profile, tol=tol)
        q = q_from_v(game, values)
        regrets, _ = verify_nash(game, profile, eps=10 * tol)
        solutions.append(
            EquilibriumSolution(
                profile=profile,
                values=values,
                q=q,
                regrets=regrets,
                method="single-state-matrix",
            )
        )
    return solutions
