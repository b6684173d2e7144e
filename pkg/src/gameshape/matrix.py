"""Nash equilibria of matrix games.

Zero-sum games go through the simplex LP; two-player general-sum games are
handled by support enumeration over the indifference systems; for three or
more players only pure-profile search and best-response verification are
offered (mixed equilibria for n >= 3 are out of scope).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .lp import solve_matrix_lp
from .model import STRUCT_TOL, MatrixGame, enumerate_joint_actions

DEDUP_TOL = 1e-6
_LSTSQ_CONSISTENCY_TOL = 1e-9


@dataclass(frozen=True)
class MatrixEquilibrium:
    """A strategy profile together with its expected payoffs and regrets."""

    strategies: tuple[np.ndarray, ...]
    values: tuple[float, ...]
    regrets: tuple[float, ...]

    @property
    def max_regret(self) -> float:
        return max(self.regrets)


def _check_strategy(game: MatrixGame, strategy, player: int) -> np.ndarray:
    s = np.asarray(strategy, dtype=float)
    if s.shape != (game.action_counts[player],):
        raise DomainError(
            f"player {player + 1} strategy has shape {s.shape}, "
            f"expected ({game.action_counts[player]},)"
        )
    if np.any(s < 0) or abs(s.sum() - 1.0) > 1e-9:
        raise DomainError(f"player {player + 1} strategy is not a distribution")
    return s


def _deviation_payoffs(game: MatrixGame, strategies, player: int) -> np.ndarray:
    """Expected payoff to ``player`` of each of its pure actions against the
    other players' mixed strategies."""
    payoff = game.payoffs[player]
    # contract highest axes first so lower axis numbers stay stable
    for i in range(game.num_players - 1, -1, -1):
        if i == player:
            continue
        payoff = np.tensordot(payoff, strategies[i], axes=([i], [0]))
    return payoff


def best_response_regret(game: MatrixGame, strategies, player: int) -> float:
    """Gap between the best unilateral deviation and the profile's value.

    Zero means ``player`` has no profitable deviation; pure deviations
    suffice because expected payoff is linear in the player's own mix.
    """
    if not (0 <= player < game.num_players):
        raise DomainError(f"player index {player} out of range")
    strategies = [_check_strategy(game, s, i) for i, s in enumerate(strategies)]
    dev = _deviation_payoffs(game, strategies, player)
    expected = float(dev @ strategies[player])
    return max(0.0, float(dev.max()) - expected)


def _mixed_values(game: MatrixGame, strategies) -> tuple[float, ...]:
    values = []
    for i in range(game.num_players):
        v = game.payoffs[i]
        for s in strategies:
            v = np.tensordot(v, s, axes=([0], [0]))
        values.append(float(v))
    return tuple(values)


def _equilibrium_from(game: MatrixGame, strategies) -> MatrixEquilibrium:
    regrets = tuple(
        best_response_regret(game, strategies, i) for i in range(game.num_players)
    )
    return MatrixEquilibrium(
        strategies=tuple(np.asarray(s, dtype=float) for s in strategies),
        values=_mixed_values(game, strategies),
        regrets=regrets,
    )


def solve_zero_sum(game: MatrixGame, tol: float = 1e-9) -> MatrixEquilibrium:
    """Maximin/minimax solution of a two-player zero-sum matrix game.

    Player 1's strategy guarantees at least ``value - tol`` against every
    pure column; player 2's guarantees at most ``value + tol`` against every
    pure row.  Ties are broken toward the lowest action index.
    """
    if game.num_players != 2:
        raise DomainError("solve_zero_sum needs a 2-player game")
    gap = float(np.max(np.abs(game.payoffs[0] + game.payoffs[1])))
    if gap > max(STRUCT_TOL, tol):
        raise DomainError(f"game is not zero-sum (payoff sums reach {gap:.3g})")
    value, p, q = solve_matrix_lp(game.payoffs[0])
    eq = _equilibrium_from(game, (p, q))
    # report the LP value for player 1 (the unique game value), keeping the
    # mixed-value cross-check in the regret fields
    return MatrixEquilibrium(
        strategies=eq.strategies, values=(value, -value), regrets=eq.regrets
    )


def pure_equilibria(game: MatrixGame, tol: float = 0.0) -> list[tuple[int, ...]]:
    """All pure joint actions where no player can gain by a unilateral
    deviation.  Complete enumeration, any player count."""
    result = []
    for joint in enumerate_joint_actions(game.action_counts):
        ok = True
        for i in range(game.num_players):
            here = game.payoffs[(i, *joint)]
            sliced = list(joint)
            sliced[i] = slice(None)
            alternatives = game.payoffs[(i, *sliced)]
            if here < alternatives.max() - tol:
                ok = False
                break
        if ok:
            result.append(joint)
    return result


def _solve_support_system(payoff_sub: np.ndarray) -> np.ndarray | None:
    """Solve the indifference system for one player's support.

    ``payoff_sub`` is the (len(my support) x len(opponent support)) block of
    the payoff the opponent's mix must equalize.  Returns the opponent's
    probabilities over its support (with the equalized value appended), or
    None when the system is singular/inconsistent.
    """
    rows, cols = payoff_sub.shape
    a = np.zeros((rows + 1, cols + 1))
    a[:rows, :cols] = payoff_sub
    a[:rows, cols] = -1.0
    a[rows, :cols] = 1.0
    rhs = np.zeros(rows + 1)
    rhs[rows] = 1.0
    if rows == cols:
        if np.linalg.cond(a) > 1e12:
            return None
        try:
            return np.linalg.solve(a, rhs)
        except np.linalg.LinAlgError:
            return None
    sol, *_ = np.linalg.lstsq(a, rhs, rcond=None)
    if np.max(np.abs(a @ sol - rhs)) > _LSTSQ_CONSISTENCY_TOL:
        return None
    return sol


def support_enumeration(game: MatrixGame, tol: float = 1e-9) -> list[MatrixEquilibrium]:
    """All vertex Nash equilibria of a two-player game found by enumerating
    support pairs and solving the indifference systems.

    Equal- and unequal-size support pairs are both tried; candidates must be
    valid distributions with best-response regret at most ``tol``.  Results
    are deduplicated at sup-norm distance 1e-6 and sorted lexicographically
    by player 1's strategy.  Degenerate games may own equilibrium components;
    only the vertex solutions of the indifference systems are reported.
    """
    if game.num_players != 2:
        raise DomainError("support_enumeration needs a 2-player game")
    m, k = game.action_counts
    r1, r2 = game.payoffs[0], game.payoffs[1]

    found: list[tuple[np.ndarray, np.ndarray]] = []
    row_supports = [c for size in range(1, m + 1)
                    for c in itertools.combinations(range(m), size)]
    col_supports = [c for size in range(1, k + 1)
                    for c in itertools.combinations(range(k), size)]
    for rows in row_supports:
        for cols in col_supports:
            sol_q = _solve_support_system(r1[np.ix_(rows, cols)])
            if sol_q is None:
                continue
            sol_p = _solve_support_system(r2[np.ix_(rows, cols)].T)
            if sol_p is None:
                continue
            q_sub, p_sub = sol_q[:-1], sol_p[:-1]
            if q_sub.min() < -1e-9 or p_sub.min() < -1e-9:
                continue
            p = np.zeros(m)
            p[list(rows)] = np.clip(p_sub, 0.0, None)
            q = np.zeros(k)
            q[list(cols)] = np.clip(q_sub, 0.0, None)
            p /= p.sum()
            q /= q.sum()
            if best_response_regret(game, (p, q), 0) > tol:
                continue
            if best_response_regret(game, (p, q), 1) > tol:
                continue
            if any(
                max(np.max(np.abs(p - p0)), np.max(np.abs(q - q0))) <= DEDUP_TOL
                for p0, q0 in found
            ):
                continue
            found.append((p, q))

    found.sort(key=lambda pq: (tuple(pq[0]), tuple(pq[1])))
    return [_equilibrium_from(game, pq) for pq in found]
