"""Potential-based reward shaping for stochastic games.

A potential set assigns each player a real-valued state function that is
zero at terminals; the induced shaping reward is

    F_i(s, s') = gamma * phi_i(s') - phi_i(s)

and the shaped game M' keeps everything from M except that F_i(s, s') is
added to player i's reward.  Equilibria are invariant under this transform:
shaped equilibrium values satisfy V' = V - phi and Q' = Q - phi, and a
shaping function that is *not* potential-based admits a three-state
counterexample game whose equilibrium action flips between M and M'.  This
module implements the transform, the machine checks for both directions,
and a classifier that decides whether an arbitrary shaping function is
potential-based by reconstructing its potentials.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .model import (
    STRUCT_TOL,
    PolicyProfile,
    PotentialSet,
    StochasticGame,
    evaluate_profile,
)
from .solver import EquilibriumSolution, q_from_v, verify_nash


@dataclass(frozen=True)
class ShapingFunction:
    """Per-player shaping rewards on ordered state pairs, shape (n, S, S).

    Not restricted to potential form; ``classify_shaping`` decides that.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=float)
        if v.ndim != 3 or v.shape[1] != v.shape[2]:
            raise DomainError("shaping values must have shape (players, S, S)")
        if not np.all(np.isfinite(v)):
            raise DomainError("shaping values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def negated(self) -> "ShapingFunction":
        return ShapingFunction(-self.values)

    @property
    def num_players(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    residual: float
    detail: str = ""


@dataclass(frozen=True)
class CheckReport:
    checks: tuple[CheckResult, ...]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def __str__(self) -> str:
        lines = []
        for c in self.checks:
            mark = "PASS" if c.passed else "FAIL"
            line = f"[{mark}] {c.name}: max residual {c.residual:.3e}"
            if c.detail:
                line += f" ({c.detail})"
            lines.append(line)
        return "\n".join(lines)


def potential_to_shaping(
    phi: PotentialSet, gamma: float, terminals=()
) -> ShapingFunction:
    """Shaping rewards ``F_i(s,s') = gamma * phi_i(s') - phi_i(s)``.

    ``terminals`` lists state indices whose potential must be zero; a
    nonzero potential there is a domain error.
    """
    values = phi.values
    for t in terminals:
        bad = np.flatnonzero(values[:, int(t)] != 0.0)
        if bad.size:
            raise DomainError(
                f"player {bad[0] + 1} has nonzero potential at terminal state {t}"
            )
    f = gamma * values[:, None, :] - values[:, :, None]
    return ShapingFunction(f)


def apply_shaping(game: StochasticGame, shaping: ShapingFunction) -> StochasticGame:
    """The shaped game M': same transitions, gamma and terminals, rewards
    ``R_i + F_i``.

    Terminal self-loop rewards are forced back to zero so terminals stay
    absorbing with zero reward; for potential-based F that is a no-op, and
    for arbitrary F a warning reports the forcing.
    """
    if shaping.values.shape != (game.num_players, game.num_states, game.num_states):
        raise DomainError(
            f"shaping shape {shaping.values.shape} does not match game "
            f"({game.num_players}, {game.num_states}, {game.num_states})"
        )
    reward = game.reward + shaping.values[:, :, None, :]
    terminals = sorted(game.terminals)
    if terminals:
        forced = max(
            (abs(shaping.values[i, t, t]) for i in range(game.num_players) for t in terminals),
            default=0.0,
        )
        if forced > STRUCT_TOL:
            warnings.warn(
                f"shaping adds {forced:.3g} on a terminal self-loop; "
                f"forcing terminal rewards back to 0",
                stacklevel=2,
            )
        for t in terminals:
            reward[:, t, :, t] = game.reward[:, t, :, t]
    return StochasticGame(
        num_players=game.num_players,
        states=game.states,
        action_counts=game.action_counts,
        transition=game.transition,
        reward=reward,
        gamma=game.gamma,
        terminals=game.terminals,
        action_names=game.action_names,
    )


def check_offset_identities(
    m: StochasticGame,
    m_prime: StochasticGame,
    phi: PotentialSet,
    solution_m: EquilibriumSolution,
    tol: float = 1e-8,
) -> CheckReport:
    """Machine check of the equilibrium-invariance identities.

    Re-evaluates the solved profile of M on M' and asserts

    * V'_i(s) = V_i(s) - phi_i(s)         (state values offset by phi)
    * Q'_i(s,a) = Q_i(s,a) - phi_i(s)     (action values offset by phi)
    * the profile is still Nash on M' at 10 * tol
    * un-shaping M' with -F reproduces M's rewards  (the reverse direction)

    Precondition failures (wrong M', profile not Nash on M) are reported as
    failed checks rather than raised.
    """
    phi.check_against(m)
    checks: list[CheckResult] = []
    f = potential_to_shaping(phi, m.gamma, terminals=sorted(m.terminals))

    expected_prime = apply_shaping(m, f)
    pre_gap = float(np.max(np.abs(m_prime.reward - expected_prime.reward)))
    structure_ok = (
        m_prime.transition.shape == m.transition.shape
        and float(np.max(np.abs(m_prime.transition - m.transition))) == 0.0
        and m_prime.gamma == m.gamma
        and m_prime.terminals == m.terminals
    )
    checks.append(
        CheckResult(
            "precondition: m_prime = apply_shaping(m, F(phi))",
            structure_ok and pre_gap <= max(tol, STRUCT_TOL),
            pre_gap,
        )
    )

    regrets_m, nash_m = verify_nash(m, solution_m.profile, eps=tol)
    checks.append(
        CheckResult(
            "precondition: solution is Nash on M",
            nash_m,
            float(regrets_m.max()),
        )
    )

    v_prime = evaluate_profile(m_prime, solution_m.profile)
    offset_v = float(np.max(np.abs(v_prime - (solution_m.values - phi.values))))
    checks.append(CheckResult("V' = V - phi", offset_v <= tol, offset_v))

    q_prime = q_from_v(m_prime, v_prime)
    expected_q = solution_m.q - phi.values[:, :, None]
    nonterminal = ~m.terminal_mask
    offset_q = float(np.max(np.abs((q_prime - expected_q)[:, nonterminal, :])))
    checks.append(CheckResult("Q' = Q - phi", offset_q <= tol, offset_q))

    regrets_prime, nash_prime = verify_nash(m_prime, solution_m.profile, eps=10 * tol)
    checks.append(
        CheckResult(
            "profile is Nash on M'",
            nash_prime,
            float(regrets_prime.max()),
        )
    )

    recovered = apply_shaping(m_prime, f.negated())
    unshape_gap = float(np.max(np.abs(recovered.reward - m.reward)))
    checks.append(
        CheckResult(
            "un-shaping M' with -F recovers M",
            unshape_gap <= max(tol, 1e-12),
            unshape_gap,
        )
    )
    return CheckReport(tuple(checks))


def check_eq23(
    m: StochasticGame, solution_m: EquilibriumSolution, tol: float = 1e-8
) -> CheckReport:
    """With phi set to the equilibrium values themselves, the shaped
    action values collapse to the expected one-step shaped reward:

        Q'_i(s,a) = sum_s' T(s,a,s') [R_i(s,a,s') + F_i(s,s')]

    where Q' = Q - phi.  Checks that identity against ``solution_m``.
    """
    values = solution_m.values.copy()
    values[:, m.terminal_mask] = 0.0
    phi = PotentialSet(values)
    f = potential_to_shaping(phi, m.gamma, terminals=sorted(m.terminals))

    one_step = np.einsum(
        "sjt,isjt->isj", m.transition, m.reward + f.values[:, :, None, :]
    )
    q_prime = solution_m.q - phi.values[:, :, None]
    nonterminal = ~m.terminal_mask
    residual = float(np.max(np.abs((q_prime - one_step)[:, nonterminal, :])))
    return CheckReport(
        (
            CheckResult(
                "Q' equals expected one-step shaped reward (phi = V*)",
                residual <= tol,
                residual,
            ),
        )
    )


def classify_shaping(
    f: ShapingFunction,
    gamma: float,
    num_states: int,
    terminals=(),
    tol: float = 1e-8,
) -> tuple[bool, PotentialSet | None, float]:
    """Decide whether ``f`` is potential-based and reconstruct its potentials.

    Fixes phi to zero at terminals and least-squares solves the
    overdetermined system ``F_i(s,s') = gamma * phi_i(s') - phi_i(s)`` over
    all ordered state pairs.  Potential-based iff the max residual is at
    most ``tol``, in which case the reconstructed potentials are returned.
    """
    if f.values.shape[1] != num_states:
        raise DomainError(
            f"shaping is over {f.values.shape[1]} states, expected {num_states}"
        )
    terminal_idx = sorted(int(t) for t in terminals)
    free = [s for s in range(num_states) if s not in terminal_idx]
    n = f.num_players

    # design matrix over free potentials: row per ordered pair (s, s')
    a = np.zeros((num_states * num_states, len(free)))
    col_of = {s: c for c, s in enumerate(free)}
    for s in range(num_states):
        for t in range(num_states):
            row = s * num_states + t
            if t in col_of:
                a[row, col_of[t]] += gamma
            if s in col_of:
                a[row, col_of[s]] -= 1.0

    phi = np.zeros((n, num_states))
    max_residual = 0.0
    for i in range(n):
        b = f.values[i].reshape(-1)
        if free:
            sol, *_ = np.linalg.lstsq(a, b, rcond=None)
            phi[i, free] = sol
            residual = float(np.max(np.abs(a @ sol - b)))
        else:
            residual = float(np.max(np.abs(b)))
        max_residual = max(max_residual, residual)

    if max_residual <= tol:
        return True, PotentialSet(phi), max_residual
    return False, None, max_residual


@dataclass(frozen=True)
class NecessityInstance:
    """The three-state counterexample showing potential form is necessary.

    Player 1 chooses at s1 between jumping straight to the terminal s3
    (reward delta/2) and detouring through s2 (reward 0).  The synthesized
    non-potential shaping puts -delta on the (s1, s3) pair, which flips the
    sign of the action gap: M's equilibrium action at s1 differs from M's
    shaped counterpart whenever delta != 0.
    """

    delta: float
    gamma: float
    game_m: StochasticGame
    game_m_prime: StochasticGame
    shaping: ShapingFunction
    expected_action_m: int         # player 1's equilibrium action at s1 in M
    expected_action_m_prime: int   # ... and in M'

    @property
    def state_s1(self) -> int:
        return 0


def build_necessity_counterexample(
    delta: float,
    gamma: float = 0.9,
    f1: ShapingFunction | None = None,
    num_players: int = 2,
) -> NecessityInstance:
    """Construct the counterexample game pair for a non-potential shaping.

    Transitions are deterministic: s1 --action 0--> s3, s1 --action 1--> s2,
    s2 --> s3, s3 absorbing terminal.  Player 1's only reward is delta/2 on
    reaching s3 from s1; everyone else earns 0 everywhere.  When ``f1`` is
    omitted, a minimal non-potential shaping for player 1 is synthesized
    with all entries 0 except F_1(s1, s3) = -delta, which realizes the
    requested deviation from potential form.  ``delta`` must be nonzero:
    with delta = 0 the shaping is potential-based on this structure and no
    counterexample exists.
    """
    if delta == 0.0:
        raise DomainError(
            "delta must be nonzero: F is potential-based on this structure; "
            "no counterexample exists"
        )
    if not (0.0 < gamma <= 1.0):
        raise DomainError("gamma must be in (0, 1]")
    if num_players < 1:
        raise DomainError("need at least one player")

    states = ("s1", "s2", "s3")
    action_counts = (2,) + (1,) * (num_players - 1)
    action_names = (("a1", "a2"),) + tuple(("a1",) for _ in range(num_players - 1))
    j = int(np.prod(action_counts))  # 2 joint actions, indexed by player 1's move

    transition = np.zeros((3, j, 3))
    transition[0, 0, 2] = 1.0   # s1, action a1 -> s3
    transition[0, 1, 1] = 1.0   # s1, action a2 -> s2
    transition[1, :, 2] = 1.0   # s2 -> s3
    transition[2, :, 2] = 1.0   # s3 absorbing

    reward = np.zeros((num_players, 3, j, 3))
    reward[0, 0, :, 2] = delta / 2.0

    game_m = StochasticGame(
        num_players=num_players,
        states=states,
        action_counts=action_counts,
        transition=transition,
        reward=reward,
        gamma=gamma,
        terminals=frozenset({2}),
        action_names=action_names,
    )

    if f1 is None:
        f_values = np.zeros((num_players, 3, 3))
        f_values[0, 0, 2] = -delta
        shaping = ShapingFunction(f_values)
    else:
        if f1.values.shape != (num_players, 3, 3):
            raise DomainError(
                f"f1 shape {f1.values.shape} != ({num_players}, 3, 3)"
            )
        shaping = f1
        is_potential, _, residual = classify_shaping(
            shaping, gamma, 3, terminals=(2,)
        )
        if is_potential:
            raise DomainError(
                f"supplied shaping is potential-based (residual {residual:.3g}); "
                f"no counterexample exists"
            )

    game_m_prime = apply_shaping(game_m, shaping)

    # action gaps at s1: Q(a1) - Q(a2) has the sign of delta in M and must
    # have the opposite sign in M'
    q_m = game_m.expected_reward()[0, 0]
    q_m_prime = game_m_prime.expected_reward()[0, 0]
    q_m_prime = q_m_prime + gamma * np.array(
        [0.0, float(game_m_prime.reward[0, 1, 0, 2])]
    )
    gap_m = float(q_m[0] - q_m[1])
    gap_m_prime = float(q_m_prime[0] - q_m_prime[1])
    if gap_m * gap_m_prime >= 0.0:
        raise DomainError(
            "supplied shaping does not flip the s1 action on this structure "
            f"(gaps {gap_m:.3g} and {gap_m_prime:.3g})"
        )

    return NecessityInstance(
        delta=float(delta),
        gamma=float(gamma),
        game_m=game_m,
        game_m_prime=game_m_prime,
        shaping=shaping,
        expected_action_m=0 if gap_m > 0 else 1,
        expected_action_m_prime=0 if gap_m_prime > 0 else 1,
    )


def profile_value_offset(
    m: StochasticGame,
    m_prime: StochasticGame,
    phi: PotentialSet,
    profile: PolicyProfile,
) -> float:
    """Sup-norm of ``V'(profile) - V(profile) + phi``; zero in exact
    arithmetic for any stationary profile, not just equilibria."""
    v_m = evaluate_profile(m, profile)
    v_prime = evaluate_profile(m_prime, profile)
    return float(np.max(np.abs(v_prime - v_m + phi.values)))
