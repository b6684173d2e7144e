"""Multi-agent tabular learning with optional reward shaping.

Minimax-Q (for zero-sum environments) and independent Q-learning (for
single-state general-sum demos) learn from sampled episodes; a comparison
harness runs shaped and unshaped arms from identical seeds, records
exploitability curves against the *original* game, and checks end to end
that both arms' final policies remain equilibria of the unshaped game.

All randomness flows from one seeded generator per trial.  The compiled
trial loop consumes a pre-drawn uniform stream in exactly the order the
Python agents would draw from the generator, so the two paths are
interchangeable and seeded runs are reproducible to the bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, DomainError
from .lp import _zero_sum_kernel, _zero_sum_into
from .matrix import MatrixGame
from .model import PolicyProfile, PotentialSet, StochasticGame
from .envs import Environment, ShapedEnvironment, grid_soccer, repeated_matrix_env
from .shaping import ShapingFunction, potential_to_shaping
from .solver import shapley_value_iteration, solve_single_state, verify_nash

UNIFORMS_PER_STEP = 5  # explore + choice per player, one transition draw


# ---------------------------------------------------------------------------
# schedules


@dataclass(frozen=True)
class Schedules:
    """Exploration and learning-rate schedules for tabular learners.

    Exploration is epsilon-greedy over the announced mixed policy, decaying
    linearly from ``epsilon_start`` to ``epsilon_end`` across the first
    ``epsilon_decay_fraction`` of the episode budget.  The learning rate for
    a table cell visited ``n`` times before is ``1 / (1 + n / alpha_scale)``.
    """

    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_fraction: float = 0.5
    alpha_scale: float = 1000.0

    def epsilon_at(self, episode: int, total_episodes: int) -> float:
        horizon = max(1, int(total_episodes * self.epsilon_decay_fraction))
        if episode >= horizon:
            return self.epsilon_end
        frac = episode / horizon
        return self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)


def _pure_maximin(q_mat: np.ndarray) -> tuple[float, np.ndarray]:
    """Deterministic fallback if the LP ever reports a degenerate tableau."""
    row_mins = q_mat.min(axis=1)
    best = int(row_mins.argmax())
    strat = np.zeros(q_mat.shape[0])
    strat[best] = 1.0
    return float(row_mins[best]), strat


class MinimaxQAgent:
    """Tabular minimax-Q for one player of a 2-player zero-sum environment.

    ``q[s, a_own, a_opp]`` is updated toward ``r + gamma * V(s')`` where
    ``V`` is the minimax value of the agent's own current Q matrix at the
    next state (zero at terminals).  The announced policy is the per-state
    maximin strategy; state values and strategies are cached and recomputed
    lazily after updates.
    """

    def __init__(self, num_states: int, own_actions: int, opp_actions: int,
                 gamma: float, schedules: Schedules):
        self.num_states = num_states
        self.own_actions = own_actions
        self.opp_actions = opp_actions
        self.gamma = gamma
        self.schedules = schedules
        self.q = np.zeros((num_states, own_actions, opp_actions))
        self.visits = np.zeros((num_states, own_actions, opp_actions))
        self.values = np.zeros(num_states)
        self.strategies = np.zeros((num_states, own_actions))
        self.strategies[:, 0] = 1.0
        self.cache_ok = np.zeros(num_states, dtype=np.bool_)

    def _ensure(self, state: int) -> None:
        if not self.cache_ok[state]:
            status, v, p, _ = _zero_sum_kernel(self.q[state])
            if status != 0:  # pragma: no cover - defensive
                v, p = _pure_maximin(self.q[state])
            self.values[state] = v
            self.strategies[state] = p
            self.cache_ok[state] = True

    def strategy(self, state: int) -> np.ndarray:
        self._ensure(state)
        return self.strategies[state]

    def value(self, state: int) -> float:
        self._ensure(state)
        return float(self.values[state])

    def act(self, state: int, rng: np.random.Generator, epsilon: float) -> int:
        u_explore = rng.random()
        u_choice = rng.random()
        if u_explore < epsilon:
            a = int(u_choice * self.own_actions)
            return min(a, self.own_actions - 1)
        strat = self.strategy(state)
        acc = 0.0
        for a in range(self.own_actions):
            acc += strat[a]
            if u_choice < acc:
                return a
        return self.own_actions - 1

    def update(self, state: int, own_action: int, opp_action: int,
               reward: float, next_state: int, terminal: bool) -> None:
        v_next = 0.0 if terminal else self.value(next_state)
        alpha = 1.0 / (1.0 + self.visits[state, own_action, opp_action]
                       / self.schedules.alpha_scale)
        self.visits[state, own_action, opp_action] += 1.0
        self.q[state, own_action, opp_action] = (
            (1.0 - alpha) * self.q[state, own_action, opp_action]
            + alpha * (reward + self.gamma * v_next)
        )
        self.cache_ok[state] = False

    def policy_table(self) -> np.ndarray:
        for s in range(self.num_states):
            self._ensure(s)
        return self.strategies.copy()


class IndependentQAgent:
    """Plain tabular Q-learning over the agent's own actions; opponents are
    treated as part of the environment.  Announced policy is greedy."""

    def __init__(self, num_states: int, own_actions: int, gamma: float,
                 schedules: Schedules):
        self.num_states = num_states
        self.own_actions = own_actions
        self.gamma = gamma
        self.schedules = schedules
        self.q = np.zeros((num_states, own_actions))
        self.visits = np.zeros((num_states, own_actions))

    def act(self, state: int, rng: np.random.Generator, epsilon: float) -> int:
        u_explore = rng.random()
        u_choice = rng.random()
        if u_explore < epsilon:
            return min(int(u_choice * self.own_actions), self.own_actions - 1)
        return int(self.q[state].argmax())

    def update(self, state: int, own_action: int, reward: float,
               next_state: int, terminal: bool) -> None:
        v_next = 0.0 if terminal else float(self.q[next_state].max())
        alpha = 1.0 / (1.0 + self.visits[state, own_action]
                       / self.schedules.alpha_scale)
        self.visits[state, own_action] += 1.0
        self.q[state, own_action] = (
            (1.0 - alpha) * self.q[state, own_action]
            + alpha * (reward + self.gamma * v_next)
        )

    def policy_table(self) -> np.ndarray:
        table = np.zeros((self.num_states, self.own_actions))
        table[np.arange(self.num_states), self.q.argmax(axis=1)] = 1.0
        return table


# ---------------------------------------------------------------------------
# compiled minimax-Q trial loop (mirrors the agents above exactly)


def _minimax_chunk_impl(
    row_ptr, out_state, out_prob, out_r,
    shaping,            # (2, S, S)
    terminal_mask, start_cumsum,
    gamma, alpha_scale, eps_seq, max_steps,
    q0, q1, visits0, visits1,
    val0, val1, strat0, strat1, ok0, ok1,
    uniforms, cursor,
):
    a0 = q0.shape[1]
    a1 = q1.shape[1]
    tab0 = np.zeros((a1 + 1, a0 + a1 + 1))
    basis0 = np.zeros(a1, dtype=np.int64)
    dump0 = np.zeros(a1)
    tab1 = np.zeros((a0 + 1, a0 + a1 + 1))
    basis1 = np.zeros(a0, dtype=np.int64)
    dump1 = np.zeros(a0)
    for ep in range(eps_seq.shape[0]):
        eps = eps_seq[ep]
        s = int(np.searchsorted(start_cumsum, uniforms[cursor], side="right"))
        cursor += 1
        for _ in range(max_steps):
            # player 1 action
            u_e = uniforms[cursor]; u_c = uniforms[cursor + 1]; cursor += 2
            if u_e < eps:
                act0 = min(int(u_c * a0), a0 - 1)
            else:
                if not ok0[s]:
                    status, v = _zero_sum_into(q0[s], tab0, basis0, strat0[s], dump0)
                    val0[s] = v
                    ok0[s] = True
                act0 = a0 - 1
                acc = 0.0
                for a in range(a0):
                    acc += strat0[s, a]
                    if u_c < acc:
                        act0 = a
                        break
            # player 2 action
            u_e = uniforms[cursor]; u_c = uniforms[cursor + 1]; cursor += 2
            if u_e < eps:
                act1 = min(int(u_c * a1), a1 - 1)
            else:
                if not ok1[s]:
                    status, v = _zero_sum_into(q1[s], tab1, basis1, strat1[s], dump1)
                    val1[s] = v
                    ok1[s] = True
                act1 = a1 - 1
                acc = 0.0
                for a in range(a1):
                    acc += strat1[s, a]
                    if u_c < acc:
                        act1 = a
                        break
            # environment transition
            u_t = uniforms[cursor]; cursor += 1
            row = s * (a0 * a1) + act0 * a1 + act1
            lo = row_ptr[row]
            hi = row_ptr[row + 1]
            k = hi - 1
            acc = 0.0
            for idx in range(lo, hi):
                acc += out_prob[idx]
                if u_t < acc:
                    k = idx
                    break
            ns = int(out_state[k])
            r0 = out_r[0, k] + shaping[0, s, ns]
            r1 = out_r[1, k] + shaping[1, s, ns]
            terminal = terminal_mask[ns]

            # player 1 update
            if terminal:
                v_next0 = 0.0
            else:
                if not ok0[ns]:
                    status, v = _zero_sum_into(q0[ns], tab0, basis0, strat0[ns], dump0)
                    val0[ns] = v
                    ok0[ns] = True
                v_next0 = val0[ns]
            alpha = 1.0 / (1.0 + visits0[s, act0, act1] / alpha_scale)
            visits0[s, act0, act1] += 1.0
            q0[s, act0, act1] = (1.0 - alpha) * q0[s, act0, act1] \
                + alpha * (r0 + gamma * v_next0)
            ok0[s] = False

            # player 2 update (its own Q is indexed own-action first)
            if terminal:
                v_next1 = 0.0
            else:
                if not ok1[ns]:
                    status, v = _zero_sum_into(q1[ns], tab1, basis1, strat1[ns], dump1)
                    val1[ns] = v
                    ok1[ns] = True
                v_next1 = val1[ns]
            alpha = 1.0 / (1.0 + visits1[s, act1, act0] / alpha_scale)
            visits1[s, act1, act0] += 1.0
            q1[s, act1, act0] = (1.0 - alpha) * q1[s, act1, act0] \
                + alpha * (r1 + gamma * v_next1)
            ok1[s] = False

            s = ns
            if terminal:
                break
    return cursor


def _minimax_zs_chunk_impl(
    row_ptr, out_state, out_prob, out_r,
    shaping0,           # (S, S); player 2's shaping is its exact negation
    terminal_mask, start_cumsum,
    gamma, alpha_scale, eps_seq, max_steps,
    q0, visits0,
    val0, val1, strat0, strat1, ok0,
    uniforms, cursor,
):
    """Shared-table minimax-Q for zero-sum play (including zero-sum shaping).

    Player 2's table would stay the exact negated transpose of player 1's,
    so one LP per state serves both: value and row strategy for player 1,
    the dual for player 2.  Uniform consumption matches the two-table loop.
    """
    a0 = q0.shape[1]
    a1 = q0.shape[2]
    tab0 = np.zeros((a1 + 1, a0 + a1 + 1))
    basis0 = np.zeros(a1, dtype=np.int64)
    for ep in range(eps_seq.shape[0]):
        eps = eps_seq[ep]
        s = int(np.searchsorted(start_cumsum, uniforms[cursor], side="right"))
        cursor += 1
        for _ in range(max_steps):
            u_e = uniforms[cursor]; u_c = uniforms[cursor + 1]; cursor += 2
            if u_e < eps:
                act0 = min(int(u_c * a0), a0 - 1)
            else:
                if not ok0[s]:
                    status, v = _zero_sum_into(q0[s], tab0, basis0, strat0[s], strat1[s])
                    val0[s] = v
                    val1[s] = -v
                    ok0[s] = True
                act0 = a0 - 1
                acc = 0.0
                for a in range(a0):
                    acc += strat0[s, a]
                    if u_c < acc:
                        act0 = a
                        break
            u_e = uniforms[cursor]; u_c = uniforms[cursor + 1]; cursor += 2
            if u_e < eps:
                act1 = min(int(u_c * a1), a1 - 1)
            else:
                if not ok0[s]:
                    status, v = _zero_sum_into(q0[s], tab0, basis0, strat0[s], strat1[s])
                    val0[s] = v
                    val1[s] = -v
                    ok0[s] = True
                act1 = a1 - 1
                acc = 0.0
                for a in range(a1):
                    acc += strat1[s, a]
                    if u_c < acc:
                        act1 = a
                        break
            u_t = uniforms[cursor]; cursor += 1
            row = s * (a0 * a1) + act0 * a1 + act1
            lo = row_ptr[row]
            hi = row_ptr[row + 1]
            k = hi - 1
            acc = 0.0
            for idx in range(lo, hi):
                acc += out_prob[idx]
                if u_t < acc:
                    k = idx
                    break
            ns = int(out_state[k])
            r0 = out_r[0, k] + shaping0[s, ns]
            terminal = terminal_mask[ns]

            if terminal:
                v_next = 0.0
            else:
                if not ok0[ns]:
                    status, v = _zero_sum_into(q0[ns], tab0, basis0, strat0[ns], strat1[ns])
                    val0[ns] = v
                    val1[ns] = -v
                    ok0[ns] = True
                v_next = val0[ns]
            alpha = 1.0 / (1.0 + visits0[s, act0, act1] / alpha_scale)
            visits0[s, act0, act1] += 1.0
            q0[s, act0, act1] = (1.0 - alpha) * q0[s, act0, act1] \
                + alpha * (r0 + gamma * v_next)
            ok0[s] = False

            s = ns
            if terminal:
                break
    return cursor


def _refresh_impl(q, val, strat, ok):
    for s in range(q.shape[0]):
        if not ok[s]:
            status, v, p, _ = _zero_sum_kernel(q[s])
            val[s] = v
            for a in range(q.shape[1]):
                strat[s, a] = p[a]
            ok[s] = True


def _refresh_zs_impl(q0, val0, val1, strat0, strat1, ok0):
    for s in range(q0.shape[0]):
        if not ok0[s]:
            status, v, p, qd = _zero_sum_kernel(q0[s])
            val0[s] = v
            val1[s] = -v
            for a in range(q0.shape[1]):
                strat0[s, a] = p[a]
            for a in range(q0.shape[2]):
                strat1[s, a] = qd[a]
            ok0[s] = True


try:  # pragma: no cover
    from numba import njit

    _minimax_chunk = njit(cache=True)(_minimax_chunk_impl)
    _minimax_zs_chunk = njit(cache=True)(_minimax_zs_chunk_impl)
    _refresh_policies = njit(cache=True)(_refresh_impl)
    _refresh_zs = njit(cache=True)(_refresh_zs_impl)
except ImportError:  # pragma: no cover
    _minimax_chunk = _minimax_chunk_impl
    _minimax_zs_chunk = _minimax_zs_chunk_impl
    _refresh_policies = _refresh_impl
    _refresh_zs = _refresh_zs_impl


# ---------------------------------------------------------------------------
# comparison harness


@dataclass(frozen=True)
class CurveRecord:
    episode: int
    exploitability: tuple[float, ...]   # per player, max regret over states
    value_error: tuple[float, ...]      # per player, phi-corrected sup norm


@dataclass(frozen=True)
class LearningCurve:
    arm: str                            # "shaped" | "unshaped"
    trial: int
    seed: int
    records: tuple[CurveRecord, ...]

    def __post_init__(self):
        episodes = [r.episode for r in self.records]
        if any(b <= a for a, b in zip(episodes, episodes[1:])):
            raise DomainError("curve episode indices must be strictly increasing")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a shaped-vs-unshaped comparison needs, seeds included."""

    environment: str                    # "grid_soccer" | "repeated_matrix"
    env_params: dict = field(default_factory=dict)
    agent: str = "minimax_q"            # | "independent_q"
    schedules: Schedules = Schedules()
    potential_source: str = "solver"    # | "file" | "zero"
    potential_path: str | None = None
    trials: int = 5
    seed_base: int = 0
    episodes: int = 2000
    max_steps_per_episode: int = 100
    record_interval: int = 500
    epsilon_learn: float = 0.1
    curves_path: str | None = None
    summary_path: str | None = None


def build_environment(config: ExperimentConfig) -> Environment:
    params = dict(config.env_params)
    if config.environment == "grid_soccer":
        _, env = grid_soccer(
            gamma=params.get("gamma", 0.9), start=params.get("start", "uniform")
        )
        return env
    if config.environment == "repeated_matrix":
        payoffs = np.asarray(params["payoffs"], dtype=float)
        counts = tuple(payoffs.shape[1:])
        mg = MatrixGame(payoffs.shape[0], counts, payoffs)
        return repeated_matrix_env(mg, gamma=params["gamma"])
    raise ConfigError(f"unknown environment {config.environment!r}")


def solve_model_game(game: StochasticGame, tol: float = 1e-9):
    """Equilibrium of the model game for metrics and phi = V*: Shapley for
    zero-sum games, the matrix reduction for single-state games."""
    nonterminal = int((~game.terminal_mask).sum())
    if game.num_players == 2 and game.is_zero_sum() and game.gamma < 1.0 \
            and nonterminal > 1:
        return shapley_value_iteration(game, tol=tol)
    if nonterminal == 1:
        solutions = solve_single_state(game, tol=tol)
        if not solutions:
            raise ConfigError("model game has no computable equilibrium")
        return solutions[0]
    raise ConfigError(
        "model game is neither zero-sum nor single-state; supply an explicit "
        "potential file instead of potential_source='solver'"
    )


def _sampling_potential(env: Environment, phi_model: PotentialSet) -> PotentialSet:
    """Lift model-state potentials onto sampling states (pseudo-states get 0)."""
    values = np.zeros((env.num_players, env.num_states))
    for s in range(env.num_states):
        m = env.model_state_of[s]
        if m >= 0:
            values[:, s] = phi_model.values[:, m]
    values[:, env.terminal_mask] = 0.0
    return PotentialSet(values)


def _announced_profile(env: Environment, tables: Sequence[np.ndarray]) -> PolicyProfile:
    """Map per-sampling-state strategy tables onto the model game's states."""
    game = env.model_game
    model_tables = []
    for i, table in enumerate(tables):
        mt = np.zeros((game.num_states, game.action_counts[i]))
        mt[:, 0] = 1.0
        for s in range(env.num_states):
            m = env.model_state_of[s]
            if m >= 0:
                mt[m] = table[s]
        model_tables.append(mt)
    return PolicyProfile.from_tables(model_tables)


class _MinimaxTrialState:
    """Learner tables for one compiled minimax-Q trial.

    In ``shared`` mode (zero-sum play, player 2's shaping the exact negation
    of player 1's) a single joint table is kept and player 2's values and
    strategies come from the LP dual, as in Shapley iteration.
    """

    def __init__(self, env: Environment, shared: bool = False):
        s, (a0, a1) = env.num_states, env.action_counts
        self.shared = shared
        self.q0 = np.zeros((s, a0, a1))
        self.visits0 = np.zeros((s, a0, a1))
        self.val0 = np.zeros(s)
        self.val1 = np.zeros(s)
        self.strat0 = np.zeros((s, a0))
        self.strat1 = np.zeros((s, a1))
        self.strat0[:, 0] = 1.0
        self.strat1[:, 0] = 1.0
        self.ok0 = np.zeros(s, dtype=np.bool_)
        if shared:
            self.q1 = None
            self.visits1 = None
            self.ok1 = None
        else:
            self.q1 = np.zeros((s, a1, a0))
            self.visits1 = np.zeros((s, a1, a0))
            self.ok1 = np.zeros(s, dtype=np.bool_)

    def refresh(self):
        if self.shared:
            _refresh_zs(self.q0, self.val0, self.val1,
                        self.strat0, self.strat1, self.ok0)
        else:
            _refresh_policies(self.q0, self.val0, self.strat0, self.ok0)
            _refresh_policies(self.q1, self.val1, self.strat1, self.ok1)

    def tables(self):
        self.refresh()
        return self.strat0.copy(), self.strat1.copy()

    def values(self):
        self.refresh()
        return self.val0.copy(), self.val1.copy()


def _run_minimax_trial(
    env: Environment,
    shaping_values: np.ndarray,
    config: ExperimentConfig,
    seed: int,
    v_star: np.ndarray,
    phi_model: PotentialSet,
    shaped: bool,
):
    """One seeded minimax-Q trial; returns (records, final profile)."""
    shared = bool(
        env.model_game.is_zero_sum()
        and np.array_equal(shaping_values[1], -shaping_values[0])
    )
    state = _MinimaxTrialState(env, shared=shared)
    rng = np.random.Generator(np.random.PCG64(seed))
    per_episode = 1 + config.max_steps_per_episode * UNIFORMS_PER_STEP
    game = env.model_game
    sched = config.schedules

    records: list[CurveRecord] = []

    def record(episode_idx: int):
        tables = state.tables()
        profile = _announced_profile(env, tables)
        regrets, _ = verify_nash(game, profile, eps=config.epsilon_learn)
        exploit = regrets.max(axis=1)
        val0, val1 = state.values()
        errors = []
        for i, vals in enumerate((val0, val1)):
            v_hat = np.zeros(game.num_states)
            for s in range(env.num_states):
                m = env.model_state_of[s]
                if m >= 0:
                    v_hat[m] = vals[s]
            if shaped:
                v_hat = v_hat + phi_model.values[i]
            diff = np.abs(v_hat - v_star[i])[~game.terminal_mask]
            errors.append(float(diff.max()) if diff.size else 0.0)
        records.append(
            CurveRecord(
                episode=episode_idx,
                exploitability=tuple(float(x) for x in exploit),
                value_error=tuple(errors),
            )
        )
        return profile

    # sub-chunk so the pre-drawn uniform arrays stay small
    max_chunk = max(1, min(20_000, (2 ** 22) // per_episode))
    done = 0
    profile = None
    next_record = min(config.record_interval, config.episodes)
    while done < config.episodes:
        chunk = min(max_chunk, next_record - done)
        eps_seq = np.array(
            [sched.epsilon_at(done + k, config.episodes) for k in range(chunk)]
        )
        uniforms = rng.random(chunk * per_episode)
        if shared:
            _minimax_zs_chunk(
                env.row_ptr, env.out_state, env.out_prob, env.out_reward,
                shaping_values[0],
                env.terminal_mask, env.start_cumsum,
                env.agent_discount, sched.alpha_scale, eps_seq,
                config.max_steps_per_episode,
                state.q0, state.visits0,
                state.val0, state.val1, state.strat0, state.strat1, state.ok0,
                uniforms, 0,
            )
        else:
            _minimax_chunk(
                env.row_ptr, env.out_state, env.out_prob, env.out_reward,
                shaping_values,
                env.terminal_mask, env.start_cumsum,
                env.agent_discount, sched.alpha_scale, eps_seq,
                config.max_steps_per_episode,
                state.q0, state.q1, state.visits0, state.visits1,
                state.val0, state.val1, state.strat0, state.strat1,
                state.ok0, state.ok1,
                uniforms, 0,
            )
        done += chunk
        if done >= next_record:
            profile = record(done)
            next_record = min(next_record + config.record_interval, config.episodes)
    return records, profile


def _run_independent_trial(
    env: Environment,
    shaping: ShapingFunction | None,
    config: ExperimentConfig,
    seed: int,
    v_star: np.ndarray,
    phi_model: PotentialSet,
    shaped: bool,
):
    """One seeded independent-Q trial (pure Python; meant for small games)."""
    rng = np.random.Generator(np.random.PCG64(seed))
    run_env = ShapedEnvironment(env, shaping) if shaped and shaping is not None else env
    sched = config.schedules
    agents = [
        IndependentQAgent(env.num_states, a, env.agent_discount, sched)
        for a in env.action_counts
    ]
    game = env.model_game
    records: list[CurveRecord] = []

    def record(episode_idx: int):
        tables = [agent.policy_table() for agent in agents]
        profile = _announced_profile(env, tables)
        regrets, _ = verify_nash(game, profile, eps=config.epsilon_learn)
        exploit = regrets.max(axis=1)
        errors = []
        for i, agent in enumerate(agents):
            v_hat = np.zeros(game.num_states)
            for s in range(env.num_states):
                m = env.model_state_of[s]
                if m >= 0:
                    v_hat[m] = agent.q[s].max()
            if shaped:
                v_hat = v_hat + phi_model.values[i]
            diff = np.abs(v_hat - v_star[i])[~game.terminal_mask]
            errors.append(float(diff.max()) if diff.size else 0.0)
        records.append(CurveRecord(episode_idx, tuple(map(float, exploit)), tuple(errors)))
        return profile

    profile = None
    for episode in range(config.episodes):
        eps = sched.epsilon_at(episode, config.episodes)
        s = run_env.reset(rng)
        for _ in range(config.max_steps_per_episode):
            actions = tuple(agent.act(s, rng, eps) for agent in agents)
            ns, rewards, terminal = run_env.step(actions, rng)
            for i, agent in enumerate(agents):
                agent.update(s, actions[i], float(rewards[i]), ns, terminal)
            s = ns
            if terminal:
                break
        if (episode + 1) % config.record_interval == 0 or episode + 1 == config.episodes:
            profile = record(episode + 1)
    return records, profile


def run_comparison(config: ExperimentConfig, phi_file: PotentialSet | None = None):
    """Run shaped and unshaped arms and summarize.

    Returns ``(shaped_curves, unshaped_curves, summary)``.  The summary
    reports per-arm median episodes to reach ``epsilon_learn``
    exploitability (speedup is reported, never asserted) and whether every
    trial's final policy verifies on the original game at ``epsilon_learn``
    (the policy-invariance check, which callers should treat as hard).
    """
    env = build_environment(config)
    game = env.model_game
    solution = solve_model_game(game)
    v_star = solution.values

    if config.potential_source == "solver":
        phi_vals = solution.values.copy()
        phi_vals[:, game.terminal_mask] = 0.0
        phi_model = PotentialSet(phi_vals)
    elif config.potential_source == "zero":
        phi_model = PotentialSet.zeros(game.num_players, game.num_states)
    elif config.potential_source == "file":
        if phi_file is None:
            raise ConfigError("potential_source='file' needs a loaded potential")
        phi_file.check_against(game)
        phi_model = phi_file
    else:
        raise ConfigError(f"unknown potential source {config.potential_source!r}")

    phi_sampling = _sampling_potential(env, phi_model)
    shaping = potential_to_shaping(
        phi_sampling, env.agent_discount,
        terminals=np.flatnonzero(env.terminal_mask),
    )
    zero_shaping = np.zeros_like(shaping.values)

    curves = {"unshaped": [], "shaped": []}
    final_ok = {"unshaped": [], "shaped": []}
    episodes_to_threshold = {"unshaped": [], "shaped": []}

    for arm in ("unshaped", "shaped"):
        for trial in range(config.trials):
            seed = config.seed_base + trial
            if config.agent == "minimax_q":
                if game.num_players != 2 or not game.is_zero_sum():
                    raise ConfigError("minimax_q needs a 2-player zero-sum game")
                records, profile = _run_minimax_trial(
                    env,
                    shaping.values if arm == "shaped" else zero_shaping,
                    config, seed, v_star, phi_model, arm == "shaped",
                )
            elif config.agent == "independent_q":
                records, profile = _run_independent_trial(
                    env, shaping if arm == "shaped" else None,
                    config, seed, v_star, phi_model, arm == "shaped",
                )
            else:
                raise ConfigError(f"unknown agent {config.agent!r}")

            curves[arm].append(
                LearningCurve(arm=arm, trial=trial, seed=seed, records=tuple(records))
            )
            crossed = next(
                (r.episode for r in records
                 if max(r.exploitability) <= config.epsilon_learn),
                None,
            )
            episodes_to_threshold[arm].append(crossed)
            final = records[-1]
            final_ok[arm].append(max(final.exploitability) <= config.epsilon_learn)

    def median_or_none(xs):
        # trials that never crossed count as infinity; the median is
        # reported when at least half the trials crossed
        vals = [np.inf if x is None else x for x in xs]
        med = float(np.median(vals)) if vals else np.inf
        return None if not np.isfinite(med) else med

    medians = {arm: median_or_none(episodes_to_threshold[arm])
               for arm in ("unshaped", "shaped")}
    ratio = None
    if medians["unshaped"] and medians["shaped"]:
        ratio = medians["unshaped"] / medians["shaped"]

    summary = {
        "environment": config.environment,
        "agent": config.agent,
        "trials": config.trials,
        "episodes": config.episodes,
        "epsilon_learn": config.epsilon_learn,
        "episodes_to_threshold": episodes_to_threshold,
        "median_episodes_to_threshold": medians,
        "speedup_ratio_unshaped_over_shaped": ratio,
        "final_policy_verifies": final_ok,
        "invariance_holds": all(final_ok["unshaped"]) and all(final_ok["shaped"]),
    }
    return curves["shaped"], curves["unshaped"], summary
