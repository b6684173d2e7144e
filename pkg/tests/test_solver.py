"""Stochastic-game solvers: value iteration, Shapley iteration, Nash
verification, pure-profile search, single-state reduction."""

import threading

import numpy as np
import pytest

from gameshape.errors import CancelledError, DomainError, SearchSpaceError
from gameshape.matrix import solve_zero_sum
from gameshape.model import (
    MatrixGame,
    Policy,
    PolicyProfile,
    StochasticGame,
    evaluate_profile,
    single_state_game,
)
from gameshape.solver import (
    mdp_value_iteration,
    pure_stationary_equilibria,
    q_from_v,
    shapley_value_iteration,
    solve_single_state,
    verify_nash,
)

from conftest import (
    bos_matrix,
    make_chain,
    matching_pennies_matrix,
    pd_game,
    pd_matrix,
    random_game,
)


def mp_game(gamma=0.9):
    return single_state_game(matching_pennies_matrix(), gamma)


class TestMdpValueIteration:
    def test_chain(self):
        values, policy = mdp_value_iteration(make_chain())
        assert values[0] == pytest.approx([0.9, 1.0, 0.0], abs=1e-9)

    def test_dominant_action(self):
        # two actions at s0: a1 pays 1 into the terminal, a2 pays 0
        t = np.zeros((2, 2, 2))
        t[0, :, 1] = 1.0
        t[1, :, 1] = 1.0
        r = np.zeros((1, 2, 2, 2))
        r[0, 0, 0, 1] = 1.0
        game = StochasticGame(1, ("s0", "end"), (2,), t, r, 0.9, frozenset({1}))
        values, policy = mdp_value_iteration(game)
        assert values[0, 0] == pytest.approx(1.0, abs=1e-9)
        assert policy.action_choices()[0] == 0

    def test_loop_fixed_point(self):
        # V = max(1 + 0.5 V, 0) -> V = 2, greedy loops
        t = np.zeros((2, 2, 2))
        t[0, 0, 0] = 1.0
        t[0, 1, 1] = 1.0
        t[1, :, 1] = 1.0
        r = np.zeros((1, 2, 2, 2))
        r[0, 0, 0, 0] = 1.0
        game = StochasticGame(1, ("s0", "end"), (2,), t, r, 0.5, frozenset({1}))
        values, policy = mdp_value_iteration(game, tol=1e-10)
        assert values[0, 0] == pytest.approx(2.0, abs=1e-9)
        assert policy.action_choices()[0] == 0

    def test_rejects_multiplayer(self):
        with pytest.raises(DomainError):
            mdp_value_iteration(pd_game())


class TestQFromV:
    def test_zero_values_give_one_step_reward(self):
        game = make_chain()
        q = q_from_v(game, np.zeros((1, 3)))
        assert q[0, 0, 0] == 0.0
        assert q[0, 1, 0] == 1.0

    def test_chain_backup(self):
        game = make_chain()
        v = np.array([[0.9, 1.0, 0.0]])
        q = q_from_v(game, v)
        assert q[0, 0, 0] == pytest.approx(0.9, abs=1e-12)

    def test_terminal_rows_zero(self):
        game = make_chain()
        q = q_from_v(game, np.array([[1.0, 2.0, 3.0]]))
        assert np.all(q[:, 2, :] == 0.0)


class TestShapley:
    def test_matching_pennies_single_state(self):
        sol = shapley_value_iteration(mp_game())
        assert sol.values[0, 0] == pytest.approx(0.0, abs=1e-9)
        assert sol.profile.policies[0].table[0] == pytest.approx([0.5, 0.5], abs=1e-9)
        assert sol.profile.policies[1].table[0] == pytest.approx([0.5, 0.5], abs=1e-9)

    def test_chain_embedded_as_game(self):
        chain = make_chain()
        t = chain.transition
        r = np.concatenate([chain.reward, -chain.reward])
        game = StochasticGame(2, chain.states, (1, 1), t, r, 0.9, frozenset({2}))
        sol = shapley_value_iteration(game)
        assert sol.values[0] == pytest.approx([0.9, 1.0, 0.0], abs=1e-9)

    @pytest.mark.parametrize("seed", range(8))
    def test_random_games_self_verify(self, seed):
        rng = np.random.default_rng(seed)
        game = random_game(rng, num_states=3, actions=2, zero_sum=True)
        sol = shapley_value_iteration(game)
        regrets, is_nash = verify_nash(game, sol.profile, eps=1e-6)
        assert is_nash
        # recorded regrets already reflect the same test
        assert sol.max_regret <= 1e-6

    def test_eq6_consistency(self):
        # V equals the profile-weighted average of Q
        rng = np.random.default_rng(42)
        game = random_game(rng, num_states=4, actions=2, zero_sum=True)
        sol = shapley_value_iteration(game)
        weights = sol.profile.joint_table(game)
        mixed = np.einsum("isj,sj->is", sol.q, weights)
        assert np.max(np.abs(mixed - sol.values)) <= 1e-9

    def test_rejects_general_sum(self):
        with pytest.raises(DomainError):
            shapley_value_iteration(pd_game())

    def test_rejects_gamma_one(self):
        chain = make_chain(gamma=1.0)
        r = np.concatenate([chain.reward, -chain.reward])
        game = StochasticGame(2, chain.states, (1, 1), chain.transition, r, 1.0,
                              frozenset({2}))
        with pytest.raises(DomainError):
            shapley_value_iteration(game)

    def test_contraction_on_iterates(self):
        rng = np.random.default_rng(11)
        game = random_game(rng, num_states=4, actions=2, zero_sum=True)
        sol = shapley_value_iteration(game, tol=1e-12, record_iterates=True)
        final = sol.iterates[-1]
        errors = [float(np.max(np.abs(v - final))) for v in sol.iterates[:-1]]
        checked = 0
        for e_now, e_next in zip(errors, errors[1:]):
            if e_now >= 1e-2:  # above the V*-estimate noise floor
                assert e_next <= game.gamma * e_now + 1e-9
                checked += 1
        assert checked >= 5


class TestVerifyNash:
    def test_pd_cc_regret_four(self):
        # best response earns 5/(1-0.5) = 10 against C, versus 3/(1-0.5) = 6
        game = pd_game()
        cc = PolicyProfile.from_tables(([[1.0, 0.0]], [[1.0, 0.0]]))
        regrets, is_nash = verify_nash(game, cc, eps=1e-8)
        assert regrets == pytest.approx(np.full((2, 1), 4.0), abs=1e-7)
        assert not is_nash

    def test_terminal_only_game(self):
        t = np.ones((1, 1, 1))
        r = np.zeros((1, 1, 1, 1))
        game = StochasticGame(1, ("end",), (1,), t, r, 0.9, frozenset({0}))
        regrets, is_nash = verify_nash(game, PolicyProfile.uniform(game))
        assert is_nash
        assert np.all(regrets == 0.0)

    @pytest.mark.parametrize("seed", range(10))
    def test_regrets_never_below_neg_tolerance(self, seed):
        rng = np.random.default_rng(seed)
        game = random_game(rng, num_states=3, actions=2)
        profile = PolicyProfile.from_tables(
            [rng.dirichlet(np.ones(a), size=game.num_states)
             for a in game.action_counts]
        )
        regrets, _ = verify_nash(game, profile)
        assert regrets.min() >= -1e-9


class TestPureStationarySearch:
    def test_pd_exactly_dd(self):
        eqs = pure_stationary_equilibria(pd_game())
        assert len(eqs) == 1
        acts = tuple(int(p.action_choices()[0]) for p in eqs[0].policies)
        assert acts == (1, 1)

    def test_matching_pennies_empty(self):
        assert pure_stationary_equilibria(mp_game()) == []

    def test_chain_trivial(self):
        eqs = pure_stationary_equilibria(make_chain())
        assert len(eqs) == 1

    def test_guard(self):
        rng = np.random.default_rng(0)
        game = random_game(rng, num_players=2, num_states=12, actions=4,
                           num_terminals=1)
        with pytest.raises(SearchSpaceError):
            pure_stationary_equilibria(game)

    def test_cancellation(self):
        event = threading.Event()
        event.set()
        with pytest.raises(CancelledError):
            pure_stationary_equilibria(pd_game(), cancel=event)

    def test_outputs_reverify(self):
        rng = np.random.default_rng(9)
        game = random_game(rng, num_players=2, num_states=2, actions=2)
        for profile in pure_stationary_equilibria(game, eps=1e-8):
            _, is_nash = verify_nash(game, profile, eps=1e-8)
            assert is_nash


class TestSolveSingleState:
    def test_pd(self):
        sols = solve_single_state(pd_game())
        assert len(sols) == 1
        assert sols[0].values[:, 0] == pytest.approx([2.0, 2.0], abs=1e-9)
        acts = tuple(int(p.action_choices()[0]) for p in sols[0].profile.policies)
        assert acts == (1, 1)

    def test_matching_pennies(self):
        sols = solve_single_state(mp_game())
        assert len(sols) == 1
        assert sols[0].values[:, 0] == pytest.approx([0.0, 0.0], abs=1e-9)
        assert sols[0].profile.policies[0].table[0] == pytest.approx([0.5, 0.5], abs=1e-9)

    def test_bos_three_scaled(self):
        game = single_state_game(bos_matrix(), 0.5)
        sols = solve_single_state(game)
        assert len(sols) == 3
        values = sorted(float(s.values[0, 0]) for s in sols)
        # 2x the matrix-game values (1/(1-0.5))
        assert values == pytest.approx([4 / 3, 2.0, 4.0], abs=1e-9)
        for sol in sols:
            assert sol.max_regret <= 1e-8

    def test_agrees_with_pure_search(self):
        game = pd_game()
        pure = pure_stationary_equilibria(game)
        sols = solve_single_state(game)
        pure_acts = {tuple(int(p.action_choices()[0]) for p in e.policies)
                     for e in pure}
        sol_pure_acts = {
            tuple(int(p.action_choices()[0]) for p in s.profile.policies)
            for s in sols
            if all(p.table[0].max() == 1.0 for p in s.profile.policies)
        }
        assert pure_acts == sol_pure_acts

    def test_rejects_multi_state(self):
        with pytest.raises(DomainError):
            solve_single_state(make_chain())

    def test_rejects_terminating_single_state(self):
        t = np.zeros((2, 1, 2))
        t[0, 0] = [0.5, 0.5]
        t[1, 0, 1] = 1.0
        r = np.zeros((1, 2, 1, 2))
        game = StochasticGame(1, ("s0", "end"), (1,), t, r, 0.9, frozenset({1}))
        with pytest.raises(DomainError):
            solve_single_state(game)

    def test_three_player_pure_only(self):
        payoffs = np.zeros((3, 2, 2, 2))
        payoffs[:, 1, 1, 1] = 1.0
        game = single_state_game(MatrixGame(3, (2, 2, 2), payoffs), 0.5)
        sols = solve_single_state(game)
        acts = {tuple(int(p.action_choices()[0]) for p in s.profile.policies)
                for s in sols}
        assert (1, 1, 1) in acts
