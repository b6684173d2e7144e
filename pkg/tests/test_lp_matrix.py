"""Matrix-game solvers: the simplex LP, support enumeration, pure search."""

import itertools

import numpy as np
import pytest

from gameshape.errors import DomainError
from gameshape.lp import solve_matrix_lp
from gameshape.matrix import (
    best_response_regret,
    pure_equilibria,
    solve_zero_sum,
    support_enumeration,
)
from gameshape.model import MatrixGame

from conftest import bos_matrix, matching_pennies_matrix, pd_matrix


def exhaustive_saddle(a):
    """Oracle: pure saddle points by complete enumeration."""
    saddles = []
    for i, j in itertools.product(range(a.shape[0]), range(a.shape[1])):
        if a[i, j] == a[:, j].max() == a[i, :].min():
            saddles.append((i, j))
    return saddles


def random_zero_sum(rng, m, k):
    a = rng.normal(size=(m, k))
    return MatrixGame(2, (m, k), np.stack([a, -a]), zero_sum=True)


class TestZeroSumLP:
    def test_matching_pennies(self):
        value, p, q = solve_matrix_lp([[1, -1], [-1, 1]])
        assert value == pytest.approx(0.0, abs=1e-12)
        assert p == pytest.approx([0.5, 0.5], abs=1e-12)
        assert q == pytest.approx([0.5, 0.5], abs=1e-12)

    def test_constant_matrix_first_pure_actions(self):
        value, p, q = solve_matrix_lp([[2, 2], [2, 2]])
        assert value == 2.0
        assert list(p) == [1.0, 0.0]
        assert list(q) == [1.0, 0.0]

    def test_pure_saddle(self):
        a = np.array([[3.0, 1.0], [4.0, 2.0]])
        assert exhaustive_saddle(a) == [(1, 1)]  # oracle: saddle at (row 2, col 2)
        value, p, q = solve_matrix_lp(a)
        assert value == pytest.approx(2.0, abs=1e-12)
        assert p == pytest.approx([0.0, 1.0], abs=1e-12)
        assert q == pytest.approx([0.0, 1.0], abs=1e-12)

    @pytest.mark.parametrize("seed", range(30))
    def test_guarantee_property(self, seed):
        # maximin strategy guarantees >= v - tol against every pure column,
        # minimax <= v + tol against every pure row
        rng = np.random.default_rng(seed)
        m, k = int(rng.integers(2, 6)), int(rng.integers(2, 6))
        a = rng.normal(size=(m, k)) * rng.uniform(0.5, 5)
        value, p, q = solve_matrix_lp(a)
        assert (p @ a).min() >= value - 1e-9
        assert (a @ q).max() <= value + 1e-9

    @pytest.mark.parametrize("seed", range(20))
    def test_duality(self, seed):
        # solving the transposed negated game swaps the players
        rng = np.random.default_rng(100 + seed)
        a = rng.normal(size=(3, 4))
        v1, p1, q1 = solve_matrix_lp(a)
        v2, p2, q2 = solve_matrix_lp(-a.T)
        assert v1 == pytest.approx(-v2, abs=1e-9)

    def test_solve_zero_sum_requires_zero_sum(self):
        with pytest.raises(DomainError):
            solve_zero_sum(pd_matrix())

    def test_solve_zero_sum_self_verifies(self):
        eq = solve_zero_sum(matching_pennies_matrix(), tol=1e-9)
        assert eq.max_regret <= 1e-9
        assert eq.values[0] == pytest.approx(0.0, abs=1e-12)

    def test_payoff_translation(self):
        # shifting one player's payoffs by c shifts its value by c and
        # leaves the strategies unchanged
        rng = np.random.default_rng(7)
        a = rng.integers(-4, 5, size=(3, 3)).astype(float)
        g1 = MatrixGame(2, (3, 3), np.stack([a, -a]), zero_sum=True)
        eq1 = solve_zero_sum(g1)
        c = 2.0
        g2 = MatrixGame(2, (3, 3), np.stack([a + c, -a]))
        # the shifted game is no longer zero-sum; use the LP directly
        v1, p1, q1 = solve_matrix_lp(a)
        v2, p2, q2 = solve_matrix_lp(a + c)
        assert v2 == pytest.approx(v1 + c, abs=1e-12)
        assert p2 == pytest.approx(p1, abs=1e-12)
        assert q2 == pytest.approx(q1, abs=1e-12)
        del g2, eq1


class TestBestResponseRegret:
    def test_pd_defect_defect_zero(self):
        game = pd_matrix()
        dd = (np.array([0.0, 1.0]), np.array([0.0, 1.0]))
        assert best_response_regret(game, dd, 0) == 0.0
        assert best_response_regret(game, dd, 1) == 0.0

    def test_pd_cooperate_cooperate(self):
        # deviation to D earns 5 instead of 3
        game = pd_matrix()
        cc = (np.array([1.0, 0.0]), np.array([1.0, 0.0]))
        assert best_response_regret(game, cc, 0) == pytest.approx(2.0)
        assert best_response_regret(game, cc, 1) == pytest.approx(2.0)

    def test_constant_game_zero(self):
        game = MatrixGame(2, (2, 3), np.full((2, 2, 3), 1.5))
        rng = np.random.default_rng(0)
        profile = (rng.dirichlet(np.ones(2)), rng.dirichlet(np.ones(3)))
        assert best_response_regret(game, profile, 0) == 0.0
        assert best_response_regret(game, profile, 1) == 0.0

    def test_invalid_distribution_rejected(self):
        game = pd_matrix()
        with pytest.raises(DomainError):
            best_response_regret(game, ([0.5, 0.4], [1.0, 0.0]), 0)

    def test_three_player_regret(self):
        rng = np.random.default_rng(3)
        game = MatrixGame(3, (2, 2, 2), rng.normal(size=(3, 2, 2, 2)))
        profile = [rng.dirichlet(np.ones(2)) for _ in range(3)]
        for i in range(3):
            assert best_response_regret(game, profile, i) >= 0.0


class TestPureEquilibria:
    def test_pd(self):
        assert pure_equilibria(pd_matrix()) == [(1, 1)]

    def test_matching_pennies_empty(self):
        assert pure_equilibria(matching_pennies_matrix()) == []

    def test_constant_three_player_all(self):
        game = MatrixGame(3, (2, 2, 2), np.zeros((3, 2, 2, 2)))
        assert len(pure_equilibria(game)) == 8


def brute_force_is_equilibrium(game, p, q, grid=101, tol=1e-9):
    """Oracle: no pure deviation improves on the mixed profile."""
    r1, r2 = game.payoffs
    v1 = p @ r1 @ q
    v2 = p @ r2 @ q
    return (r1 @ q).max() <= v1 + tol and (p @ r2).max() <= v2 + tol


class TestSupportEnumeration:
    def test_pd_exactly_dd(self):
        eqs = support_enumeration(pd_matrix())
        assert len(eqs) == 1
        assert eqs[0].strategies[0] == pytest.approx([0.0, 1.0])
        assert eqs[0].strategies[1] == pytest.approx([0.0, 1.0])
        assert eqs[0].values == pytest.approx((1.0, 1.0))

    def test_bos_three_equilibria(self):
        # indifference algebra: p*1 = (1-p)*2 -> p = 2/3; 2q = (1-q) -> q = 1/3
        eqs = support_enumeration(bos_matrix())
        assert len(eqs) == 3
        mixed = [e for e in eqs
                 if not np.isclose(e.strategies[0].max(), 1.0)]
        assert len(mixed) == 1
        assert mixed[0].strategies[0] == pytest.approx([2 / 3, 1 / 3], abs=1e-9)
        assert mixed[0].strategies[1] == pytest.approx([1 / 3, 2 / 3], abs=1e-9)
        assert mixed[0].values == pytest.approx((2 / 3, 2 / 3), abs=1e-9)
        for eq in eqs:
            assert brute_force_is_equilibrium(bos_matrix(), *eq.strategies)

    def test_matching_pennies_matches_lp(self):
        eqs = support_enumeration(matching_pennies_matrix())
        assert len(eqs) == 1
        lp = solve_zero_sum(matching_pennies_matrix())
        assert eqs[0].strategies[0] == pytest.approx(lp.strategies[0], abs=1e-9)
        assert eqs[0].values[0] == pytest.approx(lp.values[0], abs=1e-9)

    def test_requires_two_players(self):
        with pytest.raises(DomainError):
            support_enumeration(MatrixGame(3, (2, 2, 2), np.zeros((3, 2, 2, 2))))

    @pytest.mark.parametrize("seed", range(25))
    def test_all_outputs_verify(self, seed):
        rng = np.random.default_rng(200 + seed)
        m, k = int(rng.integers(2, 5)), int(rng.integers(2, 5))
        game = MatrixGame(2, (m, k), rng.normal(size=(2, m, k)))
        for eq in support_enumeration(game, tol=1e-9):
            assert eq.max_regret <= 1e-9
            assert brute_force_is_equilibrium(game, *eq.strategies)

    @pytest.mark.parametrize("seed", range(15))
    def test_zero_sum_value_agreement(self, seed):
        rng = np.random.default_rng(300 + seed)
        m, k = int(rng.integers(2, 5)), int(rng.integers(2, 5))
        game = random_zero_sum(rng, m, k)
        lp_value = solve_zero_sum(game).values[0]
        eqs = support_enumeration(game, tol=1e-7)
        assert eqs, "zero-sum game must have an equilibrium"
        assert any(abs(eq.values[0] - lp_value) <= 1e-6 for eq in eqs)
