"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines and the learning summary.  Criterion 8 runs the full pinned-seed
soccer comparison and takes most of the suite's runtime.
"""

import functools
import json
import time

import numpy as np
import pytest

from gameshape import io as gio
from gameshape.cli import main
from gameshape.errors import DomainError
from gameshape.learn import ExperimentConfig, Schedules, run_comparison
from gameshape.matrix import solve_zero_sum, support_enumeration
from gameshape.model import (
    MatrixGame,
    PolicyProfile,
    PotentialSet,
    evaluate_profile,
)
from gameshape.shaping import (
    ShapingFunction,
    apply_shaping,
    build_necessity_counterexample,
    check_eq23,
    classify_shaping,
    potential_to_shaping,
)
from gameshape.solver import (
    EquilibriumSolution,
    mdp_value_iteration,
    pure_stationary_equilibria,
    q_from_v,
    shapley_value_iteration,
    verify_nash,
)

from conftest import (
    bos_matrix,
    fixture_path,
    make_chain,
    pd_matrix,
    random_game,
    random_potentials,
)


def criterion(number, label):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"\nACCEPTANCE {number} ({label}): FAIL")
                raise
            print(f"\nACCEPTANCE {number} ({label}): PASS")
        return run
    return wrap


def _random_zero_sum_game(rng):
    return random_game(
        rng,
        num_players=2,
        num_states=int(rng.integers(2, 5)),
        actions=int(rng.integers(2, 4)),
        gamma=0.9,
        num_terminals=int(rng.integers(0, 2)),
        zero_sum=True,
    )


@criterion(1, "Theorem-1 sufficiency on 100 random games")
def test_criterion_1_sufficiency():
    started = time.monotonic()
    rng = np.random.default_rng(20_260_801)
    for _ in range(100):
        game = _random_zero_sum_game(rng)
        solution = shapley_value_iteration(game)
        phi = PotentialSet(random_potentials(rng, game))
        shaping = potential_to_shaping(phi, game.gamma, sorted(game.terminals))
        shaped = apply_shaping(game, shaping)

        _, is_nash = verify_nash(shaped, solution.profile, eps=1e-6)
        assert is_nash, "equilibrium of M must verify on M'"

        v_prime = evaluate_profile(shaped, solution.profile)
        v_gap = float(np.max(np.abs(v_prime - (solution.values - phi.values))))
        assert v_gap <= 1e-6, f"|V' - (V - phi)| = {v_gap:.3e}"

        q_prime = q_from_v(shaped, v_prime)
        q_gap = float(np.max(np.abs(q_prime - (solution.q - phi.values[:, :, None]))))
        assert q_gap <= 1e-6, f"|Q' - (Q - phi)| = {q_gap:.3e}"
    elapsed = time.monotonic() - started
    assert elapsed <= 60.0, f"criterion 1 took {elapsed:.1f}s"


@criterion(2, "profile-value offset on 1000 random triples")
def test_criterion_2_profile_offset():
    rng = np.random.default_rng(20_260_802)
    for _ in range(1000):
        game = random_game(
            rng,
            num_players=2,
            num_states=int(rng.integers(2, 5)),
            actions=2,
            gamma=0.9,
            num_terminals=int(rng.integers(0, 2)),
        )
        phi = PotentialSet(random_potentials(rng, game))
        shaped = apply_shaping(
            game, potential_to_shaping(phi, game.gamma, sorted(game.terminals))
        )
        profile = PolicyProfile.from_tables(
            [rng.dirichlet(np.ones(a), size=game.num_states)
             for a in game.action_counts]
        )
        v_m = evaluate_profile(game, profile)
        v_mp = evaluate_profile(shaped, profile)
        offset = float(np.max(np.abs(v_mp - v_m + phi.values)))
        assert offset <= 1e-9, f"profile offset {offset:.3e}"

        regrets_m, _ = verify_nash(game, profile)
        regrets_mp, _ = verify_nash(shaped, profile)
        gap = float(np.max(np.abs(regrets_m - regrets_mp)))
        assert gap <= 2e-9, f"regret disagreement {gap:.3e}"


@criterion(3, "Theorem-1 necessity counterexamples")
def test_criterion_3_necessity():
    for delta in (2.0, -2.0, 0.1, -0.1):
        for gamma in (0.5, 0.9, 1.0):
            inst = build_necessity_counterexample(delta, gamma)
            for game, expected in (
                (inst.game_m, inst.expected_action_m),
                (inst.game_m_prime, inst.expected_action_m_prime),
            ):
                equilibria = pure_stationary_equilibria(game, eps=1e-9)
                assert equilibria, f"no equilibria at delta={delta} gamma={gamma}"
                actions = {
                    int(p.policies[0].action_choices()[0]) for p in equilibria
                }
                assert actions == {expected}, (
                    f"delta={delta} gamma={gamma}: solver found s1 actions "
                    f"{actions}, predicted {expected}"
                )
            assert inst.expected_action_m != inst.expected_action_m_prime
    with pytest.raises(DomainError):
        build_necessity_counterexample(0.0)


def _chain_solution():
    game = make_chain()
    values, policy = mdp_value_iteration(game, tol=1e-12)
    profile = PolicyProfile((policy,))
    regrets, _ = verify_nash(game, profile)
    return game, EquilibriumSolution(
        profile=profile, values=values, q=q_from_v(game, values),
        regrets=regrets, method="pure-search",
    )


@criterion(4, "one-step shaped reward identity (phi = V*)")
def test_criterion_4_eq23():
    rng = np.random.default_rng(20_260_804)
    for _ in range(25):
        game = _random_zero_sum_game(rng)
        solution = shapley_value_iteration(game)
        report = check_eq23(game, solution, tol=1e-8)
        assert report.ok, str(report)
    game, solution = _chain_solution()
    report = check_eq23(game, solution, tol=1e-12)
    assert report.ok, str(report)


@criterion(5, "matrix-solver cross-oracles")
def test_criterion_5_matrix_oracles():
    rng = np.random.default_rng(20_260_805)
    for _ in range(200):
        m, k = int(rng.integers(2, 5)), int(rng.integers(2, 5))
        payoff = rng.normal(size=(m, k))
        game = MatrixGame(2, (m, k), np.stack([payoff, -payoff]), zero_sum=True)
        lp_value = solve_zero_sum(game).values[0]
        equilibria = support_enumeration(game, tol=1e-7)
        assert equilibria, "support enumeration found nothing on a zero-sum game"
        assert any(abs(eq.values[0] - lp_value) <= 1e-6 for eq in equilibria), (
            f"no support-enumeration value within 1e-6 of the LP value {lp_value}"
        )

    bos_eqs = support_enumeration(bos_matrix())
    assert len(bos_eqs) == 3
    mixed = [e for e in bos_eqs if 0.0 < e.strategies[0][0] < 1.0]
    assert len(mixed) == 1
    assert mixed[0].strategies[0] == pytest.approx([2 / 3, 1 / 3], abs=1e-9)
    assert mixed[0].strategies[1] == pytest.approx([1 / 3, 2 / 3], abs=1e-9)

    pd_eqs = support_enumeration(pd_matrix())
    assert len(pd_eqs) == 1
    assert pd_eqs[0].strategies[0] == pytest.approx([0.0, 1.0], abs=0)
    assert pd_eqs[0].strategies[1] == pytest.approx([0.0, 1.0], abs=0)


@criterion(6, "Shapley iteration contracts at rate gamma")
def test_criterion_6_contraction():
    # per-sweep error ratios are checked down to error 2e-3; below that the
    # +-5e-13 uncertainty of the V* estimate could inflate a ratio past the
    # 1e-9 slack, so smaller errors carry no information about the rate
    rng = np.random.default_rng(20_260_806)
    total_checked = 0
    for _ in range(20):
        game = _random_zero_sum_game(rng)
        solution = shapley_value_iteration(game, tol=1e-12, record_iterates=True)
        final = solution.iterates[-1]
        errors = [float(np.max(np.abs(v - final))) for v in solution.iterates[:-1]]
        for e_now, e_next in zip(errors, errors[1:]):
            if e_now >= 2e-3:
                assert e_next <= game.gamma * e_now + 1e-9, (
                    f"ratio {e_next / e_now:.12f} exceeds gamma={game.gamma}"
                )
                total_checked += 1
    assert total_checked >= 100, "too few sweeps above the measurement floor"


@criterion(7, "shaping classification round-trips and perturbations")
def test_criterion_7_classify():
    rng = np.random.default_rng(20_260_807)
    for _ in range(100):
        num_states = int(rng.integers(2, 6))
        terminals = [num_states - 1]
        phi_vals = rng.normal(size=(2, num_states))
        phi_vals[:, terminals] = 0.0
        gamma = float(rng.uniform(0.3, 1.0))
        shaping = potential_to_shaping(PotentialSet(phi_vals), gamma, terminals)
        is_potential, _, residual = classify_shaping(
            shaping, gamma, num_states, terminals=terminals
        )
        assert is_potential
        assert residual <= 1e-10, f"round-trip residual {residual:.3e}"

    for _ in range(100):
        num_states = int(rng.integers(2, 6))
        terminals = [num_states - 1]
        phi_vals = rng.normal(size=(2, num_states))
        phi_vals[:, terminals] = 0.0
        gamma = float(rng.uniform(0.3, 1.0))
        values = potential_to_shaping(
            PotentialSet(phi_vals), gamma, terminals
        ).values.copy()
        s = int(rng.integers(num_states - 1))
        t = int(rng.integers(num_states - 1))
        sign = 1.0 if rng.random() < 0.5 else -1.0
        values[0, s, t] += sign * float(rng.uniform(1e-3, 1e-1))
        is_potential, _, _ = classify_shaping(
            ShapingFunction(values), gamma, num_states, terminals=terminals
        )
        assert not is_potential, "perturbed shaping misclassified as potential"


@criterion(8, "end-to-end learning invariance on grid soccer")
def test_criterion_8_learning(soccer):
    started = time.monotonic()
    config = ExperimentConfig(
        environment="grid_soccer",
        agent="minimax_q",
        schedules=Schedules(
            epsilon_start=1.0,
            epsilon_end=0.1,
            epsilon_decay_fraction=1.0,
            alpha_scale=2.0,
        ),
        potential_source="solver",
        trials=20,
        seed_base=0,
        episodes=2_000_000,
        max_steps_per_episode=40,
        record_interval=500_000,
        epsilon_learn=0.1,
    )
    shaped, unshaped, summary = run_comparison(config)
    elapsed = time.monotonic() - started

    print(f"\n  runtime: {elapsed:.0f}s")
    for arm, curves in (("unshaped", unshaped), ("shaped", shaped)):
        finals = [max(c.records[-1].exploitability) for c in curves]
        print(f"  {arm} final exploitabilities: "
              + " ".join(f"{x:.3f}" for x in finals))
    print(f"  median episodes to threshold: "
          f"{summary['median_episodes_to_threshold']}")
    print(f"  speedup ratio (unshaped/shaped): "
          f"{summary['speedup_ratio_unshaped_over_shaped']}")

    assert elapsed <= 600.0, f"criterion 8 took {elapsed:.0f}s > 10 min"
    assert summary["median_episodes_to_threshold"] is not None
    for arm in ("unshaped", "shaped"):
        finals = [max(c.records[-1].exploitability)
                  for c in (unshaped if arm == "unshaped" else shaped)]
        bad = [i for i, x in enumerate(finals) if x > config.epsilon_learn]
        assert not bad, (
            f"{arm} trials {bad} ended above exploitability "
            f"{config.epsilon_learn}: {[round(finals[i], 3) for i in bad]}"
        )
    assert summary["invariance_holds"]


@criterion(9, "seeded commands are byte-deterministic")
def test_criterion_9_determinism(tmp_path):
    # counterexample twice
    outputs = []
    for run in range(2):
        out_dir = tmp_path / f"cex{run}"
        assert main(["counterexample", "--delta", "2", "-o", str(out_dir)]) == 0
        outputs.append({
            name: (out_dir / name).read_bytes()
            for name in ("m.json", "m_prime.json", "shaping.json", "report.json")
        })
    assert outputs[0] == outputs[1]

    # shape twice
    shaped_files = []
    for run in range(2):
        out = tmp_path / f"shaped{run}.json"
        assert main([
            "shape", fixture_path("chain.json"),
            "--potential", fixture_path("chain_potential.json"),
            "-o", str(out),
        ]) == 0
        shaped_files.append(out.read_bytes())
    assert shaped_files[0] == shaped_files[1]

    # a seeded learn run twice
    config = {
        "version": "1",
        "environment": {
            "id": "repeated_matrix",
            "params": {
                "payoffs": [[[1, -1], [-1, 1]], [[-1, 1], [1, -1]]],
                "gamma": 0.9,
            },
        },
        "agent": {"id": "minimax_q", "alpha_scale": 50.0},
        "potential": {"source": "solver"},
        "trials": 2,
        "seed_base": 7,
        "episodes": 500,
        "max_steps_per_episode": 200,
        "record_interval": 250,
        "epsilon_learn": 0.1,
    }
    results = []
    for run in range(2):
        curves = tmp_path / f"curves{run}.csv"
        summary = tmp_path / f"summary{run}.json"
        config["output"] = {"curves": str(curves), "summary": str(summary)}
        cfg_path = tmp_path / f"cfg{run}.json"
        cfg_path.write_text(json.dumps(config))
        assert main(["learn", str(cfg_path)]) == 0
        results.append((curves.read_bytes(), summary.read_bytes()))
    assert results[0] == results[1]
