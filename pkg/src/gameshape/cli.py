"""Command-line interface.

Exit codes: 0 success / property holds, 1 internal error, 2 input error
(malformed file, invariant violation, bad config), 3 negative result (not
Nash, not invariant, no equilibrium found).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

from .errors import ConfigError, DomainError, GameFileError, SearchSpaceError
from . import io as gio
from .model import PotentialSet, StochasticGame, evaluate_profile
from .shaping import (
    apply_shaping,
    build_necessity_counterexample,
    check_eq23,
    check_offset_identities,
    classify_shaping,
    potential_to_shaping,
)
from .solver import (
    EquilibriumSolution,
    pure_stationary_equilibria,
    q_from_v,
    shapley_value_iteration,
    solve_single_state,
    verify_nash,
)
from .learn import run_comparison

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2
EXIT_NEGATIVE = 3


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def _print_solution(game: StochasticGame, sol: EquilibriumSolution) -> None:
    print(f"method: {sol.method}")
    for s in range(game.num_states):
        strategies = "  ".join(
            f"p{i + 1}=[" + ", ".join(
                f"{game.action_names[i][a]}:{_fmt(pol.table[s, a])}"
                for a in range(game.action_counts[i]) if pol.table[s, a] != 0.0
            ) + "]"
            for i, pol in enumerate(sol.profile.policies)
        )
        values = ", ".join(_fmt(sol.values[i, s]) for i in range(game.num_players))
        print(f"  {game.states[s]}: {strategies}  V=({values})")
    print(f"max regret: {_fmt(sol.max_regret)}")


def _solutions_for(game: StochasticGame, tol: float) -> list[EquilibriumSolution]:
    nonterminal = int((~game.terminal_mask).sum())
    if game.num_players == 2 and game.is_zero_sum() and game.gamma < 1.0 \
            and nonterminal > 1:
        return [shapley_value_iteration(game, tol=tol)]
    if nonterminal == 1:
        return solve_single_state(game, tol=tol)
    profiles = pure_stationary_equilibria(game, eps=max(tol * 10, 1e-8))
    solutions = []
    for profile in profiles:
        values = evaluate_profile(game, profile)
        regrets, _ = verify_nash(game, profile)
        solutions.append(
            EquilibriumSolution(
                profile=profile,
                values=values,
                q=q_from_v(game, values),
                regrets=regrets,
                method="pure-search",
            )
        )
    return solutions


def _cmd_solve(args) -> int:
    game = gio.parse_game(args.game)
    solutions = _solutions_for(game, args.tol)
    if not solutions:
        print("no equilibrium found by available methods")
        return EXIT_NEGATIVE
    for n, sol in enumerate(solutions):
        print(f"equilibrium {n + 1} of {len(solutions)}")
        _print_solution(game, sol)
    return EXIT_OK


def _cmd_verify(args) -> int:
    game = gio.parse_game(args.game)
    profile = gio.load_profile(args.profile, game)
    regrets, is_nash = verify_nash(game, profile, eps=args.eps)
    for i in range(game.num_players):
        print(f"player {i + 1} max regret: {_fmt(float(regrets[i].max()))}")
    print(f"nash at eps={_fmt(args.eps)}: {'yes' if is_nash else 'no'}")
    return EXIT_OK if is_nash else EXIT_NEGATIVE


def _cmd_shape(args) -> int:
    game = gio.parse_game(args.game)
    if args.classify:
        shaping = gio.load_shaping(args.classify, game)
        is_potential, phi, residual = classify_shaping(
            shaping, game.gamma, game.num_states,
            terminals=sorted(game.terminals), tol=args.tol,
        )
        print(f"potential-based: {'yes' if is_potential else 'no'}")
        print(f"max residual: {_fmt(residual)}")
        if is_potential and args.output:
            gio.serialize_potentials(phi, game, args.output)
            print(f"reconstructed potentials written to {args.output}")
        return EXIT_OK
    if not args.potential or not args.output:
        raise ConfigError("shape needs --potential and -o (or --classify)")
    phi = gio.load_potentials(args.potential, game)
    shaping = potential_to_shaping(phi, game.gamma, terminals=sorted(game.terminals))
    shaped = apply_shaping(game, shaping)
    gio.serialize_game(shaped, args.output)
    print(f"shaped game written to {args.output}")
    return EXIT_OK


def _cmd_invariance(args) -> int:
    game = gio.parse_game(args.game)
    solutions = _solutions_for(game, args.tol)
    if not solutions:
        print("no equilibrium found; cannot check invariance")
        return EXIT_NEGATIVE
    if args.shaping:
        return _invariance_for_shaping(args, game, solutions)
    use_vstar = args.potential == "vstar"
    all_ok = True
    for n, sol in enumerate(solutions):
        if use_vstar:
            phi_vals = sol.values.copy()
            phi_vals[:, game.terminal_mask] = 0.0
            phi = PotentialSet(phi_vals)
        else:
            phi = gio.load_potentials(args.potential, game)
        shaping = potential_to_shaping(phi, game.gamma, terminals=sorted(game.terminals))
        shaped = apply_shaping(game, shaping)
        report = check_offset_identities(game, shaped, phi, sol, tol=args.tol * 100)
        print(f"equilibrium {n + 1}:")
        print("  " + str(report).replace("\n", "\n  "))
        all_ok = all_ok and report.ok
        if use_vstar:
            report23 = check_eq23(game, sol, tol=args.tol * 100)
            print("  " + str(report23).replace("\n", "\n  "))
            all_ok = all_ok and report23.ok
    print(f"invariance: {'holds' if all_ok else 'VIOLATED'}")
    return EXIT_OK if all_ok else EXIT_NEGATIVE


def _invariance_for_shaping(args, game: StochasticGame, solutions) -> int:
    """Invariance check for an arbitrary shaping file: classify it, then
    test whether the solved equilibria survive on the shaped game."""
    shaping = gio.load_shaping(args.shaping, game)
    is_potential, _, residual = classify_shaping(
        shaping, game.gamma, game.num_states,
        terminals=sorted(game.terminals), tol=1e-8,
    )
    print(f"shaping is potential-based: {'yes' if is_potential else 'no'} "
          f"(max residual {_fmt(residual)})")
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        shaped = apply_shaping(game, shaping)
    all_ok = True
    for n, sol in enumerate(solutions):
        regrets, still_nash = verify_nash(
            shaped, sol.profile, eps=max(args.tol * 100, 1e-8)
        )
        mark = "PASS" if still_nash else "FAIL"
        print(f"equilibrium {n + 1}: [{mark}] still Nash on the shaped game "
              f"(max regret {_fmt(float(regrets.max()))})")
        all_ok = all_ok and still_nash
    print(f"invariance: {'holds' if all_ok else 'VIOLATED'}")
    return EXIT_OK if all_ok else EXIT_NEGATIVE


def _cmd_counterexample(args) -> int:
    instance = build_necessity_counterexample(args.delta, gamma=args.gamma)
    os.makedirs(args.output, exist_ok=True)
    m_path = os.path.join(args.output, "m.json")
    mp_path = os.path.join(args.output, "m_prime.json")
    f_path = os.path.join(args.output, "shaping.json")
    gio.serialize_game(instance.game_m, m_path)
    gio.serialize_game(instance.game_m_prime, mp_path)
    gio.serialize_shaping(instance.shaping, instance.game_m, f_path)

    action_names = instance.game_m.action_names[0]
    confirmations = {}
    for label, game, expected in (
        ("m", instance.game_m, instance.expected_action_m),
        ("m_prime", instance.game_m_prime, instance.expected_action_m_prime),
    ):
        equilibria = pure_stationary_equilibria(game, eps=1e-9)
        actions = sorted(
            {int(p.policies[0].action_choices()[0]) for p in equilibria}
        )
        confirmations[label] = {
            "predicted_s1_action": action_names[expected],
            "solver_s1_actions": [action_names[a] for a in actions],
            "confirmed": actions == [expected],
        }
    report = {
        "delta": instance.delta,
        "gamma": instance.gamma,
        "player1_action_in_m": action_names[instance.expected_action_m],
        "player1_action_in_m_prime": action_names[instance.expected_action_m_prime],
        "flip_confirmed_by_solver": all(
            c["confirmed"] for c in confirmations.values()
        ),
        "details": confirmations,
    }
    with open(os.path.join(args.output, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    print(f"M plays {report['player1_action_in_m']} at s1; "
          f"M' plays {report['player1_action_in_m_prime']} at s1")
    print(f"solver confirmation: {report['flip_confirmed_by_solver']}")
    print(f"files written to {args.output}")
    return EXIT_OK if report["flip_confirmed_by_solver"] else EXIT_NEGATIVE


def _cmd_learn(args) -> int:
    config = gio.load_experiment_config(args.config)
    if args.seed is not None:
        config = replace(config, seed_base=args.seed)
    phi_file = None
    if config.potential_source == "file":
        from .learn import build_environment

        env = build_environment(config)
        phi_file = gio.load_potentials(config.potential_path, env.model_game)
    shaped, unshaped, summary = run_comparison(config, phi_file=phi_file)
    if config.curves_path:
        gio.emit_csv(shaped + unshaped, config.curves_path)
        print(f"curves written to {config.curves_path}")
    if config.summary_path:
        with open(config.summary_path, "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2)
            fh.write("\n")
        print(f"summary written to {config.summary_path}")
    medians = summary["median_episodes_to_threshold"]
    print(f"median episodes to exploitability <= {config.epsilon_learn}: "
          f"unshaped={medians['unshaped']} shaped={medians['shaped']}")
    if summary["speedup_ratio_unshaped_over_shaped"] is not None:
        print(f"speedup ratio (unshaped/shaped): "
              f"{summary['speedup_ratio_unshaped_over_shaped']:.3g}")
    print(f"policy invariance on original game: "
          f"{'holds' if summary['invariance_holds'] else 'VIOLATED'}")
    return EXIT_OK if summary["invariance_holds"] else EXIT_NEGATIVE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gameshape",
        description="Nash equilibria and potential-based reward shaping "
                    "for finite discounted stochastic games",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="compute equilibria of a game file")
    p.add_argument("game")
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("verify", help="check a profile for Nash at --eps")
    p.add_argument("game")
    p.add_argument("--profile", required=True)
    p.add_argument("--eps", type=float, default=1e-8)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("shape", help="apply potential shaping, or classify a shaping file")
    p.add_argument("game")
    p.add_argument("--potential")
    p.add_argument("-o", "--output")
    p.add_argument("--classify", metavar="F_FILE")
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(func=_cmd_shape)

    p = sub.add_parser("invariance", help="machine-check the policy-invariance identities")
    p.add_argument("game")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--potential",
                       help="potential file, or 'vstar' to use the solved values")
    group.add_argument("--shaping", metavar="F_FILE",
                       help="arbitrary shaping file to test instead of a potential")
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=_cmd_invariance)

    p = sub.add_parser("counterexample",
                       help="emit the non-potential shaping counterexample pair")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--gamma", type=float, default=0.9)
    p.add_argument("-o", "--output", default="counterexample")
    p.set_defaults(func=_cmd_counterexample)

    p = sub.add_parser("learn", help="run a shaped-vs-unshaped learning comparison")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=None,
                   help="override the config's seed_base")
    p.set_defaults(func=_cmd_learn)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (GameFileError, ConfigError, DomainError, SearchSpaceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # pragma: no cover - internal failures
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
