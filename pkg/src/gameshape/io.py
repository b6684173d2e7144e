"""File formats: games, potentials, policy profiles, shaping functions,
experiment configs, and the CSV curve sink.

Everything is JSON with schema version "1" and sparse entries (omitted
transition probabilities and rewards default to zero).  Serialization is
canonical - states in game order, joint actions row-major, next states in
order, shortest round-trip float representation - so parse/serialize
round-trips are byte-identical and seeded runs produce byte-identical
files.  Players are 1-based in files, 0-based in memory.
"""

from __future__ import annotations

import json
import os
from typing import Iterable

import numpy as np

from .errors import ConfigError, GameFileError
from .learn import ExperimentConfig, LearningCurve, Schedules
from .model import (
    Policy,
    PolicyProfile,
    PotentialSet,
    StochasticGame,
    validate_game,
)
from .shaping import ShapingFunction

SCHEMA_VERSION = "1"


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise GameFileError(message)


def _load_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise GameFileError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise GameFileError(f"{path}: malformed JSON ({exc})") from exc
    _require(isinstance(data, dict), f"{path}: top level must be an object")
    version = data.get("version")
    _require(
        version == SCHEMA_VERSION,
        f"{path}: unsupported schema version {version!r} (expected {SCHEMA_VERSION!r})",
    )
    return data


def _dump_json(payload: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


class _GameIndex:
    """Name-to-index lookup with error messages that name the offender."""

    def __init__(self, data: dict, path: str):
        self.path = path
        states = data.get("states")
        _require(isinstance(states, list) and states, f"{path}: missing state list")
        self.states = [str(s) for s in states]
        self.state_index = {s: i for i, s in enumerate(self.states)}
        _require(
            len(self.state_index) == len(self.states),
            f"{path}: duplicate state names",
        )
        actions = data.get("actions")
        _require(
            isinstance(actions, list) and all(isinstance(a, list) and a for a in actions),
            f"{path}: 'actions' must list one non-empty action-name list per player",
        )
        self.action_names = [[str(a) for a in per] for per in actions]
        self.action_index = [
            {a: i for i, a in enumerate(per)} for per in self.action_names
        ]

    def state(self, name) -> int:
        idx = self.state_index.get(str(name))
        _require(idx is not None, f"{self.path}: unknown state {name!r}")
        return idx

    def joint(self, names) -> tuple[int, ...]:
        _require(
            isinstance(names, list) and len(names) == len(self.action_names),
            f"{self.path}: joint action {names!r} must list one action per player",
        )
        joint = []
        for player, name in enumerate(names):
            idx = self.action_index[player].get(str(name))
            _require(
                idx is not None,
                f"{self.path}: unknown action {name!r} for player {player + 1}",
            )
            joint.append(idx)
        return tuple(joint)

    def player(self, number, num_players: int) -> int:
        _require(
            isinstance(number, int) and 1 <= number <= num_players,
            f"{self.path}: player {number!r} out of range 1..{num_players}",
        )
        return number - 1


def parse_game(path: str) -> StochasticGame:
    """Load and validate a stochastic game; model violations are errors."""
    data = _load_json(path)
    idx = _GameIndex(data, path)
    players = data.get("players")
    _require(
        isinstance(players, int) and players >= 1,
        f"{path}: 'players' must be a positive integer",
    )
    _require(
        len(idx.action_names) == players,
        f"{path}: {players} players but {len(idx.action_names)} action lists",
    )
    gamma = data.get("gamma")
    _require(isinstance(gamma, (int, float)), f"{path}: 'gamma' must be a number")
    terminals = data.get("terminals", [])
    _require(isinstance(terminals, list), f"{path}: 'terminals' must be a list")
    terminal_idx = frozenset(idx.state(t) for t in terminals)

    s_count = len(idx.states)
    counts = tuple(len(per) for per in idx.action_names)
    j_count = int(np.prod(counts))
    transition = np.zeros((s_count, j_count, s_count))
    reward = np.zeros((players, s_count, j_count, s_count))

    for entry in data.get("transitions", []):
        _require(isinstance(entry, dict), f"{path}: transition entries must be objects")
        s = idx.state(entry.get("state"))
        j = int(np.ravel_multi_index(idx.joint(entry.get("action")), counts))
        ns = idx.state(entry.get("next"))
        prob = entry.get("prob")
        _require(
            isinstance(prob, (int, float)),
            f"{path}: transition probability must be a number "
            f"(state {idx.states[s]!r})",
        )
        transition[s, j, ns] = float(prob)
    for entry in data.get("rewards", []):
        _require(isinstance(entry, dict), f"{path}: reward entries must be objects")
        i = idx.player(entry.get("player"), players)
        s = idx.state(entry.get("state"))
        j = int(np.ravel_multi_index(idx.joint(entry.get("action")), counts))
        ns = idx.state(entry.get("next"))
        value = entry.get("value")
        _require(
            isinstance(value, (int, float)),
            f"{path}: reward value must be a number (state {idx.states[s]!r})",
        )
        reward[i, s, j, ns] = float(value)

    game = StochasticGame(
        num_players=players,
        states=tuple(idx.states),
        action_counts=counts,
        transition=transition,
        reward=reward,
        gamma=float(gamma),
        terminals=terminal_idx,
        action_names=tuple(tuple(per) for per in idx.action_names),
    )
    violations = validate_game(game)
    if violations:
        raise GameFileError(
            f"{path}: game violates model invariants:\n  " + "\n  ".join(violations)
        )
    return game


def serialize_game(game: StochasticGame, path: str) -> None:
    """Write a game in canonical order; zero entries are omitted."""
    transitions = []
    rewards = []
    for s in range(game.num_states):
        for j in range(game.num_joint_actions):
            joint = game.joint_actions(j)
            action = [game.action_names[i][a] for i, a in enumerate(joint)]
            for ns in range(game.num_states):
                p = game.transition[s, j, ns]
                if p != 0.0:
                    transitions.append(
                        {
                            "state": game.states[s],
                            "action": action,
                            "next": game.states[ns],
                            "prob": float(p),
                        }
                    )
    for i in range(game.num_players):
        for s in range(game.num_states):
            for j in range(game.num_joint_actions):
                joint = game.joint_actions(j)
                action = [game.action_names[k][a] for k, a in enumerate(joint)]
                for ns in range(game.num_states):
                    r = game.reward[i, s, j, ns]
                    if r != 0.0:
                        rewards.append(
                            {
                                "player": i + 1,
                                "state": game.states[s],
                                "action": action,
                                "next": game.states[ns],
                                "value": float(r),
                            }
                        )
    payload = {
        "version": SCHEMA_VERSION,
        "players": game.num_players,
        "states": list(game.states),
        "actions": [list(per) for per in game.action_names],
        "gamma": game.gamma,
        "terminals": [game.states[t] for t in sorted(game.terminals)],
        "transitions": transitions,
        "rewards": rewards,
    }
    _dump_json(payload, path)


def load_potentials(path: str, game: StochasticGame) -> PotentialSet:
    data = _load_json(path)
    values = np.zeros((game.num_players, game.num_states))
    for entry in data.get("entries", []):
        _require(isinstance(entry, dict), f"{path}: entries must be objects")
        player = entry.get("player")
        _require(
            isinstance(player, int) and 1 <= player <= game.num_players,
            f"{path}: player {player!r} out of range 1..{game.num_players}",
        )
        try:
            s = game.state_index(str(entry.get("state")))
        except Exception:
            raise GameFileError(f"{path}: unknown state {entry.get('state')!r}") from None
        value = entry.get("value")
        _require(isinstance(value, (int, float)), f"{path}: potential value must be a number")
        values[player - 1, s] = float(value)
    phi = PotentialSet(values)
    try:
        phi.check_against(game)
    except Exception as exc:
        raise GameFileError(f"{path}: {exc}") from None
    return phi


def serialize_potentials(phi: PotentialSet, game: StochasticGame, path: str) -> None:
    entries = []
    for i in range(game.num_players):
        for s in range(game.num_states):
            v = phi.values[i, s]
            if v != 0.0:
                entries.append({"player": i + 1, "state": game.states[s], "value": float(v)})
    _dump_json({"version": SCHEMA_VERSION, "entries": entries}, path)


def load_profile(path: str, game: StochasticGame) -> PolicyProfile:
    """Load a policy profile; every (player, state) needs a full distribution."""
    data = _load_json(path)
    tables = [np.zeros((game.num_states, a)) for a in game.action_counts]
    for entry in data.get("entries", []):
        _require(isinstance(entry, dict), f"{path}: entries must be objects")
        player = entry.get("player")
        _require(
            isinstance(player, int) and 1 <= player <= game.num_players,
            f"{path}: player {player!r} out of range 1..{game.num_players}",
        )
        i = player - 1
        try:
            s = game.state_index(str(entry.get("state")))
        except Exception:
            raise GameFileError(f"{path}: unknown state {entry.get('state')!r}") from None
        action = str(entry.get("action"))
        _require(
            action in game.action_names[i],
            f"{path}: unknown action {action!r} for player {player}",
        )
        a = game.action_names[i].index(action)
        prob = entry.get("prob")
        _require(isinstance(prob, (int, float)), f"{path}: 'prob' must be a number")
        tables[i][s, a] = float(prob)
    for i, table in enumerate(tables):
        sums = table.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > 1e-9)
        if bad.size:
            s = int(bad[0])
            raise GameFileError(
                f"{path}: player {i + 1} probabilities at state "
                f"{game.states[s]!r} sum to {sums[s]!r}, not 1"
            )
    try:
        return PolicyProfile.from_tables(tables)
    except Exception as exc:
        raise GameFileError(f"{path}: {exc}") from None


def serialize_profile(profile: PolicyProfile, game: StochasticGame, path: str) -> None:
    entries = []
    for i, policy in enumerate(profile.policies):
        for s in range(game.num_states):
            for a in range(game.action_counts[i]):
                p = policy.table[s, a]
                if p != 0.0:
                    entries.append(
                        {
                            "player": i + 1,
                            "state": game.states[s],
                            "action": game.action_names[i][a],
                            "prob": float(p),
                        }
                    )
    _dump_json({"version": SCHEMA_VERSION, "entries": entries}, path)


def load_shaping(path: str, game: StochasticGame) -> ShapingFunction:
    data = _load_json(path)
    values = np.zeros((game.num_players, game.num_states, game.num_states))
    for entry in data.get("entries", []):
        _require(isinstance(entry, dict), f"{path}: entries must be objects")
        player = entry.get("player")
        _require(
            isinstance(player, int) and 1 <= player <= game.num_players,
            f"{path}: player {player!r} out of range 1..{game.num_players}",
        )
        try:
            s = game.state_index(str(entry.get("from")))
            ns = game.state_index(str(entry.get("to")))
        except Exception:
            raise GameFileError(
                f"{path}: unknown state in pair "
                f"({entry.get('from')!r}, {entry.get('to')!r})"
            ) from None
        value = entry.get("value")
        _require(isinstance(value, (int, float)), f"{path}: shaping value must be a number")
        values[player - 1, s, ns] = float(value)
    return ShapingFunction(values)


def serialize_shaping(shaping: ShapingFunction, game: StochasticGame, path: str) -> None:
    entries = []
    for i in range(game.num_players):
        for s in range(game.num_states):
            for ns in range(game.num_states):
                v = shaping.values[i, s, ns]
                if v != 0.0:
                    entries.append(
                        {
                            "player": i + 1,
                            "from": game.states[s],
                            "to": game.states[ns],
                            "value": float(v),
                        }
                    )
    _dump_json({"version": SCHEMA_VERSION, "entries": entries}, path)


def load_experiment_config(path: str) -> ExperimentConfig:
    """Parse an experiment config; referenced files must exist and seeds
    must be explicit."""
    try:
        data = _load_json(path)
    except GameFileError as exc:
        raise ConfigError(str(exc)) from None

    def need(key, kind, where=data, label=""):
        value = where.get(key)
        if not isinstance(value, kind):
            raise ConfigError(f"{path}: missing or invalid {label or key!r}")
        return value

    env = need("environment", dict)
    env_id = need("id", str, env, "environment.id")
    env_params = env.get("params", {})
    if not isinstance(env_params, dict):
        raise ConfigError(f"{path}: environment.params must be an object")

    agent = need("agent", dict)
    agent_id = need("id", str, agent, "agent.id")
    schedules = Schedules(
        epsilon_start=float(agent.get("epsilon_start", 1.0)),
        epsilon_end=float(agent.get("epsilon_end", 0.05)),
        epsilon_decay_fraction=float(agent.get("epsilon_decay_fraction", 0.5)),
        alpha_scale=float(agent.get("alpha_scale", 1000.0)),
    )

    potential = need("potential", dict)
    source = need("source", str, potential, "potential.source")
    potential_path = potential.get("path")
    if source == "file":
        if not isinstance(potential_path, str):
            raise ConfigError(f"{path}: potential.path required for source 'file'")
        if not os.path.exists(potential_path):
            raise ConfigError(f"{path}: potential file {potential_path!r} does not exist")
    elif source not in ("solver", "zero"):
        raise ConfigError(f"{path}: unknown potential source {source!r}")

    seed_base = data.get("seed_base")
    if not isinstance(seed_base, int):
        raise ConfigError(f"{path}: 'seed_base' must be an explicit integer")

    output = data.get("output", {})
    if not isinstance(output, dict):
        raise ConfigError(f"{path}: 'output' must be an object")

    return ExperimentConfig(
        environment=env_id,
        env_params=env_params,
        agent=agent_id,
        schedules=schedules,
        potential_source=source,
        potential_path=potential_path,
        trials=int(need("trials", int)),
        seed_base=seed_base,
        episodes=int(need("episodes", int)),
        max_steps_per_episode=int(data.get("max_steps_per_episode", 100)),
        record_interval=int(data.get("record_interval", max(1, int(need("episodes", int)) // 4))),
        epsilon_learn=float(data.get("epsilon_learn", 0.1)),
        curves_path=output.get("curves"),
        summary_path=output.get("summary"),
    )


def emit_csv(curves: Iterable[LearningCurve], path: str) -> None:
    """Write curve records as CSV, sorted by (arm, trial, episode, player),
    floats with 9 significant digits."""
    rows = []
    for curve in curves:
        for record in curve.records:
            for player in range(len(record.exploitability)):
                rows.append(
                    (
                        curve.arm,
                        curve.trial,
                        record.episode,
                        player + 1,
                        record.exploitability[player],
                        record.value_error[player],
                    )
                )
    rows.sort(key=lambda r: (r[0], r[1], r[2], r[3]))
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("trial,episode,player,exploitability,value_error,arm\n")
            for arm, trial, episode, player, exploit, verr in rows:
                fh.write(
                    f"{trial},{episode},{player},{exploit:.9g},{verr:.9g},{arm}\n"
                )
    except OSError as exc:
        raise GameFileError(f"cannot write {path}: {exc}") from exc
