"""Recording, persisting, and loading expert trajectories.

Stores hold raw observations (never latents) so one store serves any
encoder; encoding happens when a retrieval index is built.  The on-disk
format is UTF-8 JSON lines: one header object, then one object per
transition.  Files are self-describing -- loading never needs the
originating environment.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import envs
from .envs import GridWorldSpec
from .errors import FormatError
from .seeding import spawn_rng, spawn_seed

FORMAT_VERSION = 1
TRANSITION_BUDGET = 1500
DEFAULT_EXPERT_NOISE = 0.1

_HEADER_FIELDS = {"format_version", "env_id", "encoder_id", "obs_dim",
                  "action_count", "n_transitions"}
_ROW_FIELDS = {"traj", "t", "obs", "action", "reward", "next_obs",
               "terminated", "truncated"}


class DemoBudgetWarning(UserWarning):
    """Store size is far from the protocol's transition budget."""


@dataclass
class Transition:
    obs: np.ndarray
    action: int
    reward: float
    next_obs: np.ndarray
    terminated: bool
    truncated: bool
    t: int

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Transition):
            return NotImplemented
        return (
            self.action == other.action
            and self.reward == other.reward
            and self.terminated == other.terminated
            and self.truncated == other.truncated
            and self.t == other.t
            and np.array_equal(self.obs, other.obs)
            and np.array_equal(self.next_obs, other.next_obs)
        )


@dataclass
class Trajectory:
    transitions: list[Transition]
    episode_return: float
    seed: int | None = None  # provenance only; not persisted, not compared

    def __len__(self) -> int:
        return len(self.transitions)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (
            self.transitions == other.transitions
            and self.episode_return == other.episode_return
        )


@dataclass
class DemoStore:
    env_id: str
    encoder_id: str
    obs_dim: int
    action_count: int
    trajectories: list[Trajectory] = field(default_factory=list)

    @property
    def total_transitions(self) -> int:
        return sum(len(t) for t in self.trajectories)

    def transitions(self):
        for traj in self.trajectories:
            yield from traj.transitions

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DemoStore):
            return NotImplemented
        return (
            self.env_id == other.env_id
            and self.encoder_id == other.encoder_id
            and self.obs_dim == other.obs_dim
            and self.action_count == other.action_count
            and self.trajectories == other.trajectories
        )


def check_budget(store: DemoStore) -> None:
    """Warn (never error) when the store strays far from the budget target."""
    n = store.total_transitions
    if not TRANSITION_BUDGET / 2 <= n <= TRANSITION_BUDGET * 2:
        warnings.warn(
            f"store holds {n} transitions; protocol budget is "
            f"~{TRANSITION_BUDGET} (warning only)",
            DemoBudgetWarning,
            stacklevel=2,
        )


def generate_demos(
    spec: GridWorldSpec,
    expert_noise: float = DEFAULT_EXPERT_NOISE,
    n_traj: int = 20,
    seed: int = 0,
) -> DemoStore:
    """Roll out the scripted expert for n_traj episodes with derived seeds."""
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    trajectories = []
    for i in range(n_traj):
        ep_seed = spawn_seed(seed, "demo-episode", i)
        expert_rng = spawn_rng(seed, "demo-expert", i)
        state, obs = envs.reset(spec, ep_seed)
        transitions: list[Transition] = []
        t = 0
        while not state.done:
            action = envs.expert_action(spec, state, expert_noise, expert_rng)
            res = envs.step(spec, state, action)
            transitions.append(Transition(
                obs=obs, action=action, reward=res.reward,
                next_obs=res.observation, terminated=res.terminated,
                truncated=res.truncated, t=t,
            ))
            obs = res.observation
            t += 1
        trajectories.append(Trajectory(
            transitions=transitions,
            episode_return=sum(tr.reward for tr in transitions),
            seed=ep_seed,
        ))
    store = DemoStore(
        env_id=spec.env_id,
        encoder_id="raw",
        obs_dim=spec.obs_dim,
        action_count=spec.action_count,
        trajectories=trajectories,
    )
    check_budget(store)
    return store


def save_demos(store: DemoStore, path: str) -> None:
    header = {
        "format_version": FORMAT_VERSION,
        "env_id": store.env_id,
        "encoder_id": store.encoder_id,
        "obs_dim": store.obs_dim,
        "action_count": store.action_count,
        "n_transitions": store.total_transitions,
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header) + "\n")
        for ti, traj in enumerate(store.trajectories):
            for tr in traj.transitions:
                row = {
                    "traj": ti,
                    "t": tr.t,
                    "obs": [float(v) for v in tr.obs],
                    "action": int(tr.action),
                    "reward": float(tr.reward),
                    "next_obs": [float(v) for v in tr.next_obs],
                    "terminated": bool(tr.terminated),
                    "truncated": bool(tr.truncated),
                }
                fh.write(json.dumps(row) + "\n")


def _parse_line(raw: str, lineno: int) -> dict:
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise FormatError(f"line {lineno}: not valid JSON ({exc})") from None
    if not isinstance(obj, dict):
        raise FormatError(f"line {lineno}: expected a JSON object")
    return obj


def load_demos(path: str) -> DemoStore:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise FormatError("line 1: missing header")
    header = _parse_line(lines[0], 1)
    if set(header) != _HEADER_FIELDS:
        missing = _HEADER_FIELDS - set(header)
        extra = set(header) - _HEADER_FIELDS
        raise FormatError(
            f"line 1: header fields wrong (missing={sorted(missing)}, "
            f"extra={sorted(extra)})"
        )
    if header["format_version"] != FORMAT_VERSION:
        raise FormatError(
            f"line 1: format_version {header['format_version']} unsupported "
            f"(expected {FORMAT_VERSION})"
        )
    obs_dim = int(header["obs_dim"])
    action_count = int(header["action_count"])
    claimed = int(header["n_transitions"])

    by_traj: dict[int, list[Transition]] = {}
    count = 0
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            raise FormatError(f"line {lineno}: blank line inside store")
        row = _parse_line(raw, lineno)
        if set(row) != _ROW_FIELDS:
            missing = _ROW_FIELDS - set(row)
            extra = set(row) - _ROW_FIELDS
            raise FormatError(
                f"line {lineno}: transition fields wrong "
                f"(missing={sorted(missing)}, extra={sorted(extra)})"
            )
        obs = np.asarray(row["obs"], dtype=np.float64)
        next_obs = np.asarray(row["next_obs"], dtype=np.float64)
        if obs.shape != (obs_dim,) or next_obs.shape != (obs_dim,):
            raise FormatError(
                f"line {lineno}: observation length != header obs_dim {obs_dim}"
            )
        action = int(row["action"])
        if not 0 <= action < action_count:
            raise FormatError(
                f"line {lineno}: action {action} outside [0, {action_count})"
            )
        by_traj.setdefault(int(row["traj"]), []).append(Transition(
            obs=obs, action=action, reward=float(row["reward"]),
            next_obs=next_obs, terminated=bool(row["terminated"]),
            truncated=bool(row["truncated"]), t=int(row["t"]),
        ))
        count += 1
    if count != claimed:
        raise FormatError(
            f"line {len(lines)}: file holds {count} transitions but the "
            f"header claims {claimed}"
        )

    trajectories = []
    for ti in sorted(by_traj):
        transitions = sorted(by_traj[ti], key=lambda tr: tr.t)
        if [tr.t for tr in transitions] != list(range(len(transitions))):
            raise FormatError(f"trajectory {ti}: t fields are not 0..n-1")
        for tr in transitions[:-1]:
            if tr.terminated or tr.truncated:
                raise FormatError(
                    f"trajectory {ti}: non-final transition flagged terminal"
                )
        trajectories.append(Trajectory(
            transitions=transitions,
            episode_return=sum(tr.reward for tr in transitions),
        ))
    return DemoStore(
        env_id=str(header["env_id"]),
        encoder_id=str(header["encoder_id"]),
        obs_dim=obs_dim,
        action_count=action_count,
        trajectories=trajectories,
    )
