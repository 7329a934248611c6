"""Finite tabular MDPs, policies and seeded transition sampling."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PROB_ATOL = 1e-12


class MdpError(ValueError):
    """Raised when an MDP or policy violates its structural invariants."""


@dataclass(frozen=True)
class Transition:
    state: int
    action: int
    reward: float
    next_state: int


@dataclass(frozen=True, eq=False)
class TabularMdp:
    """A finite MDP stored as the joint tensor ``p(s', r | s, a)``.

    ``transition`` has shape ``(S, A, S, R)`` where the last axis indexes
    ``rewards``. Arrays are copied and made read-only on construction.
    """

    num_states: int
    num_actions: int
    rewards: np.ndarray
    transition: np.ndarray
    gamma: float
    # flattened (s', r) cumulative distribution per (s, a), used by samplers
    _cdf: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.num_states < 1 or self.num_actions < 1:
            raise MdpError("num_states and num_actions must be positive")
        if not 0.0 <= self.gamma < 1.0:
            raise MdpError(f"gamma must lie in [0, 1), got {self.gamma}")
        rewards = np.array(self.rewards, dtype=np.float64).reshape(-1)
        if rewards.size == 0:
            raise MdpError("reward support is empty")
        if np.unique(rewards).size != rewards.size:
            raise MdpError("reward support contains duplicate values")
        p = np.array(self.transition, dtype=np.float64)
        expected = (self.num_states, self.num_actions, self.num_states, rewards.size)
        if p.shape != expected:
            raise MdpError(f"transition tensor has shape {p.shape}, expected {expected}")
        if np.any(p < 0.0) or np.any(p > 1.0):
            raise MdpError("transition probabilities must lie in [0, 1]")
        totals = p.sum(axis=(2, 3))
        if np.any(np.abs(totals - 1.0) > PROB_ATOL):
            raise MdpError("transition rows must sum to 1")

        flat = p.reshape(self.num_states, self.num_actions, -1)
        cdf = np.cumsum(flat, axis=-1)
        # the last reachable outcome absorbs rounding slack so u in [0, 1) always lands
        for s in range(self.num_states):
            for a in range(self.num_actions):
                last = np.flatnonzero(flat[s, a] > 0.0)[-1]
                cdf[s, a, last:] = 1.0

        rewards.setflags(write=False)
        p.setflags(write=False)
        cdf.setflags(write=False)
        object.__setattr__(self, "rewards", rewards)
        object.__setattr__(self, "transition", p)
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "_cdf", cdf)

    @property
    def num_rewards(self) -> int:
        return self.rewards.size

    @property
    def outcome_cdf(self) -> np.ndarray:
        """Cumulative distribution over flattened ``(s', r)`` outcomes, shape ``(S, A, S*R)``."""
        return self._cdf

    def state_transition_matrix(self) -> np.ndarray:
        """Marginal ``p(s' | s, a)`` with shape ``(S, A, S)``."""
        return self.transition.sum(axis=3)

    def to_dict(self) -> dict:
        return {
            "num_states": self.num_states,
            "num_actions": self.num_actions,
            "gamma": self.gamma,
            "rewards": self.rewards.tolist(),
            "transition": self.transition.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> TabularMdp:
        return cls(
            num_states=int(data["num_states"]),
            num_actions=int(data["num_actions"]),
            rewards=np.asarray(data["rewards"], dtype=np.float64),
            transition=np.asarray(data["transition"], dtype=np.float64),
            gamma=float(data["gamma"]),
        )

    def save_json(self, path: str | Path) -> None:
        # json writes floats with repr(), which round-trips float64 exactly
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load_json(cls, path: str | Path) -> TabularMdp:
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True, eq=False)
class Policy:
    """Action probabilities ``pi(a | s)`` as an ``(S, A)`` matrix."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.array(self.probs, dtype=np.float64)
        if probs.ndim != 2:
            raise MdpError("policy matrix must be two-dimensional")
        if np.any(probs < 0.0) or np.any(probs > 1.0):
            raise MdpError("policy probabilities must lie in [0, 1]")
        if np.any(np.abs(probs.sum(axis=1) - 1.0) > PROB_ATOL):
            raise MdpError("policy rows must sum to 1")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def num_states(self) -> int:
        return self.probs.shape[0]

    @property
    def num_actions(self) -> int:
        return self.probs.shape[1]


def build_parametric_mdp(
    num_states: int = 4,
    num_actions: int = 18,
    gamma: float = 0.99,
    suboptimal_reward: float = 0.0,
) -> TabularMdp:
    """State-invariant MDP: every action moves to a uniformly random state.

    Action 0 always pays +1; every other action pays ``suboptimal_reward``.
    """
    if num_states < 1 or num_actions < 1:
        raise MdpError("num_states and num_actions must be positive")
    if suboptimal_reward == 1.0:
        rewards = np.array([1.0])
        reward_index = np.zeros(num_actions, dtype=int)
    else:
        rewards = np.array([1.0, float(suboptimal_reward)])
        reward_index = np.ones(num_actions, dtype=int)
        reward_index[0] = 0
    p = np.zeros((num_states, num_actions, num_states, rewards.size))
    for a in range(num_actions):
        p[:, a, :, reward_index[a]] = 1.0 / num_states
    return TabularMdp(num_states, num_actions, rewards, p, gamma)


def outcome_index(cdf_row: np.ndarray, u: float) -> int:
    """Map a uniform draw ``u`` in [0, 1) to a flattened ``(s', r)`` outcome."""
    return int(np.searchsorted(cdf_row, u, side="right"))


def sample_transition(
    mdp: TabularMdp, state: int, action: int, rng: np.random.Generator
) -> Transition:
    if not (0 <= state < mdp.num_states and 0 <= action < mdp.num_actions):
        raise IndexError(f"state/action ({state}, {action}) out of bounds")
    k = outcome_index(mdp.outcome_cdf[state, action], rng.random())
    next_state, r = divmod(k, mdp.num_rewards)
    return Transition(state, action, float(mdp.rewards[r]), next_state)


def uniform_policy(mdp: TabularMdp) -> Policy:
    return Policy(np.full((mdp.num_states, mdp.num_actions), 1.0 / mdp.num_actions))


def greedy_policy(q: np.ndarray) -> Policy:
    """Deterministic argmax policy; ties go to the lowest action index."""
    q = np.asarray(q, dtype=np.float64)
    probs = np.zeros_like(q)
    # np.argmax returns the first maximal index
    probs[np.arange(q.shape[0]), np.argmax(q, axis=1)] = 1.0
    return Policy(probs)


def epsilon_greedy_action(q_row: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    if rng.random() < epsilon:
        return int(rng.integers(len(q_row)))
    return int(np.argmax(q_row))
