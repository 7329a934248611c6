"""Tabular TD agents that learn action values, optionally through state values.

Every agent exposes the same surface: ``td_error(t)`` and ``step(t)`` for a
:class:`~qvduel.mdp.Transition`, and ``q_estimate()`` for an ``(S, A)``
snapshot of its action-value estimate.
"""

from __future__ import annotations

import numpy as np

from qvduel.mdp import Policy, Transition

Q_VARIANTS = ("expected_sarsa", "q_learning")
QV_VARIANTS = ("qv", "qvmax", "bc_qvmax")
DUEL_VARIANTS = ("dueling", "hard_rdq", "soft_rdq")
ALGORITHMS = Q_VARIANTS + QV_VARIANTS + DUEL_VARIANTS


def _check_step_size(alpha: float, gamma: float) -> None:
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must lie in [0, 1), got {gamma}")


class QAgent:
    """Expected Sarsa or Q-learning on a single action-value table.

    ``target=None`` with ``expected_sarsa`` means the target policy is greedy
    with respect to the current table (lowest-index ties), which makes the
    update coincide with Q-learning.
    """

    def __init__(
        self,
        num_states: int,
        num_actions: int,
        alpha: float,
        gamma: float,
        variant: str = "q_learning",
        target: Policy | None = None,
    ):
        if variant not in Q_VARIANTS:
            raise ValueError(f"unknown Q variant {variant!r}")
        _check_step_size(alpha, gamma)
        if target is not None and target.probs.shape != (num_states, num_actions):
            raise ValueError("target policy shape does not match the table")
        self.variant = variant
        self.alpha = alpha
        self.gamma = gamma
        self.target = target
        self.q_table = np.zeros((num_states, num_actions))

    def _bootstrap(self, s: int) -> float:
        row = self.q_table[s]
        if self.variant == "q_learning":
            return row.max()
        if self.target is None:
            probs = np.zeros_like(row)
            probs[np.argmax(row)] = 1.0
        else:
            probs = self.target.probs[s]
        return probs @ row

    def td_error(self, t: Transition) -> float:
        q = self.q_table
        return t.reward + self.gamma * self._bootstrap(t.next_state) - q[t.state, t.action]

    def step(self, t: Transition) -> None:
        self.q_table[t.state, t.action] += self.alpha * self.td_error(t)

    def q_estimate(self) -> np.ndarray:
        return self.q_table.copy()


class QVAgent:
    """QV-learning and its control variants, QVMAX and BC-QVMAX.

    Q is updated first from ``R + gamma V(S')``; V is then updated reading
    the freshly written Q table where its rule needs Q.
    """

    def __init__(self, num_states: int, num_actions: int, alpha: float, gamma: float, variant: str = "qv"):
        if variant not in QV_VARIANTS:
            raise ValueError(f"unknown QV variant {variant!r}")
        _check_step_size(alpha, gamma)
        self.variant = variant
        self.alpha = alpha
        self.gamma = gamma
        self.q_table = np.zeros((num_states, num_actions))
        self.v_table = np.zeros(num_states)

    def td_error(self, t: Transition) -> float:
        return t.reward + self.gamma * self.v_table[t.next_state] - self.q_table[t.state, t.action]

    def _v_error(self, t: Transition) -> float:
        v = self.v_table
        if self.variant == "qv":
            return t.reward + self.gamma * v[t.next_state] - v[t.state]
        if self.variant == "qvmax":
            return t.reward + self.gamma * self.q_table[t.next_state].max() - v[t.state]
        return self.q_table[t.state].max() - v[t.state]

    def step(self, t: Transition) -> None:
        self.q_table[t.state, t.action] += self.alpha * self.td_error(t)
        self.v_table[t.state] += self.alpha * self._v_error(t)

    def q_estimate(self) -> np.ndarray:
        return self.q_table.copy()


class DuelAgent:
    """Advantage-decomposed Q-learning: Dueling, Hard RDQ and Soft RDQ.

    The composite estimate is ``V(s) + Adv(s, a)``, minus the per-state mean
    advantage for the ``dueling`` variant. All variants use the Q-learning
    TD error computed on the composite values.
    """

    def __init__(
        self,
        num_states: int,
        num_actions: int,
        alpha: float,
        gamma: float,
        variant: str = "hard_rdq",
        beta: float = 0.0,
    ):
        if variant not in DUEL_VARIANTS:
            raise ValueError(f"unknown dueling variant {variant!r}")
        _check_step_size(alpha, gamma)
        if not 0.0 <= beta < 1.0:
            raise ValueError(f"beta must lie in [0, 1), got {beta}")
        if variant != "soft_rdq" and beta != 0.0:
            raise ValueError("beta is only meaningful for soft_rdq")
        self.variant = variant
        self.alpha = alpha
        self.gamma = gamma
        self.beta = beta
        self.v_table = np.zeros(num_states)
        self.adv_table = np.zeros((num_states, num_actions))
        self.init_offsets = np.zeros(num_states)

    @property
    def num_actions(self) -> int:
        return self.adv_table.shape[1]

    def set_tables(self, v: np.ndarray, adv: np.ndarray) -> None:
        self.v_table[:] = v
        self.adv_table[:] = adv
        self.init_offsets = self.v_table - self.adv_table.sum(axis=1)

    def init_gaussian(self, std: float, rng: np.random.Generator) -> None:
        if std < 0:
            raise ValueError("std must be non-negative")
        v = rng.normal(0.0, std, size=self.v_table.shape)
        adv = rng.normal(0.0, std, size=self.adv_table.shape)
        self.set_tables(v, adv)

    def composite_row(self, s: int) -> np.ndarray:
        row = self.v_table[s] + self.adv_table[s]
        if self.variant == "dueling":
            row = row - self.adv_table[s].mean()
        return row

    def composite_q(self, s: int, a: int) -> float:
        return float(self.composite_row(s)[a])

    def td_error(self, t: Transition) -> float:
        target = t.reward + self.gamma * self.composite_row(t.next_state).max()
        return target - self.composite_row(t.state)[t.action]

    def step(self, t: Transition) -> None:
        s, a = t.state, t.action
        inc = self.alpha * self.td_error(t)
        adv = self.adv_table[s]
        if self.variant == "dueling":
            adv -= inc / self.num_actions
            adv[a] += inc
            self.v_table[s] += inc
        elif self.variant == "hard_rdq":
            adv[a] += inc
            self.v_table[s] += inc
        else:
            keep = 1.0 - self.beta
            adv *= keep
            adv[a] += inc
            self.v_table[s] = keep * self.v_table[s] + inc

    def q_estimate(self) -> np.ndarray:
        q = self.v_table[:, None] + self.adv_table
        if self.variant == "dueling":
            q -= self.adv_table.mean(axis=1, keepdims=True)
        return q


def make_agent(
    algorithm: str,
    num_states: int,
    num_actions: int,
    alpha: float,
    gamma: float,
    target: Policy | None = None,
    beta: float = 0.0,
):
    if algorithm in Q_VARIANTS:
        return QAgent(num_states, num_actions, alpha, gamma, algorithm, target)
    if algorithm in QV_VARIANTS:
        return QVAgent(num_states, num_actions, alpha, gamma, algorithm)
    if algorithm in DUEL_VARIANTS:
        return DuelAgent(num_states, num_actions, alpha, gamma, algorithm,
                         beta if algorithm == "soft_rdq" else 0.0)
    raise ValueError(f"unknown algorithm {algorithm!r}")
