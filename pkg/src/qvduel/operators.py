"""Exact dynamic-programming operators and fixed-point solvers.

Value functions are plain arrays: state values have shape ``(S,)``, action
values ``(S, A)``. A joint vector is the flat concatenation
``[q.ravel(); v]`` with the action block first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from qvduel.mdp import Policy, TabularMdp, uniform_policy

DEFAULT_TOL = 1e-10


def join_qv(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.concatenate([np.asarray(q, dtype=np.float64).ravel(), np.asarray(v, dtype=np.float64)])


def split_qv(y: np.ndarray, num_states: int, num_actions: int) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=np.float64)
    n = num_states * num_actions
    if y.shape != (n + num_states,):
        raise ValueError(f"joint vector has shape {y.shape}, expected ({n + num_states},)")
    return y[:n].reshape(num_states, num_actions), y[n:]


def _check_state(mdp: TabularMdp, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (mdp.num_states,):
        raise ValueError(f"state-value vector has shape {v.shape}, expected ({mdp.num_states},)")
    return v


def _check_action(num_states: int, num_actions: int, q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.size != num_states * num_actions:
        raise ValueError(f"action-value vector has {q.size} entries, expected {num_states * num_actions}")
    return q.reshape(num_states, num_actions)


def expected_reward(mdp: TabularMdp) -> np.ndarray:
    """``r(s, a) = sum_r r * sum_s' p(s', r | s, a)``."""
    return mdp.transition.sum(axis=2) @ mdp.rewards


def apply_P(mdp: TabularMdp, v: np.ndarray) -> np.ndarray:
    v = _check_state(mdp, v)
    return mdp.state_transition_matrix() @ v


def apply_E_pi(policy: Policy, q: np.ndarray) -> np.ndarray:
    q = _check_action(policy.num_states, policy.num_actions, q)
    return np.einsum("sa,sa->s", policy.probs, q)


def apply_E_max(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.ndim != 2:
        raise ValueError("action values must be an (S, A) array")
    return q.max(axis=1)


def bellman_expectation(mdp: TabularMdp, policy: Policy, x: np.ndarray) -> np.ndarray:
    """One application of ``T_pi``, dispatched on the shape of ``x``.

    Action values map through ``r + gamma P E_pi q``; state values through
    ``E_pi (r + gamma P v)``.
    """
    x = np.asarray(x, dtype=np.float64)
    r = expected_reward(mdp)
    if x.ndim == 2:
        return r + mdp.gamma * apply_P(mdp, apply_E_pi(policy, x))
    return apply_E_pi(policy, r + mdp.gamma * apply_P(mdp, x))


def bellman_optimality(mdp: TabularMdp, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    r = expected_reward(mdp)
    if x.ndim == 2:
        return r + mdp.gamma * apply_P(mdp, apply_E_max(x))
    return apply_E_max(r + mdp.gamma * apply_P(mdp, x))


@dataclass(frozen=True, eq=False)
class AffineJointOperator:
    """The expected QV-learning update ``H: y -> b + A y`` on joint vectors.

    ``A = gamma * [[0, P], [0, E_b P]]`` is applied block-wise; call
    :meth:`matrix` to materialize it for small problems.
    """

    mdp: TabularMdp
    behavior: Policy
    offset: np.ndarray

    @property
    def gamma(self) -> float:
        return self.mdp.gamma

    @property
    def dim(self) -> int:
        return self.mdp.num_states * (self.mdp.num_actions + 1)

    def linear(self, y: np.ndarray) -> np.ndarray:
        _, v = split_qv(y, self.mdp.num_states, self.mdp.num_actions)
        pv = self.mdp.gamma * apply_P(self.mdp, v)
        return join_qv(pv, apply_E_pi(self.behavior, pv))

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return self.offset + self.linear(y)

    def matrix(self) -> np.ndarray:
        S, A = self.mdp.num_states, self.mdp.num_actions
        n = S * A
        P = self.mdp.state_transition_matrix().reshape(n, S)
        E_b = np.zeros((S, n))
        for s in range(S):
            E_b[s, s * A:(s + 1) * A] = self.behavior.probs[s]
        out = np.zeros((n + S, n + S))
        out[:n, n:] = P
        out[n:, n:] = E_b @ P
        return self.mdp.gamma * out


def build_joint_qv_operator(mdp: TabularMdp, behavior: Policy | None = None) -> AffineJointOperator:
    if behavior is None:
        behavior = uniform_policy(mdp)
    r = expected_reward(mdp)
    return AffineJointOperator(mdp, behavior, join_qv(r, apply_E_pi(behavior, r)))


def _at_resolution(change: float, x: np.ndarray) -> bool:
    return change <= 2 * np.finfo(float).eps * np.max(np.abs(x))


def _stall_window(gamma: float) -> int:
    # near 1 ulp each sweep still shrinks the error by gamma; wait for an e^-10 reduction
    # before accepting that large values cycle one ulp above the threshold
    return max(50, int(np.ceil(10.0 / (1.0 - gamma))))


def _iterate_to_fixed_point(step, x0: np.ndarray, gamma: float, tol: float, max_iter: int) -> np.ndarray:
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = step(x0)
    if gamma == 0.0:
        return x
    threshold = tol * (1.0 - gamma) / gamma
    window = _stall_window(gamma)
    stalled = 0
    for _ in range(max_iter):
        x_new = step(x)
        change = np.max(np.abs(x_new - x))
        x = x_new
        if change < threshold:
            return x
        stalled = stalled + 1 if _at_resolution(change, x) else 0
        if stalled >= window:
            return x
    raise RuntimeError(f"value iteration did not converge within {max_iter} sweeps")


def solve_prediction(
    mdp: TabularMdp, policy: Policy, tol: float = DEFAULT_TOL, max_iter: int = 1_000_000
) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(q_pi, v_pi)`` by iterating ``T_pi`` on action values from zero."""
    r = expected_reward(mdp)
    P = mdp.state_transition_matrix()
    probs = policy.probs
    g = mdp.gamma

    def step(q):
        return r + g * (P @ np.einsum("sa,sa->s", probs, q))

    q = _iterate_to_fixed_point(step, np.zeros_like(r), g, tol, max_iter)
    return q, apply_E_pi(policy, q)


def solve_optimal(
    mdp: TabularMdp, tol: float = DEFAULT_TOL, max_iter: int = 1_000_000
) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(q_*, v_*)`` by value iteration with ``T`` from zero."""
    r = expected_reward(mdp)
    P = mdp.state_transition_matrix()
    g = mdp.gamma

    def step(q):
        return r + g * (P @ q.max(axis=1))

    q = _iterate_to_fixed_point(step, np.zeros_like(r), g, tol, max_iter)
    return q, apply_E_max(q)


def solve_prediction_linear(mdp: TabularMdp, policy: Policy) -> tuple[np.ndarray, np.ndarray]:
    """Dense solve of ``(I - gamma P_pi) v = r_pi``; a cross-check for small MDPs."""
    r = expected_reward(mdp)
    P = mdp.state_transition_matrix()
    P_pi = np.einsum("sa,sat->st", policy.probs, P)
    r_pi = apply_E_pi(policy, r)
    v = np.linalg.solve(np.eye(mdp.num_states) - mdp.gamma * P_pi, r_pi)
    return r + mdp.gamma * apply_P(mdp, v), v


def qvmax_bias_witness(
    mdp: TabularMdp,
    behavior: Policy | None = None,
    optimal: tuple[np.ndarray, np.ndarray] | None = None,
) -> float:
    """Sup-norm distance between the QVMAX state-value update at ``(q_*, v_*)`` and ``v_*``.

    Zero exactly when ``v_*`` survives ``E_b (r + gamma P E q_*)``; any
    positive value means ``(q_*, v_*)`` is not a fixed point of QVMAX.
    """
    if behavior is None:
        behavior = uniform_policy(mdp)
    q_star, v_star = optimal if optimal is not None else solve_optimal(mdp)
    target = expected_reward(mdp) + mdp.gamma * apply_P(mdp, apply_E_max(q_star))
    return float(np.max(np.abs(apply_E_pi(behavior, target) - v_star)))


@dataclass(frozen=True)
class BcQvmaxReport:
    fixed_point_residual: float
    convergence_error: float
    sweeps: int


def bc_qvmax_residuals(
    mdp: TabularMdp, tol: float = DEFAULT_TOL, max_sweeps: int = 1_000_000
) -> BcQvmaxReport:
    """Exercise the interleaved BC-QVMAX operator pair ``q <- r + gamma P v; v <- E q``.

    Reports the drift after one sweep started at ``(q_*, v_*)`` and the error
    of the iterate started at zero once successive sweeps stop changing.
    """
    q_star, v_star = solve_optimal(mdp, tol=tol)
    r = expected_reward(mdp)
    P = mdp.state_transition_matrix()
    g = mdp.gamma

    q1 = r + g * (P @ v_star)
    v1 = q1.max(axis=1)
    residual = max(np.max(np.abs(q1 - q_star)), np.max(np.abs(v1 - v_star)))

    threshold = tol * (1.0 - g) / g if g > 0 else 0.0
    window = _stall_window(g)
    q = np.zeros_like(r)
    v = np.zeros(mdp.num_states)
    stalled = 0
    for sweep in range(1, max_sweeps + 1):
        q_new = r + g * (P @ v)
        v_new = q_new.max(axis=1)
        change = max(np.max(np.abs(q_new - q)), np.max(np.abs(v_new - v)))
        q, v = q_new, v_new
        if change == 0.0 or (sweep > 1 and change < threshold):
            break
        stalled = stalled + 1 if _at_resolution(change, q) else 0
        if stalled >= window:
            break
    else:
        raise RuntimeError(f"BC-QVMAX iteration did not settle within {max_sweeps} sweeps")
    error = max(np.max(np.abs(q - q_star)), np.max(np.abs(v - v_star)))
    return BcQvmaxReport(float(residual), float(error), sweep)


def bc_qvmax_fixed_point_check(mdp: TabularMdp, tol: float = 1e-8) -> bool:
    report = bc_qvmax_residuals(mdp)
    return report.fixed_point_residual <= tol and report.convergence_error <= tol
