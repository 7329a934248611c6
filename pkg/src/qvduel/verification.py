"""Numerical certification of the QV operator results on concrete MDPs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from qvduel.mdp import Policy, TabularMdp, build_parametric_mdp, greedy_policy, uniform_policy
from qvduel.operators import (
    bc_qvmax_residuals,
    build_joint_qv_operator,
    join_qv,
    qvmax_bias_witness,
    solve_optimal,
    solve_prediction,
)

FIXED_POINT_TOL = 1e-8
BIAS_FLOOR = 0.01
ZERO_BIAS_TOL = 1e-10


@dataclass(frozen=True)
class Check:
    mdp_name: str
    name: str
    passed: bool
    value: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.mdp_name}: {self.name} = {self.value:.3e} {self.detail}".rstrip()


def random_mdp(num_states: int, num_actions: int, num_rewards: int, gamma: float,
               rng: np.random.Generator) -> TabularMdp:
    p = rng.random((num_states, num_actions, num_states, num_rewards))
    p /= p.sum(axis=(2, 3), keepdims=True)
    rewards = np.sort(rng.choice(np.arange(-5, 6), size=num_rewards, replace=False)).astype(float)
    return TabularMdp(num_states, num_actions, rewards, p, gamma)


def default_mdps(seed: int = 0) -> dict[str, TabularMdp]:
    rng = np.random.default_rng(seed)
    return {
        "parametric |A|=2 gamma=0.99": build_parametric_mdp(4, 2, 0.99, 0.0),
        "parametric |A|=18 gamma=0.99": build_parametric_mdp(4, 18, 0.99, 0.0),
        "parametric |A|=6 gamma=0.999 r=-1": build_parametric_mdp(4, 6, 0.999, -1.0),
        "random 5x3 gamma=0.9": random_mdp(5, 3, 3, 0.9, rng),
    }


def contraction_violations(mdp: TabularMdp, behavior: Policy, num_pairs: int,
                           rng: np.random.Generator) -> tuple[int, float]:
    """Count pairs where ``|Hy - Hy'|_inf > gamma |y - y'|_inf``; also return the worst ratio."""
    H = build_joint_qv_operator(mdp, behavior)
    violations = 0
    worst = 0.0
    for _ in range(num_pairs):
        scale = 10.0 ** rng.uniform(-3, 3)
        y = rng.normal(0.0, scale, H.dim)
        y2 = rng.normal(0.0, scale, H.dim)
        lhs = np.max(np.abs(H(y) - H(y2)))
        rhs = np.max(np.abs(y - y2))
        if lhs > mdp.gamma * rhs:
            violations += 1
        worst = max(worst, lhs / rhs)
    return violations, worst


def check_mdp(name: str, mdp: TabularMdp, num_pairs: int, rng: np.random.Generator,
              parametric: bool) -> list[Check]:
    b = uniform_policy(mdp)
    checks = []

    violations, worst = contraction_violations(mdp, b, num_pairs, rng)
    checks.append(Check(name, "contraction violations", violations == 0, violations,
                        f"(worst ratio {worst:.6f} vs gamma {mdp.gamma})"))

    q_b, v_b = solve_prediction(mdp, b)
    y = join_qv(q_b, v_b)
    residual = float(np.max(np.abs(build_joint_qv_operator(mdp, b)(y) - y)))
    checks.append(Check(name, "H fixed-point residual", residual <= FIXED_POINT_TOL, residual))

    report = bc_qvmax_residuals(mdp)
    checks.append(Check(name, "BC-QVMAX invariance residual",
                        report.fixed_point_residual <= FIXED_POINT_TOL, report.fixed_point_residual))
    checks.append(Check(name, "BC-QVMAX convergence error from zero",
                        report.convergence_error <= FIXED_POINT_TOL, report.convergence_error,
                        f"({report.sweeps} sweeps)"))

    optimal = solve_optimal(mdp)
    if parametric and mdp.num_actions >= 2:
        w = qvmax_bias_witness(mdp, b, optimal)
        detail = ""
        if sorted(mdp.rewards.tolist()) == [0.0, 1.0]:
            detail = f"(expected 1 - 1/|A| = {1 - 1 / mdp.num_actions:.6f})"
        checks.append(Check(name, "QVMAX bias witness (uniform b)", w > BIAS_FLOOR, w, detail))
    w0 = qvmax_bias_witness(mdp, greedy_policy(optimal[0]), optimal)
    checks.append(Check(name, "QVMAX bias witness (greedy b, expected zero)", w0 <= ZERO_BIAS_TOL, w0))
    return checks


def run_checks(num_pairs: int = 1000, seed: int = 0, mdps: dict[str, TabularMdp] | None = None) -> list[Check]:
    rng = np.random.default_rng(seed)
    if mdps is None:
        mdps = default_mdps(seed)
    checks = []
    for name, mdp in mdps.items():
        checks.extend(check_mdp(name, mdp, num_pairs, rng, name.startswith("parametric")))
    return checks
