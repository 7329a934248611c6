"""Compiled trial loop.

Mirrors the update rules in :mod:`qvduel.agents` step for step; the Python
agents remain the reference and tests check the two agree.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from qvduel.agents import ALGORITHMS

CODES = {name: i for i, name in enumerate(ALGORITHMS)}
EXPECTED_SARSA, Q_LEARNING, QV, QVMAX, BC_QVMAX, DUELING, HARD_RDQ, SOFT_RDQ = range(8)
assert tuple(CODES) == ("expected_sarsa", "q_learning", "qv", "qvmax", "bc_qvmax",
                        "dueling", "hard_rdq", "soft_rdq")


@njit(nogil=True, cache=True)
def _row_max(row):
    m = row[0]
    for a in range(1, row.shape[0]):
        if row[a] > m:
            m = row[a]
    return m


@njit(nogil=True, cache=True)
def _argmax(row):
    best = 0
    for a in range(1, row.shape[0]):
        if row[a] > row[best]:
            best = a
    return best


@njit(nogil=True, cache=True)
def _composite_row(code, v, adv, s, out):
    n = adv.shape[1]
    mean = 0.0
    if code == DUELING:
        for a in range(n):
            mean += adv[s, a]
        mean /= n
    for a in range(n):
        out[a] = (v[s] + adv[s, a]) - mean


@njit(nogil=True, cache=True)
def _row_sq_error(code, q, v, adv, q_ref, s, scratch):
    n = q_ref.shape[1]
    if code >= DUELING:
        _composite_row(code, v, adv, s, scratch)
    else:
        for a in range(n):
            scratch[a] = q[s, a]
    total = 0.0
    for a in range(n):
        d = q_ref[s, a] - scratch[a]
        total += d * d
    return total


@njit(nogil=True, cache=True)
def run_trial_kernel(code, greedy_target, target_probs, q, v, adv, cdf, rewards,
                     actions, uniforms, s0, alpha, gamma, beta, q_ref, errors):
    """Run ``len(actions)`` steps in place on the tables ``q``, ``v``, ``adv``.

    ``errors[t]`` receives the Euclidean distance between ``q_ref`` and the
    action-value estimate after ``t`` steps, so ``errors`` has one more entry
    than ``actions``.
    """
    num_states, num_actions = q_ref.shape
    num_rewards = rewards.shape[0]
    num_outcomes = cdf.shape[2]
    row = np.empty(num_actions)
    nxt = np.empty(num_actions)
    probs = np.empty(num_actions)
    row_sq = np.empty(num_states)
    for s in range(num_states):
        row_sq[s] = _row_sq_error(code, q, v, adv, q_ref, s, row)
    errors[0] = np.sqrt(row_sq.sum())

    s = s0
    for t in range(actions.shape[0]):
        a = actions[t]
        u = uniforms[t]
        k = 0
        while k < num_outcomes - 1 and cdf[s, a, k] <= u:
            k += 1
        s_next = k // num_rewards
        r = rewards[k % num_rewards]

        if code == EXPECTED_SARSA:
            if greedy_target:
                for b in range(num_actions):
                    probs[b] = 0.0
                probs[_argmax(q[s_next])] = 1.0
            else:
                for b in range(num_actions):
                    probs[b] = target_probs[s_next, b]
            boot = 0.0
            for b in range(num_actions):
                boot += probs[b] * q[s_next, b]
            q[s, a] += alpha * (r + gamma * boot - q[s, a])
        elif code == Q_LEARNING:
            q[s, a] += alpha * (r + gamma * _row_max(q[s_next]) - q[s, a])
        elif code == QV or code == QVMAX or code == BC_QVMAX:
            q[s, a] += alpha * (r + gamma * v[s_next] - q[s, a])
            if code == QV:
                v[s] += alpha * (r + gamma * v[s_next] - v[s])
            elif code == QVMAX:
                v[s] += alpha * (r + gamma * _row_max(q[s_next]) - v[s])
            else:
                v[s] += alpha * (_row_max(q[s]) - v[s])
        else:
            _composite_row(code, v, adv, s_next, nxt)
            _composite_row(code, v, adv, s, row)
            inc = alpha * ((r + gamma * _row_max(nxt)) - row[a])
            if code == DUELING:
                dec = inc / num_actions
                for b in range(num_actions):
                    adv[s, b] -= dec
                adv[s, a] += inc
                v[s] += inc
            elif code == HARD_RDQ:
                adv[s, a] += inc
                v[s] += inc
            else:
                keep = 1.0 - beta
                for b in range(num_actions):
                    adv[s, b] *= keep
                adv[s, a] += inc
                v[s] = keep * v[s] + inc

        row_sq[s] = _row_sq_error(code, q, v, adv, q_ref, s, row)
        total = 0.0
        for i in range(num_states):
            total += row_sq[i]
        errors[t + 1] = np.sqrt(total)
        s = s_next
