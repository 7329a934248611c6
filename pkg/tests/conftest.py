import numpy as np
import pytest

from qvduel.mdp import TabularMdp


def make_random_mdp(num_states, num_actions, num_rewards, gamma, seed):
    rng = np.random.default_rng(seed)
    p = rng.random((num_states, num_actions, num_states, num_rewards))
    p /= p.sum(axis=(2, 3), keepdims=True)
    rewards = np.linspace(-1.0, 2.0, num_rewards)
    return TabularMdp(num_states, num_actions, rewards, p, gamma)


@pytest.fixture
def random_mdp():
    return make_random_mdp(3, 4, 3, 0.9, seed=11)


# one line per acceptance criterion, printed after the run whatever the capture mode
ACCEPTANCE_LINES = []


def record_criterion(name, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
