import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qvduel.mdp import (
    MdpError,
    Policy,
    TabularMdp,
    Transition,
    build_parametric_mdp,
    epsilon_greedy_action,
    greedy_policy,
    outcome_index,
    sample_transition,
    uniform_policy,
)


def test_parametric_mdp_structure():
    mdp = build_parametric_mdp(4, 6, 0.99, 0.0)
    assert mdp.transition.shape == (4, 6, 4, 2)
    assert mdp.rewards.tolist() == [1.0, 0.0]
    np.testing.assert_allclose(mdp.transition.sum(axis=(2, 3)), 1.0, atol=1e-15)
    # action 0 pays +1 with certainty, everything else pays 0
    assert np.all(mdp.transition[:, 0, :, 0] == 0.25)
    assert np.all(mdp.transition[:, 1:, :, 1] == 0.25)
    assert np.all(mdp.transition[:, 1:, :, 0] == 0.0)


def test_parametric_mdp_negative_reward():
    mdp = build_parametric_mdp(4, 3, 0.999, -1.0)
    assert mdp.rewards.tolist() == [1.0, -1.0]
    assert mdp.gamma == 0.999


def test_parametric_mdp_collapses_equal_rewards():
    mdp = build_parametric_mdp(2, 3, 0.5, 1.0)
    assert mdp.rewards.tolist() == [1.0]


def test_single_action_mdp_is_valid():
    mdp = build_parametric_mdp(4, 1, 0.9)
    assert mdp.num_actions == 1


@pytest.mark.parametrize("gamma", [1.0, -0.1, 1.5])
def test_rejects_bad_gamma(gamma):
    with pytest.raises(MdpError):
        build_parametric_mdp(4, 2, gamma)


def test_rejects_non_stochastic_rows():
    p = np.zeros((1, 1, 1, 1))
    p[0, 0, 0, 0] = 0.9
    with pytest.raises(MdpError, match="sum to 1"):
        TabularMdp(1, 1, np.array([0.0]), p, 0.5)


def test_rejects_duplicate_rewards():
    p = np.full((1, 1, 1, 2), 0.5)
    with pytest.raises(MdpError, match="duplicate"):
        TabularMdp(1, 1, np.array([1.0, 1.0]), p, 0.5)


def test_rejects_wrong_shape():
    with pytest.raises(MdpError, match="shape"):
        TabularMdp(2, 1, np.array([0.0]), np.ones((1, 1, 1, 1)), 0.5)


def test_arrays_are_read_only():
    mdp = build_parametric_mdp(2, 2, 0.5)
    with pytest.raises(ValueError):
        mdp.transition[0, 0, 0, 0] = 1.0


def test_json_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(3)
    p = rng.random((3, 2, 3, 2))
    p /= p.sum(axis=(2, 3), keepdims=True)
    mdp = TabularMdp(3, 2, np.array([-0.1, 2.0 / 3.0]), p, 0.97)
    path = tmp_path / "mdp.json"
    mdp.save_json(path)
    back = TabularMdp.load_json(path)
    assert np.array_equal(back.transition, mdp.transition)
    assert np.array_equal(back.rewards, mdp.rewards)
    assert back.gamma == mdp.gamma


def test_policy_validation():
    with pytest.raises(MdpError):
        Policy(np.array([[0.5, 0.6]]))
    with pytest.raises(MdpError):
        Policy(np.array([0.5, 0.5]))
    assert uniform_policy(build_parametric_mdp(4, 5)).probs[2, 3] == pytest.approx(0.2)


def test_greedy_policy_breaks_ties_low():
    pi = greedy_policy(np.array([[1.0, 3.0, 3.0], [0.0, 0.0, 0.0]]))
    assert pi.probs.tolist() == [[0.0, 1.0, 0.0], [1.0, 0.0, 0.0]]


def test_outcome_index_boundaries():
    cdf = np.array([0.25, 0.25, 1.0])
    assert outcome_index(cdf, 0.0) == 0
    assert outcome_index(cdf, 0.2499) == 0
    # a zero-probability outcome is never selected
    assert outcome_index(cdf, 0.25) == 2
    assert outcome_index(cdf, np.nextafter(1.0, 0.0)) == 2


def test_sample_transition_frequencies():
    # chi-square goodness of fit over the 4 x 2 outcomes of one (s, a)
    mdp = build_parametric_mdp(4, 3, 0.9, -1.0)
    rng = np.random.default_rng(0)
    n = 40_000
    counts = np.zeros((4, 2))
    for _ in range(n):
        t = sample_transition(mdp, 1, 2, rng)
        counts[t.next_state, list(mdp.rewards).index(t.reward)] += 1
    assert counts[:, 0].sum() == 0
    expected = n / 4
    chi2 = float(((counts[:, 1] - expected) ** 2 / expected).sum())
    # 3 degrees of freedom; 16.27 is the 0.999 quantile
    assert chi2 < 16.27


def test_sample_transition_bounds():
    mdp = build_parametric_mdp(2, 2)
    with pytest.raises(IndexError):
        sample_transition(mdp, 2, 0, np.random.default_rng(0))


def test_sampling_is_seeded():
    mdp = build_parametric_mdp(4, 4, 0.9, -1.0)
    a = [sample_transition(mdp, 0, 1, np.random.default_rng(7)) for _ in range(3)]
    b = [sample_transition(mdp, 0, 1, np.random.default_rng(7)) for _ in range(3)]
    assert a == b
    assert isinstance(a[0], Transition)


def test_epsilon_greedy():
    rng = np.random.default_rng(1)
    row = np.array([0.0, 2.0, 1.0])
    assert all(epsilon_greedy_action(row, 0.0, rng) == 1 for _ in range(20))
    picks = {epsilon_greedy_action(row, 1.0, rng) for _ in range(200)}
    assert picks == {0, 1, 2}
    with pytest.raises(ValueError):
        epsilon_greedy_action(row, 1.5, rng)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 3), st.integers(0, 2**31))
def test_random_mdps_have_consistent_cdf(S, A, R, seed):
    rng = np.random.default_rng(seed)
    p = rng.random((S, A, S, R)) * (rng.random((S, A, S, R)) < 0.7)
    p[..., 0, 0] += 1e-3
    p /= p.sum(axis=(2, 3), keepdims=True)
    mdp = TabularMdp(S, A, np.arange(R, dtype=float), p, 0.5)
    cdf = mdp.outcome_cdf
    assert np.all(np.diff(cdf, axis=-1) >= 0.0)
    assert np.all(cdf[..., -1] == 1.0)
    # every sampled outcome has positive probability
    flat = p.reshape(S, A, -1)
    for u in rng.random(50):
        s, a = rng.integers(S), rng.integers(A)
        assert flat[s, a, outcome_index(cdf[s, a], u)] > 0.0
