"""Environment contract: collision semantics, noise stream discipline,
matrix loading and validation."""

from __future__ import annotations

import numpy as np
import pytest

from maxmin_bandit.env import (
    BUILTIN_MATRICES,
    CollisionEnv,
    NoiseModel,
    RewardMatrix,
    expected_min_utility,
    instantaneous_regret,
    load_matrix,
    no_collision_indicator,
)


def make_env(matrix="u1", half_width=0.05, seed=0):
    return CollisionEnv(
        load_matrix(matrix), NoiseModel(half_width), np.random.default_rng(seed)
    )


# -- matrices ---------------------------------------------------------------


def test_builtin_u1_values():
    m = load_matrix("u1")
    assert m.name == "u1"
    assert (m.n_players, m.n_arms) == (4, 4)
    assert m.mu[0, 1] == 0.9
    assert m.mu[1, 1] == 0.5
    assert m.mu[3, 0] == 0.1
    assert np.array_equal(m.mu, np.array(BUILTIN_MATRICES["u1"]))


def test_builtin_u2_shape():
    m = load_matrix("u2")
    assert (m.n_players, m.n_arms) == (10, 10)
    assert np.all(m.mu >= 0.05) and np.all(m.mu <= 0.9)


def test_matrix_rejects_more_players_than_arms():
    with pytest.raises(ValueError, match="arms as players"):
        RewardMatrix(np.full((3, 2), 0.5))


def test_matrix_rejects_out_of_range_entries():
    with pytest.raises(ValueError, match="\\[0, 1\\]"):
        RewardMatrix(np.array([[0.5, 1.5]]))


def test_matrix_rejects_non_2d():
    with pytest.raises(ValueError, match="2-D"):
        RewardMatrix(np.array([0.5, 0.5]))


def test_matrix_is_immutable():
    m = load_matrix("u1")
    with pytest.raises(ValueError):
        m.mu[0, 0] = 0.7


def test_load_matrix_from_file(tmp_path):
    path = tmp_path / "m.txt"
    path.write_text("0.1 0.5 0.9\n")
    m = load_matrix(path)
    assert (m.n_players, m.n_arms) == (1, 3)
    assert list(m.mu[0]) == [0.1, 0.5, 0.9]


def test_load_matrix_unknown_source():
    with pytest.raises(FileNotFoundError):
        load_matrix("no_such_matrix_anywhere")


# -- collision indicator ----------------------------------------------------


def test_no_collision_indicator_shared_arm():
    assert list(no_collision_indicator((0, 0, 1), 3)) == [0, 1, 1]


def test_no_collision_indicator_all_distinct():
    assert list(no_collision_indicator((0, 1), 2)) == [1, 1]


def test_no_collision_indicator_empty_arm_counts_clear():
    # Three players on arm 1; untouched arms count as collision-free.
    assert list(no_collision_indicator((1, 1, 1, 2), 4)) == [1, 0, 1, 1]


def test_occupancy_conservation():
    rng = np.random.default_rng(3)
    for _ in range(50):
        profile = rng.integers(0, 6, size=5)
        counts = np.bincount(profile, minlength=6)
        assert counts.sum() == 5


# -- step -------------------------------------------------------------------


def test_step_zero_noise_known_profile():
    env = make_env(half_width=0.0)
    out = env.step((1, 0, 2, 3))
    assert [o.reward for o in out] == [0.9, 0.25, 0.5, 0.5]
    assert not any(o.collided for o in out)


def test_step_all_players_same_arm():
    env = make_env()
    out = env.step((0, 0, 0, 0))
    assert all(o.collided for o in out)
    assert all(o.reward == 0.0 for o in out)


def test_step_reward_zero_iff_collided():
    env = make_env(seed=11)
    rng = np.random.default_rng(5)
    for _ in range(200):
        profile = rng.integers(0, 4, size=4)
        for o in env.step(profile):
            assert o.collided == (o.reward == 0.0)


def test_step_rejects_bad_profiles():
    env = make_env()
    with pytest.raises(ValueError, match="entries"):
        env.step((0, 1))
    with pytest.raises(ValueError, match="out of range"):
        env.step((0, 1, 2, 4))


def test_step_noise_stays_in_band():
    env = make_env(seed=1)
    mu = env.matrix.mu
    for _ in range(100):
        out = env.step((0, 1, 2, 3))
        for n, o in enumerate(out):
            assert abs(o.reward - mu[n, n]) <= 0.05


def test_noise_is_not_clipped():
    matrix = RewardMatrix(np.array([[0.02, 0.03]]))
    env = CollisionEnv(matrix, NoiseModel(0.05), np.random.default_rng(0))
    rewards = [env.step((0,))[0].reward for _ in range(200)]
    assert min(rewards) < 0.0


def test_noise_model_rejects_negative_width():
    with pytest.raises(ValueError):
        NoiseModel(-0.01)


def test_step_deterministic_replay():
    a = make_env(seed=42)
    b = make_env(seed=42)
    rng = np.random.default_rng(7)
    for _ in range(100):
        profile = rng.integers(0, 4, size=4)
        assert a.step(profile) == b.step(profile)


def test_stream_position_independent_of_play():
    # The per-turn draw is consumed on collisions too, so different play
    # histories leave the stream at the same point.
    a = make_env(seed=9)
    b = make_env(seed=9)
    a.step((0, 0, 0, 0))
    b.step((0, 1, 2, 3))
    assert a.step((0, 1, 2, 3)) == b.step((0, 1, 2, 3))


# -- regret helpers ---------------------------------------------------------


def test_expected_min_utility_max_sum_profile():
    assert expected_min_utility(load_matrix("u1"), (1, 0, 2, 3)) == 0.25


def test_expected_min_utility_collision_is_zero():
    m = load_matrix("u1")
    assert expected_min_utility(m, (0, 1, 2, 1)) == 0.0


def test_instantaneous_regret_at_optimum():
    m = load_matrix("u1")
    assert instantaneous_regret(m, 0.5, (0, 1, 2, 3)) == 0.0


def test_instantaneous_regret_on_collision_is_full_gamma():
    m = load_matrix("u1")
    rng = np.random.default_rng(2)
    for _ in range(50):
        profile = rng.integers(0, 4, size=4)
        if len(set(profile.tolist())) < 4:
            assert instantaneous_regret(m, 0.5, profile) == 0.5


def test_instantaneous_regret_known_profiles():
    m = load_matrix("u1")
    # (1, 0, 2, 3) is the max-sum assignment: min utility 0.25.
    assert instantaneous_regret(m, 0.5, (1, 0, 2, 3)) == 0.25
    # Utilities (0.9, 0.25, 0.5, 0.25): same shortfall.
    assert instantaneous_regret(m, 0.5, (1, 0, 3, 2)) == 0.25


# -- block stepping and stream skips ---------------------------------------


def test_step_block_matches_scalar_steps():
    rng = np.random.default_rng(21)
    profiles = rng.integers(0, 4, size=(157, 4))
    scalar = make_env(seed=5)
    block = make_env(seed=5)
    rewards, collided = block.step_block(profiles)
    for t, profile in enumerate(profiles):
        out = scalar.step(profile)
        assert [o.reward for o in out] == list(rewards[t])
        assert [o.collided for o in out] == list(collided[t])


def test_step_block_rejects_wrong_width():
    env = make_env()
    with pytest.raises(ValueError, match="columns"):
        env.step_block(np.zeros((5, 3), dtype=np.intp))


def test_skip_matches_discarded_steps():
    stepped = make_env(seed=13)
    skipped = make_env(seed=13)
    rng = np.random.default_rng(1)
    for _ in range(75):
        stepped.step(rng.integers(0, 4, size=4))
    skipped.skip(75)
    assert stepped.step((0, 1, 2, 3)) == skipped.step((0, 1, 2, 3))


def test_skip_rejects_negative():
    with pytest.raises(ValueError):
        make_env().skip(-1)
