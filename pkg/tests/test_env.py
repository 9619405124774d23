import numpy as np
import pytest
from scipy.optimize import fsolve

from synq.dynamics import BVP_RECOVERY_DAMPING, EnsembleConfig, Heterogeneity, RegimeKind
from synq.env import (
    ActionOutOfBounds,
    EnvConfig,
    SuppressionEnv,
    TemporalRepConfig,
    compute_reward,
    temporal_representation,
)


def small_env_config(**overrides):
    defaults = dict(
        ensemble=EnsembleConfig(regime=RegimeKind.REGULAR, n_neurons=30),
        window_len=40,
        warmup_steps=80,
        episode_len=200,
    )
    defaults.update(overrides)
    return EnvConfig(**defaults)


class TestTemporalRepresentation:
    def test_constant_signal(self):
        cfg = TemporalRepConfig()
        history = [1.0] * 10
        assert temporal_representation(history, cfg) == pytest.approx(0.99, abs=1e-12)

    def test_impulse_spreads_over_three_onsets(self):
        cfg = TemporalRepConfig()
        impulse_at = 5
        history = [0.0] * 12
        history[impulse_at] = 1.0
        transformed = [
            temporal_representation(history[: t + 1], cfg) for t in range(12)
        ]
        for t, value in enumerate(transformed):
            if t in (impulse_at, impulse_at + 1, impulse_at + 2):
                assert value == pytest.approx(0.33, abs=1e-12)
            elif t < impulse_at:
                assert value == 0.0
            elif t > impulse_at + 2:
                assert value == 0.0

    def test_direct_evaluation_oracle(self):
        cfg = TemporalRepConfig()
        history = [0.0, 0.0, 0.3, -0.1, 0.5]
        expected = 0.33 * (0.5 + (-0.1) + 0.3)
        assert temporal_representation(history, cfg) == pytest.approx(expected,
                                                                      abs=1e-15)
        assert expected == pytest.approx(0.231, abs=1e-12)

    def test_short_history_padded_with_earliest(self):
        cfg = TemporalRepConfig()
        assert temporal_representation([2.0], cfg) == pytest.approx(0.33 * 6.0,
                                                                    abs=1e-12)
        assert temporal_representation([2.0, 1.0], cfg) == pytest.approx(
            0.33 * (1.0 + 2.0 + 2.0), abs=1e-12)

    def test_linearity(self):
        cfg = TemporalRepConfig(n_parts=3, part_weight=0.33, onset_delay=2)
        rng = np.random.default_rng(0)
        for _ in range(25):
            u = rng.standard_normal(12)
            v = rng.standard_normal(12)
            a, b = rng.standard_normal(2)
            combined = temporal_representation(list(a * u + b * v), cfg)
            split = a * temporal_representation(list(u), cfg) + \
                b * temporal_representation(list(v), cfg)
            assert combined == pytest.approx(split, abs=1e-10)


class TestReward:
    def test_extremum(self):
        assert compute_reward(0.0, 0.0, 0.0) == pytest.approx(10.3, abs=1e-12)

    def test_large_deviation_point(self):
        diff = np.sqrt(90.0)
        assert compute_reward(diff, 0.0, 0.0) == pytest.approx(1.3, abs=1e-12)

    def test_direct_evaluation_oracle(self):
        expected = 100.0 / (0.5**2 + 10.0) + 3.0 / (0.2 + 10.0)
        assert compute_reward(0.5, 0.0, 0.2) == pytest.approx(expected, abs=1e-15)

    def test_bounds(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            r = compute_reward(rng.uniform(-5, 5), rng.uniform(-5, 5),
                               rng.uniform(0, 5))
            assert 0.0 < r <= 10.3

    def test_monotone_decreasing_in_action(self):
        rewards = [compute_reward(0.3, 0.0, a) for a in (0.0, 0.1, 0.5, 1.0)]
        assert all(a > b for a, b in zip(rewards, rewards[1:]))

    def test_monotone_decreasing_in_deviation(self):
        rewards = [compute_reward(d, 0.0, 0.2) for d in (0.0, 0.2, 0.8, 2.0)]
        assert all(a > b for a, b in zip(rewards, rewards[1:]))


class TestReset:
    def test_same_seed_identical_observation(self):
        env = SuppressionEnv(small_env_config())
        a = env.reset(seed=3)
        b = env.reset(seed=3)
        assert np.array_equal(a, b)

    def test_observation_within_attractor_bounds(self):
        env = SuppressionEnv(small_env_config())
        obs = env.reset(seed=4)
        assert obs.shape == (40,)
        assert np.all(np.abs(obs) <= 3.0)

    def test_padding_before_window_fills(self):
        env = SuppressionEnv(small_env_config(warmup_steps=0))
        obs = env.reset(seed=5)
        # Only one sample exists; the whole window repeats it.
        assert np.all(obs == obs[0])

    def test_invalid_config_rejected(self):
        with pytest.raises(ValueError):
            SuppressionEnv(small_env_config(window_len=2))  # < parts * delay


class TestStep:
    def test_done_at_episode_boundary(self):
        env = SuppressionEnv(small_env_config(episode_len=5))
        env.reset(seed=6)
        flags = [env.step(0.0).done for _ in range(5)]
        assert flags == [False, False, False, False, True]

    def test_reward_always_in_bounds(self):
        env = SuppressionEnv(small_env_config())
        env.reset(seed=7)
        rng = np.random.default_rng(7)
        for _ in range(150):
            r = env.step(rng.uniform(-1, 1)).reward
            assert 0.0 < r <= 10.3

    def test_clamp_mode_clips_action(self):
        env = SuppressionEnv(small_env_config())
        env.reset(seed=8)
        result = env.step(5.0)
        assert result.info["action"] == 1.0

    def test_reject_mode_raises(self):
        env = SuppressionEnv(small_env_config(clamp_actions=False))
        env.reset(seed=9)
        with pytest.raises(ActionOutOfBounds):
            env.step(1.5)

    def test_observation_slides_one_sample(self):
        env = SuppressionEnv(small_env_config())
        obs = env.reset(seed=10)
        nxt = env.step(0.0).observation
        assert np.array_equal(nxt[:-1], obs[1:])

    def test_quenched_ensemble_zero_action_reward(self):
        # Identical neurons parked at the self-consistent rest point of the
        # coupled system stay there, so the mean-field deviation is zero and
        # the reward sits at its extremum.
        alpha, current, eps = 0.7, 0.6, 0.03
        b = BVP_RECOVERY_DAMPING

        def equations(v):
            x, y = v
            return [x - x**3 / 3 - y + current + eps * x, x + alpha - b * y]

        root = fsolve(equations, [-1.0, -0.5])
        assert np.allclose(equations(root), 0.0, atol=1e-12)

        cfg = small_env_config(
            ensemble=EnsembleConfig(
                regime=RegimeKind.REGULAR,
                n_neurons=10,
                heterogeneity=Heterogeneity(alpha_range=(alpha, alpha),
                                            drive_range=(current, current)),
            ),
            warmup_steps=0,
        )
        env = SuppressionEnv(cfg)
        env.reset(seed=11)
        env._state.states[:] = root
        env._raw = [float(root[0])] * cfg.window_len
        env._transformed = [0.99 * float(root[0])] * cfg.window_len
        result = env.step(0.0)
        assert result.reward == pytest.approx(10.3, abs=1e-6)
