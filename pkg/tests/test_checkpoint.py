import struct

import numpy as np
import pytest

from synq.checkpoint import (
    MAGIC,
    VERSION,
    CheckpointError,
    load_agent,
    load_checkpoint,
    save_agent,
    save_checkpoint,
)
from synq.td3 import Agent, Td3Hyperparams


def small_agent(seed=0):
    hp = Td3Hyperparams(hidden_dim=8, batch_size=4, learn_start=4,
                        buffer_capacity=32)
    return Agent(12, 1.0, hp, np.random.default_rng(seed))


class TestRawFormat:
    def test_round_trip_arrays_bit_exact(self, tmp_path):
        path = tmp_path / "x.synq"
        arrays = {
            "a": np.array([[1.0, -2.5], [3.0, 4.0]]),
            "b": np.linspace(0, 1, 7),
            "c": np.array(42.0),
        }
        save_checkpoint(path, {"k": "v", "n": 3}, arrays)
        header, loaded = load_checkpoint(path)
        assert header == {"k": "v", "n": "3"}
        for name, arr in arrays.items():
            assert np.array_equal(loaded[name], arr)
            assert loaded[name].dtype == np.float64

    def test_save_load_save_byte_identical(self, tmp_path):
        p1 = tmp_path / "one.synq"
        p2 = tmp_path / "two.synq"
        agent = small_agent()
        save_agent(p1, agent, regime="regular", seed=5, steps_trained=100)
        reloaded, header = load_agent(p1)
        save_agent(p2, reloaded, regime=header["regime"],
                   seed=int(header["seed"]),
                   steps_trained=int(header["steps_trained"]))
        assert p1.read_bytes() == p2.read_bytes()

    def test_magic_checked(self, tmp_path):
        path = tmp_path / "bad.synq"
        path.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(CheckpointError, match="magic"):
            load_checkpoint(path)

    def test_version_mismatch_rejected(self, tmp_path):
        path = tmp_path / "v2.synq"
        good = tmp_path / "good.synq"
        save_checkpoint(good, {}, {"a": np.zeros(2)})
        blob = bytearray(good.read_bytes())
        blob[4:8] = struct.pack("<I", VERSION + 1)
        path.write_bytes(bytes(blob))
        with pytest.raises(CheckpointError, match="version"):
            load_checkpoint(path)

    def test_truncated_rejected(self, tmp_path):
        good = tmp_path / "good.synq"
        save_checkpoint(good, {"k": "v"}, {"a": np.ones(100)})
        clipped = tmp_path / "clipped.synq"
        clipped.write_bytes(good.read_bytes()[:-30])
        with pytest.raises(CheckpointError, match="truncated"):
            load_checkpoint(clipped)

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / "absent.synq")


class TestAgentRoundTrip:
    def test_reloaded_agent_acts_identically(self, tmp_path):
        path = tmp_path / "agent.synq"
        agent = small_agent(seed=3)
        save_agent(path, agent, regime="regular", seed=3, steps_trained=0)
        reloaded, header = load_agent(path)
        assert header["regime"] == "regular"
        rng = np.random.default_rng(0)
        for _ in range(20):
            obs = rng.standard_normal(12)
            assert reloaded.select_action(obs) == agent.select_action(obs)

    def test_hyperparams_and_counters_preserved(self, tmp_path):
        path = tmp_path / "agent.synq"
        agent = small_agent(seed=4)
        agent.update_count = 77
        agent.actor_opt.step_count = 38
        save_agent(path, agent, regime="chaotic", seed=9, steps_trained=154)
        reloaded, header = load_agent(path)
        assert reloaded.hp == agent.hp
        assert reloaded.update_count == 77
        assert reloaded.actor_opt.step_count == 38
        assert header["steps_trained"] == "154"

    def test_optimizer_moments_preserved(self, tmp_path):
        path = tmp_path / "agent.synq"
        agent = small_agent(seed=5)
        agent.critic1_opt.m[0] = (np.full_like(agent.critic1.weights[0], 0.25),
                                  np.full_like(agent.critic1.biases[0], -0.5))
        save_agent(path, agent, regime="regular", seed=0, steps_trained=0)
        reloaded, _ = load_agent(path)
        assert np.array_equal(reloaded.critic1_opt.m[0][0],
                              agent.critic1_opt.m[0][0])
        assert np.array_equal(reloaded.critic1_opt.m[0][1],
                              agent.critic1_opt.m[0][1])
