import csv
import io
import itertools

import numpy as np
import pytest

from semshard.core import ConfigError, NetworkConfig, Rng, partition
from semshard.env import (Action, EpisodeFinishedError, ShardEnv, run_baseline,
                          EPISODE_CSV_HEADER)

FROZEN = (1e7, 20.0)  # rate 10 Mbps, semantic time 20 s


def frozen_env(**cfg_kwargs):
    cfg = NetworkConfig(**cfg_kwargs)
    return ShardEnv(cfg, frozen_exogenous=FROZEN), cfg


def straight_line_reward(k, s, n, rate, t_sem, reconfigured):
    """Independent composition of the three formulas, constants inlined."""
    sizes = [n // k + (1 if i < n % k else 0) for i in range(k)]
    biggest = max(sizes)
    t_prop = 2.0 * biggest * (biggest - 1) * s / rate
    t_round = (0.001 if reconfigured else 0.0) + t_prop + 0.1 + t_sem + s / rate
    return (k * (s / 4000.0) / t_round) / 1000.0


class TestReset:
    def test_initial_state_and_normalization(self):
        env = ShardEnv(NetworkConfig(nodes_initial=100))
        obs = env.reset(Rng(0))
        assert obs.shape == (8,)
        assert obs[2] == pytest.approx(100 / 600)
        assert env.sharding == (1, 8_000_000)
        assert np.all(obs >= 0.0) and np.all(obs <= 1.0)

    def test_equal_seeds_equal_observations(self):
        env_a = ShardEnv(NetworkConfig())
        env_b = ShardEnv(NetworkConfig())
        assert np.array_equal(env_a.reset(Rng(77)), env_b.reset(Rng(77)))

    def test_nodes_initial_above_cap_rejected(self):
        with pytest.raises(ConfigError, match="nodes_initial"):
            ShardEnv(NetworkConfig(nodes_initial=601))


class TestStep:
    def test_noop_keeps_setting(self):
        env, _ = frozen_env()
        env.reset(Rng(0))
        _, reward, _, info = env.step(Action.NOOP, Rng(1))
        assert env.sharding == (1, 8_000_000)
        assert not info["clamped"] and not info["reconfigured"]
        assert reward == pytest.approx(
            straight_line_reward(1, 8_000_000, 100, *FROZEN, False))

    def test_inc_at_cap_is_clamped(self):
        env, cfg = frozen_env()
        env.reset(Rng(0))
        for _ in range(24):  # ramp to the 25-shard cap
            env.step(Action.INC_SHARDS, Rng(0))
        assert env.sharding[0] == 25
        _, _, _, info = env.step(Action.INC_SHARDS, Rng(0))
        assert env.sharding[0] == 25
        assert info["clamped"] and not info["reconfigured"]

    def test_message_size_actions_move_by_one_step(self):
        env, cfg = frozen_env()
        env.reset(Rng(0))
        env.step(Action.DEC_MSG, Rng(0))
        assert env.sharding[1] == 8_000_000 - cfg.message_size_step
        env.step(Action.INC_MSG, Rng(0))
        assert env.sharding[1] == 8_000_000

    def test_ramp_to_optimum_reward_profile(self):
        # K 10 -> 25 via INC_SHARDS under frozen draws
        env, _ = frozen_env(rounds_per_episode=60)
        env.reset(Rng(0))
        for _ in range(9):
            env.step(Action.INC_SHARDS, Rng(0))
        _, reward_at_10, _, _ = env.step(Action.NOOP, Rng(0))
        assert reward_at_10 == pytest.approx(0.1213, abs=5e-5)

        ramp_rewards = []
        for _ in range(15):
            _, reward, _, _ = env.step(Action.INC_SHARDS, Rng(0))
            ramp_rewards.append(reward)
        assert env.sharding[0] == 25
        assert all(b > a for a, b in zip(ramp_rewards, ramp_rewards[1:]))

        _, reward_at_25, _, _ = env.step(Action.NOOP, Rng(0))
        assert reward_at_25 == pytest.approx(1.2469, abs=5e-5)

    def test_step_after_terminal_raises(self):
        env, _ = frozen_env(rounds_per_episode=2)
        env.reset(Rng(0))
        env.step(Action.NOOP, Rng(0))
        _, _, terminal, _ = env.step(Action.NOOP, Rng(0))
        assert terminal
        with pytest.raises(EpisodeFinishedError):
            env.step(Action.NOOP, Rng(0))


class TestTrajectoryProperties:
    def _rollout(self, seed, rounds=100):
        cfg = NetworkConfig(nodes_initial=60, rounds_per_episode=rounds)
        env = ShardEnv(cfg)
        rng = Rng(seed)
        obs = env.reset(rng)
        trace = [obs]
        while not env.terminal:
            action = Action(int(rng.integers(0, 4)))
            obs, reward, _, info = env.step(action, rng)
            trace.append((obs.tolist(), reward, info["num_shards"],
                          info["message_size"], info["n_nodes"]))
        return trace, env.log

    def test_seed_determines_trajectory(self):
        trace_a, log_a = self._rollout(123)
        trace_b, log_b = self._rollout(123)
        assert repr(trace_a) == repr(trace_b)
        assert log_a == log_b

    def test_sharding_invariants_hold_every_step(self):
        cfg = NetworkConfig(nodes_initial=60)
        env = ShardEnv(cfg)
        rng = Rng(5)
        for _ in range(3):
            env.reset(rng)
            while not env.terminal:
                action = Action(int(rng.integers(0, 4)))
                _, _, _, info = env.step(action, rng)
                k, s = env.sharding
                n = env.n_nodes
                assert 1 <= k <= n // cfg.min_shard_size
                assert cfg.message_size_min <= s <= cfg.avg_message_size_max
                sizes = partition(n, k, cfg.min_shard_size)
                assert sum(sizes) == n and min(sizes) >= 4

    def test_reward_consistency_with_log(self):
        _, log = self._rollout(99)
        assert len(log.records) == 100
        for rec in log.records:
            expected = straight_line_reward(
                rec.num_shards, rec.message_size, rec.n_nodes, rec.rate,
                rec.semantic_time, rec.reconfigured)
            assert rec.tps == pytest.approx(expected * 1000.0, rel=1e-12)

    def test_no_policy_beats_static_optimum(self):
        env, cfg = frozen_env(rounds_per_episode=40)
        best = max(
            straight_line_reward(k, s, 100, *FROZEN, False)
            for k, s in itertools.product(
                range(1, 26),
                range(cfg.message_size_min, cfg.avg_message_size_max + 1,
                      cfg.message_size_step)))
        rng = Rng(8)
        for _ in range(3):
            env.reset(rng)
            while not env.terminal:
                action = Action(int(rng.integers(0, 4)))
                _, reward, _, _ = env.step(action, rng)
                assert reward <= best + 1e-12


class TestBaseline:
    def test_frozen_draws_pin_the_max_setting(self):
        cfg = NetworkConfig(rounds_per_episode=20)
        run = run_baseline(cfg, 1, Rng(4), frozen_exogenous=FROZEN)
        assert len(run) == 1
        # re-derive via the log of an equivalent forced-setting episode
        env = ShardEnv(cfg, frozen_exogenous=FROZEN)
        env.reset(Rng(4))
        while not env.terminal:
            env.force_setting(25, cfg.avg_message_size_max, Rng(0))
        assert all(rec.num_shards == 25 and rec.message_size == 8_000_000
                   for rec in env.log.records)

    def test_equal_seeds_identical_rewards(self):
        cfg = NetworkConfig(rounds_per_episode=30)
        assert run_baseline(cfg, 3, Rng(6)) == run_baseline(cfg, 3, Rng(6))

    def test_mean_matches_hand_composition(self):
        cfg = NetworkConfig(rounds_per_episode=100)
        mean = run_baseline(cfg, 1, Rng(0), frozen_exogenous=FROZEN)[0]
        first = straight_line_reward(25, 8_000_000, 100, *FROZEN, True)
        steady = straight_line_reward(25, 8_000_000, 100, *FROZEN, False)
        assert mean == pytest.approx((first + 99 * steady) / 100, abs=1e-9)


class TestEpisodeLog:
    def test_csv_schema_and_roundtrip(self):
        env, cfg = frozen_env(rounds_per_episode=5)
        rng = Rng(2)
        env.reset(rng)
        while not env.terminal:
            env.step(Action.INC_SHARDS, rng)
        buf = io.StringIO()
        env.log.write_csv(buf)
        buf.seek(0)
        rows = list(csv.DictReader(buf))
        assert list(rows[0].keys()) == EPISODE_CSV_HEADER.split(",")
        assert len(rows) == 5
        for rec, row in zip(env.log.records, rows):
            assert int(row["round"]) == rec.round
            assert int(row["K"]) == rec.num_shards
            assert float(row["tps"]) == rec.tps
            assert row["action"] == "INC_SHARDS"
            assert int(row["clamped"]) in (0, 1)
