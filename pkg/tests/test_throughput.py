import pytest
from hypothesis import given
from hypothesis import strategies as st

from semshard.core import NetworkConfig, make_sharding_state
from semshard.throughput import (RoundConditions, propagation_time,
                                 round_latency, throughput)

CFG = NetworkConfig()


class TestPropagationTime:
    def test_ten_node_shard(self):
        # 2 * 10 * 9 * 8e6 / 1e7
        assert propagation_time(10, 8e6, 1e7) == pytest.approx(144.0)

    def test_single_node_shard_is_free(self):
        assert propagation_time(1, 8e6, 1e7) == 0.0

    def test_four_node_shard(self):
        assert propagation_time(4, 8e6, 1e7) == pytest.approx(19.2)

    @given(n=st.integers(1, 300), s=st.floats(1e3, 1e7),
           r=st.floats(1e6, 1e9))
    def test_quadratic_identity(self, n, s, r):
        # doubling the shard size follows the expanded quadratic exactly
        expanded = (8.0 * n * n - 4.0 * n) * s / r
        assert propagation_time(2 * n, s, r) == pytest.approx(expanded,
                                                              rel=1e-12)


class TestRoundLatency:
    def test_reconfigured_round(self):
        state = make_sharding_state(10, 8_000_000, 100, 0, CFG)
        lat = round_latency(state, RoundConditions(1e7, 20.0, True), CFG)
        assert lat.t_round == pytest.approx(164.901, abs=1e-9)

    def test_steady_round_drops_config_time(self):
        state = make_sharding_state(10, 8_000_000, 100, 0, CFG)
        lat = round_latency(state, RoundConditions(1e7, 20.0, False), CFG)
        assert lat.t_config == 0.0
        assert lat.t_round == pytest.approx(164.900, abs=1e-9)

    def test_max_sharding(self):
        state = make_sharding_state(25, 8_000_000, 100, 0, CFG)
        lat = round_latency(state, RoundConditions(1e7, 20.0, False), CFG)
        assert lat.t_round == pytest.approx(40.1, abs=1e-9)

    def test_largest_shard_bounds_propagation(self):
        # 101 nodes in 10 shards: one shard of 11 dominates
        state = make_sharding_state(10, 8_000_000, 101, 0, CFG)
        lat = round_latency(state, RoundConditions(1e7, 0.0, False), CFG)
        assert lat.t_prop == pytest.approx(2 * 11 * 10 * 0.8)

    @given(k=st.integers(1, 25), s=st.integers(800_000, 8_000_000),
           rate=st.floats(1e7, 1e8), t_sem=st.floats(0.0, 20.0),
           reconf=st.booleans())
    def test_breakdown_additivity(self, k, s, rate, t_sem, reconf):
        state = make_sharding_state(k, s, 100, 0, CFG)
        lat = round_latency(state, RoundConditions(rate, t_sem, reconf), CFG)
        assert lat.t_round == pytest.approx(
            lat.t_config + lat.t_intra + lat.t_inter, rel=1e-12)
        assert lat.t_intra == pytest.approx(
            lat.t_prop + CFG.validation_delay + t_sem, rel=1e-12)


class TestThroughput:
    def _tps(self, k, s, rate, t_sem, reconf, n=100):
        state = make_sharding_state(k, s, n, 0, CFG)
        lat = round_latency(state, RoundConditions(rate, t_sem, reconf), CFG)
        return throughput(state, lat, CFG)

    def test_ten_shards(self):
        assert self._tps(10, 8_000_000, 1e7, 20.0, True) == pytest.approx(
            20_000 / 164.901)

    def test_max_shards(self):
        assert self._tps(25, 8_000_000, 1e7, 20.0, False) == pytest.approx(
            50_000 / 40.1)

    def test_one_transaction_per_round(self):
        # one shard carrying exactly one transaction
        cfg = NetworkConfig(message_size_min=4_000, tx_size=4_000)
        state = make_sharding_state(1, 4_000, 8, 0, cfg)
        lat = round_latency(state, RoundConditions(1e7, 1.0, False), cfg)
        assert throughput(state, lat, cfg) == pytest.approx(1.0 / lat.t_round)

    @given(k=st.integers(1, 25), s=st.integers(800_000, 8_000_000),
           t_sem=st.floats(0.0, 19.0),
           rate=st.floats(1.0e7, 5.9e7), bump=st.floats(1e5, 1e6))
    def test_monotone_in_rate_and_semantic_time(self, k, s, t_sem, rate, bump):
        base = self._tps(k, s, rate, t_sem, False)
        assert self._tps(k, s, rate + bump, t_sem, False) > base
        assert self._tps(k, s, rate, t_sem + 0.5, False) < base


def test_sweep_matches_straight_line_composition():
    """Every valid K at N=200 against an independent hand composition."""
    n, s, rate, t_sem = 200, 8_000_000, 1e7, 20.0
    for k in range(1, n // 4 + 1):
        sizes = [n // k + (1 if i < n % k else 0) for i in range(k)]
        biggest = max(sizes)
        t_prop = 2.0 * biggest * (biggest - 1) * s / rate
        t_round = t_prop + 0.1 + t_sem + s / rate
        expected = k * (s / 4000.0) / t_round

        state = make_sharding_state(k, s, n, 0, CFG)
        lat = round_latency(state, RoundConditions(rate, t_sem, False), CFG)
        assert throughput(state, lat, CFG) == pytest.approx(expected, rel=1e-12)
