"""Per-round latency decomposition and transaction throughput.

Latency has three parts: configuration time (charged only when the sharding
setting changed this round), intra-shard time (PBFT message propagation plus
validation delay plus semantic processing), and inter-shard time (submitting
one aggregated message to the main chain). Shards run their consensus rounds
in parallel, so the largest shard bounds the propagation term.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import NetworkConfig, ShardingState


@dataclass(frozen=True)
class RoundConditions:
    """Exogenous draws for one round."""

    rate: float            # bits/second, in [rate_min, rate_max]
    semantic_time: float   # seconds, in [0, semantic_time_max]
    reconfigured: bool     # true iff the sharding setting changed this round


@dataclass(frozen=True)
class LatencyBreakdown:
    t_config: float
    t_prop: float
    t_intra: float
    t_inter: float
    t_round: float


def propagation_time(shard_size: int, message_size: float, rate: float) -> float:
    """PBFT propagation: 2 * n * (n - 1) * message_size / rate seconds."""
    return 2.0 * shard_size * (shard_size - 1) * message_size / rate


def round_latency(state: ShardingState, cond: RoundConditions,
                  cfg: NetworkConfig) -> LatencyBreakdown:
    """Compose the full latency breakdown for one consensus round."""
    n = max(state.shard_sizes)  # slowest shard bounds the parallel phase
    t_prop = propagation_time(n, state.message_size, cond.rate)
    t_intra = t_prop + cfg.validation_delay + cond.semantic_time
    t_inter = state.message_size / cond.rate
    t_config = cfg.config_latency if cond.reconfigured else 0.0
    return LatencyBreakdown(
        t_config=t_config,
        t_prop=t_prop,
        t_intra=t_intra,
        t_inter=t_inter,
        t_round=t_config + t_intra + t_inter,
    )


def throughput(state: ShardingState, lat: LatencyBreakdown,
               cfg: NetworkConfig) -> float:
    """Transactions per second for one round.

    Every shard commits one message of state.message_size bits per round, so
    the round moves K * (S / tx_size) transactions in t_round seconds.
    Fractional transactions per message are allowed: this is a rate.
    """
    per_shard_txs = state.message_size / cfg.tx_size
    return state.num_shards * per_shard_txs / lat.t_round
