"""Scheduler policies and the selection registry."""

from __future__ import annotations

from ..config import SimConfig
from ..fabric import Scheduler
from .aalo import AaloOracleScheduler, AaloScheduler, aalo_oracle_enqueue
from .base import queue_for
from .baselines import FairScheduler, FifoScheduler, SebfScheduler, sebf_order, waterfill_rates
from .sampling import (PortBusyStats, SamplingScheduler, estimate_size, num_pilots,
                       port_contention, priority_metric, select_pilot_flows)

REGISTRY = {
    "sampling": SamplingScheduler,
    "aalo": AaloScheduler,
    "aalo-oracle": AaloOracleScheduler,
    "sebf": SebfScheduler,
    "fifo": FifoScheduler,
    "fair": FairScheduler,
}


def make_scheduler(config: SimConfig) -> Scheduler:
    try:
        cls = REGISTRY[config.scheduler]
    except KeyError:
        raise ValueError(f"unknown scheduler {config.scheduler!r}; "
                         f"choose from {sorted(REGISTRY)}") from None
    return cls(config.params)


__all__ = [
    "REGISTRY", "make_scheduler", "queue_for",
    "SamplingScheduler", "AaloScheduler", "AaloOracleScheduler",
    "SebfScheduler", "FifoScheduler", "FairScheduler",
    "PortBusyStats", "estimate_size", "num_pilots", "port_contention",
    "priority_metric", "select_pilot_flows", "sebf_order", "waterfill_rates",
    "aalo_oracle_enqueue",
]
