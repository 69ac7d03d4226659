"""Run configuration: fabric parameters and scheduler parameters.

Field names are the knobs exposed verbatim in config files and CLI flags.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

MB = 1 << 20

#: bytes/ms such that 1 MB takes 8 ms to send
DEFAULT_BANDWIDTH = MB / 8.0


@dataclass(frozen=True)
class PilotPolicy:
    """How many flows of a wide coflow are pre-scheduled as pilots.

    kind is one of ``constant`` (value = count), ``frac_senders`` or
    ``frac_flows`` (value = fraction).
    """

    kind: str = "frac_senders"
    value: float = 0.05

    def __post_init__(self):
        if self.kind not in ("constant", "frac_senders", "frac_flows"):
            raise ValueError(f"unknown pilot policy {self.kind!r}")
        if self.value <= 0:
            raise ValueError("pilot policy value must be positive")

    def __str__(self):
        if self.kind == "constant":
            return f"constant({int(self.value)})"
        return f"{self.kind}({self.value:g})"

    @classmethod
    def parse(cls, text: str) -> "PilotPolicy":
        m = re.fullmatch(r"\s*(constant|frac_senders|frac_flows)\s*\(\s*([0-9.eE+-]+)\s*\)\s*", text)
        if not m:
            raise ValueError(f"cannot parse pilot policy {text!r}")
        return cls(kind=m.group(1), value=float(m.group(2)))


@dataclass(frozen=True)
class SchedulerParams:
    """Priority-queue and piloting knobs shared by the queue-based schedulers."""

    K: int = 10                      # number of priority queues
    Q0_hi: int = 10 * MB             # first-queue upper threshold, bytes
    E: float = 10.0                  # threshold growth factor
    B: float = 10.0                  # inter-queue weight decay factor
    T: int = 7                       # thin-coflow bypass width limit
    pilot_policy: PilotPolicy = field(default_factory=PilotPolicy)
    intercoflow_policy: str = "D"    # one of A..F
    fast_rate_heuristic: bool = True

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.E <= 1:
            raise ValueError("E must be > 1")
        if self.B < 1:
            raise ValueError("B must be >= 1")
        if self.T < 0:
            raise ValueError("T must be >= 0")
        if self.intercoflow_policy not in "ABCDEF" or len(self.intercoflow_policy) != 1:
            raise ValueError(f"unknown inter-coflow policy {self.intercoflow_policy!r}")

    def queue_hi(self, q: int) -> float:
        """Upper threshold of queue q; the top queue is unbounded."""
        if q >= self.K - 1:
            return float("inf")
        return self.Q0_hi * (self.E ** q)


@dataclass(frozen=True)
class SimConfig:
    """Fabric and run parameters for one simulation."""

    num_ports: int
    port_bandwidth: float = DEFAULT_BANDWIDTH  # bytes/ms, per direction
    delta: float = 8.0                         # scheduling interval, ms
    scheduler: str = "sampling"
    params: SchedulerParams = field(default_factory=SchedulerParams)
    rng_seed: int = 0                          # reserved for stochastic schedulers

    def __post_init__(self):
        if self.num_ports < 1:
            raise ValueError("num_ports must be >= 1")
        if self.port_bandwidth <= 0:
            raise ValueError("port_bandwidth must be positive")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
