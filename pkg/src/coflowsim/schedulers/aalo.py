"""Priority-queue learner baseline and its oracle variant.

Every coflow starts in the top queue and is demoted toward lower-priority
queues as its total bytes sent cross the exponentially growing per-queue
thresholds; queues share port bandwidth by exponentially decaying weights and
serve FIFO inside. Plans are recomputed on a fixed delta grid (the coordinator
interval); between ticks local ports follow the standing plan, so capacity
freed mid-interval waits for the next tick.

The oracle variant knows each coflow's final queue at arrival and starts it
there, never demoting: the same machinery with zero learning cost.

Ticks at which provably nothing changed (no arrivals, completions, or
threshold crossings since the last plan) are skipped analytically; behavior is
identical to stepping every tick.
"""

from __future__ import annotations

import math

import numpy as np

from ..config import SchedulerParams
from ..fabric import Scheduler, SimState
from .base import EPS_RATE, allocate_local_port_queues, queue_for


class AaloScheduler(Scheduler):
    name = "aalo"
    replan_on_flow_events = False
    oracle = False

    def __init__(self, params: SchedulerParams):
        self.params = params

    def attach(self, state: SimState) -> None:
        nc = state.n_coflows
        self.queue = np.zeros(nc, dtype=np.int64)
        self.events_pending = False

    def _grid_ceil(self, t: float, delta: float) -> float:
        return max(math.ceil(t / delta - 1e-9) * delta, t)

    def on_events(self, state: SimState, arrived, flows_done, coflows_done, is_wakeup) -> bool:
        if arrived or len(flows_done) or coflows_done:
            self.events_pending = True
        for ci in arrived:
            q = queue_for(float(state.c_total[ci]) if self.oracle else 0.0, self.params)
            self.queue[ci] = q
            cid = int(state.c_id[ci])
            state.log.queue_events.setdefault(cid, []).append((state.now, int(q), 0.0))
        if not is_wakeup:
            return False
        if not self.oracle:
            for ci in state.active_coflows:
                q = queue_for(float(state.c_sent[ci]), self.params)
                if q > self.queue[ci]:
                    self.queue[ci] = q
                    cid = int(state.c_id[ci])
                    state.log.queue_events.setdefault(cid, []).append(
                        (state.now, int(q), float(state.c_sent[ci])))
        self.events_pending = False
        return True

    def next_wakeup(self, state: SimState) -> float:
        if not state.active_coflows:
            return math.inf
        delta = state.config.delta
        if self.events_pending:
            return self._grid_ceil(state.now, delta)
        if self.oracle:
            return math.inf
        # next tick strictly after now: a crossing predicted "at now" (float
        # dust below the threshold) must wait one interval or it would spin
        floor_next = (math.floor(state.now / delta + 1e-9) + 1) * delta
        best = math.inf
        for ci in state.active_coflows:
            rate = state.c_rate[ci]
            if rate <= EPS_RATE:
                continue
            hi = self.params.queue_hi(int(self.queue[ci]))
            if math.isinf(hi):
                continue
            t_cross = state.now + (hi - state.c_sent[ci]) / rate
            wake = self._grid_ceil(t_cross, delta)
            if wake <= state.now:
                wake = floor_next
            best = min(best, wake)
        return best

    def allocate(self, state: SimState) -> None:
        buckets: list[list[int]] = [[] for _ in range(self.params.K)]
        actives = sorted(state.active_coflows,
                         key=lambda c: (state.c_arrival[c], state.c_id[c]))
        for ci in actives:
            buckets[self.queue[ci]].append(ci)
        up = np.full(state.P, state.C)
        dn = np.full(state.P, state.C)
        allocate_local_port_queues(state, buckets, self.params, up, dn,
                                   self.params.fast_rate_heuristic)


class AaloOracleScheduler(AaloScheduler):
    name = "aalo-oracle"
    oracle = True


def aalo_oracle_enqueue(total_size: float, params: SchedulerParams) -> int:
    """Queue a size-clairvoyant coflow starts (and stays) in: its final queue."""
    return queue_for(total_size, params)
