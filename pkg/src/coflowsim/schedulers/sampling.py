"""Sampling-based non-clairvoyant coflow scheduler.

A wide coflow starts in a piloting phase: a few of its flows (pilot flows) are
pre-scheduled at the least-busy ports with top priority, and the mean measured
pilot size estimates the whole coflow (total = mean flow size x flow count).
The estimated coflow is then placed in exponentially-thresholded priority
queues by one of six ranking policies (size, remaining size, or contention
weighted variants) and served shortest-first with FIFO order inside a queue.
Thin coflows (width <= T) bypass piloting and start immediately in the top
queue, migrating by bytes sent. Capacity that would idle while non-pilot flows
wait for piloting is lent to those flows in coflow-arrival order.

Coflow-level state (queues, ranks, contention, pilot sets) changes only on
coflow arrival, coflow completion, or pilot-phase completion. Between those
triggers the standing schedule keeps being resolved locally: when a flow
finishes, the freed port capacity is offered to idle flows in plan priority,
the way local agents walk through the last schedule they received.
"""

from __future__ import annotations

import math

import numpy as np

from ..config import PilotPolicy, SchedulerParams
from ..fabric import Scheduler, SimState
from .base import EPS_RATE, allocate_weighted_queues, queue_for, serve_greedy

BYPASS, PILOT, QUEUED = 0, 1, 2


def num_pilots(width: int, num_senders: int, policy: PilotPolicy) -> int:
    """Number of pilot flows for a coflow entering the piloting phase."""
    if policy.kind == "constant":
        return min(int(policy.value), width)
    if policy.kind == "frac_senders":
        return max(1, math.floor(policy.value * num_senders))
    return max(1, math.floor(policy.value * width))


def estimate_size(pilot_sizes, n_flows: int) -> tuple[int, float]:
    """Coflow size estimate from measured pilots: (total bytes, mean flow bytes)."""
    if len(pilot_sizes) == 0:
        raise ValueError("estimate requires at least one pilot size")
    l = float(np.mean(pilot_sizes))
    return round(l * n_flows), l


class PortBusyStats:
    """Per-port piloting pressure and per-port active-coflow membership."""

    def __init__(self, num_ports: int):
        self.pilot_up = np.zeros(num_ports, dtype=np.int64)
        self.pilot_dn = np.zeros(num_ports, dtype=np.int64)
        self.port_coflows: list[set[int]] = [set() for _ in range(num_ports)]

    def add_member(self, port: int, ci: int) -> None:
        self.port_coflows[port].add(ci)

    def drop_member(self, port: int, ci: int) -> None:
        self.port_coflows[port].discard(ci)


def port_contention(stats: PortBusyStats, port: int, exclude: int) -> int:
    """Number of coflows other than ``exclude`` with unfinished flows at ``port``."""
    members = stats.port_coflows[port]
    return len(members) - (1 if exclude in members else 0)


def priority_metric(policy: str, *, l: float, n: int, d: float,
                    contention: int, port_contentions) -> float:
    """Scalar rank for one coflow under inter-coflow policy A..F; lower is sooner.

    ``port_contentions`` lists c^p over the ports where the coflow still has
    unfinished flows.
    """
    if policy == "A":
        return l * n
    if policy == "B":
        return max(l * n - d, 0.0)
    if policy == "C":
        return float(contention)
    if policy == "D":
        return float(sum(port_contentions)) * l
    if policy == "E":
        return float(max(port_contentions, default=0)) * l
    if policy == "F":
        return float(contention) * l
    raise ValueError(f"unknown policy {policy!r}")


def select_pilot_flows(flows: list[tuple[int, int, int]], k: int,
                       stats: PortBusyStats) -> list[int]:
    """Pick k pilot flows, spreading over the least busy ports.

    ``flows`` is a list of (sender, receiver, flow_index) in flow-id order.
    Each pick takes the least busy sending port, then scans receiving ports
    from least busy, assigning the first (sender, receiver) flow that exists
    and is unchosen; busy counters update between picks. Ties break toward the
    lower port index, then the earlier listed flow.
    """
    avail: dict[tuple[int, int], list[int]] = {}
    senders: list[int] = []
    receivers: list[int] = []
    for s, r, fi in flows:
        avail.setdefault((s, r), []).append(fi)
        if s not in senders:
            senders.append(s)
        if r not in receivers:
            receivers.append(r)
    chosen: list[int] = []
    for _ in range(k):
        placed = False
        for s in sorted(senders, key=lambda p: (stats.pilot_up[p], p)):
            for r in sorted(receivers, key=lambda p: (stats.pilot_dn[p], p)):
                bucket = avail.get((s, r))
                if bucket:
                    fi = bucket.pop(0)
                    chosen.append(fi)
                    stats.pilot_up[s] += 1
                    stats.pilot_dn[r] += 1
                    placed = True
                    break
            if placed:
                break
        if not placed:
            break
    return chosen


class SamplingScheduler(Scheduler):
    name = "sampling"
    replan_on_flow_events = False  # bare flow completions are handled by repair

    def __init__(self, params: SchedulerParams):
        self.params = params

    def attach(self, state: SimState) -> None:
        nc = state.n_coflows
        self.stats = PortBusyStats(state.P)
        self.phase = np.full(nc, -1, dtype=np.int64)
        self.queue = np.zeros(nc, dtype=np.int64)
        self.in_queue = np.zeros(nc, dtype=bool)
        self.enq_time = np.zeros(nc)
        self.est_l = np.zeros(nc)
        self.est_S = np.zeros(nc)
        self.pilots: dict[int, np.ndarray] = {}
        self.pilot_pending: dict[int, int] = {}
        self.closed_up = np.zeros(state.P, dtype=bool)
        self.closed_dn = np.zeros(state.P, dtype=bool)
        self._k = self.params.K
        self._stale = False  # completions since the last full resolution

    def next_wakeup(self, state: SimState) -> float:
        # repairs start idle flows instantly; a full re-resolution of the
        # standing schedule happens at the next interval boundary, the
        # granularity at which local ports walk their schedules
        if not self._stale or not state.active_coflows:
            return math.inf
        delta = state.config.delta
        return max(math.ceil(state.now / delta - 1e-9) * delta, state.now)

    # -- event digestion ----------------------------------------------------

    def on_events(self, state: SimState, arrived, flows_done, coflows_done, is_wakeup) -> bool:
        trigger = False
        pilot_done: list[int] = []
        if len(flows_done):
            self._stale = True

        for fi in flows_done:
            if state.f_is_pilot[fi]:
                ci = int(state.f_coflow[fi])
                self.stats.pilot_up[state.f_sender[fi]] -= 1
                self.stats.pilot_dn[state.f_receiver[fi]] -= 1
                self.pilot_pending[ci] -= 1
                if self.pilot_pending[ci] == 0:
                    pilot_done.append(ci)

        if coflows_done:
            trigger = True

        for ci in arrived:
            cf_flows = state.coflow_flows(ci)
            width = int(state.c_width[ci])
            if width <= self.params.T:
                self.phase[ci] = BYPASS
                self.in_queue[ci] = True
                self.enq_time[ci] = state.now
                self.queue[ci] = queue_for(0.0, self.params)
                cid = int(state.c_id[ci])
                state.log.bypassed.add(cid)
                state.log.queue_events.setdefault(cid, []).append(
                    (state.now, int(self.queue[ci]), 0.0))
            else:
                self.phase[ci] = PILOT
                senders = np.unique(state.f_sender[cf_flows])
                k = num_pilots(width, len(senders), self.params.pilot_policy)
                by_id = sorted(cf_flows, key=lambda fi: state.f_id[fi])
                triples = [(int(state.f_sender[fi]), int(state.f_receiver[fi]), int(fi))
                           for fi in by_id]
                chosen = select_pilot_flows(triples, k, self.stats)
                chosen_arr = np.array(sorted(chosen), dtype=np.int64)
                state.f_is_pilot[chosen_arr] = True
                self.pilots[ci] = chosen_arr
                self.pilot_pending[ci] = len(chosen_arr)
            trigger = True

        for ci in pilot_done:
            sizes = state.f_size[self.pilots[ci]]
            est, l = estimate_size(sizes, int(state.c_width[ci]))
            self.est_S[ci] = est
            self.est_l[ci] = l
            cid = int(state.c_id[ci])
            state.log.pilot_done[cid] = (state.now, float(est), float(sizes.sum()),
                                         float(state.c_sent[ci]))
            if not state.c_done[ci]:
                self.phase[ci] = QUEUED
                self.in_queue[ci] = True
                self.enq_time[ci] = state.now
                self.queue[ci] = -1  # force the first placement to be logged
            trigger = True

        if trigger:
            self._rerank(state)
            self._stale = False
            return True
        if is_wakeup and self._stale:
            self._stale = False
            return True
        return False

    def _rerank(self, state: SimState) -> None:
        """Recompute queue placement of every queued/bypassed coflow.

        The ranking metric decides how deep a coflow starts; on top of that,
        every coflow carries the bytes-sent demotion floor of the queue
        structure, so top-queue service stays self-limiting and the starvation
        freedom of the threshold queues is preserved regardless of the metric.
        """
        pol = self.params.intercoflow_policy
        for ci in state.active_coflows:
            if not self.in_queue[ci]:
                continue
            floor_q = queue_for(float(state.c_sent[ci]), self.params)
            if self.phase[ci] == BYPASS:
                q = floor_q
            else:
                ports = np.flatnonzero(state._touch[ci] > 0)
                pcs = state.port_n[ports] - 1
                contention = 0
                if pol in ("C", "F"):
                    others: set[int] = set()
                    for p in ports:
                        others |= state.port_members[p]
                    others.discard(ci)
                    contention = len(others)
                value = priority_metric(pol, l=self.est_l[ci], n=int(state.c_width[ci]),
                                        d=float(state.c_sent[ci]), contention=contention,
                                        port_contentions=pcs)
                q = queue_for(value, self.params)
            if q != self.queue[ci]:
                self.queue[ci] = q
                cid = int(state.c_id[ci])
                state.log.queue_events.setdefault(cid, []).append(
                    (state.now, int(q), float(state.c_sent[ci])))

    # -- rate derivation ------------------------------------------------------

    def _serve_pilots(self, state: SimState, piloting: list[int], up: np.ndarray,
                      dn: np.ndarray, record_closure: bool) -> None:
        pilot_served: list[int] = []
        for ci in piloting:
            pend = self.pilots[ci]
            pend = pend[~state.f_done[pend]]
            for fi in pend:
                s = state.f_sender[fi]
                r = state.f_receiver[fi]
                if record_closure:
                    self.closed_up[s] = True
                    self.closed_dn[r] = True
                if state.f_rate[fi] > EPS_RATE:
                    continue
                take = min(up[s], dn[r])
                if take > EPS_RATE:
                    state.f_rate[fi] += take
                    pilot_served.append(int(fi))
                    up[s] -= take
                    dn[r] -= take
        if pilot_served:
            state.plan_touched.append(pilot_served)

    def allocate(self, state: SimState) -> None:
        C = state.C
        up = np.full(state.P, C)
        dn = np.full(state.P, C)

        piloting = [ci for ci in state.active_coflows if self.phase[ci] == PILOT]
        self.closed_up[:] = False
        self.closed_dn[:] = False
        self._serve_pilots(state, piloting, up, dn, record_closure=True)
        up[self.closed_up] = 0.0
        dn[self.closed_dn] = 0.0

        buckets: list[list[int]] = [[] for _ in range(self._k)]
        queued = [ci for ci in state.active_coflows if self.in_queue[ci]]
        queued.sort(key=lambda c: (self.enq_time[c], state.c_arrival[c], state.c_id[c]))
        for ci in queued:
            buckets[self.queue[ci]].append(ci)
        allocate_weighted_queues(state, buckets, self.params, up, dn,
                                 self.params.fast_rate_heuristic)

        # work conservation: lend leftover capacity to non-pilot flows of
        # coflows still sampling, in coflow-arrival FIFO order
        for ci in piloting:
            us, ur = state.port_view(ci)
            if up[us].max(initial=0.0) <= EPS_RATE or dn[ur].max(initial=0.0) <= EPS_RATE:
                continue
            fidx = state.serve_order(ci)
            fidx = fidx[~state.f_is_pilot[fidx]]
            serve_greedy(state, ci, up, dn, fidx=fidx)

    def repair(self, state: SimState, flows_done: np.ndarray) -> bool:
        freed = set()
        for fi in flows_done:
            freed.add(int(state.f_sender[fi]))
            freed.add(int(state.f_receiver[fi]))
        cands: set[int] = set()
        for p in freed:
            cands |= state.port_members[p]
        if not cands:
            return True
        up = state.C - state.load_up
        dn = state.C - state.load_dn
        np.maximum(up, 0.0, out=up)
        np.maximum(dn, 0.0, out=dn)

        piloting = sorted((ci for ci in cands if self.phase[ci] == PILOT),
                          key=lambda c: (state.c_arrival[c], state.c_id[c]))
        self._serve_pilots(state, piloting, up, dn, record_closure=False)
        # ports with pending pilots stay closed to non-pilot traffic
        up[self.closed_up] = 0.0
        dn[self.closed_dn] = 0.0

        queued = sorted((ci for ci in cands if self.in_queue[ci]),
                        key=lambda c: (self.queue[c], self.enq_time[c],
                                       state.c_arrival[c], state.c_id[c]))
        for ci in queued:
            fidx = state.serve_order(ci)
            fidx = fidx[state.f_rate[fidx] <= EPS_RATE]
            serve_greedy(state, ci, up, dn, fidx=fidx)
            if up.max() <= EPS_RATE or dn.max() <= EPS_RATE:
                return True
        for ci in piloting:
            fidx = state.serve_order(ci)
            fidx = fidx[~state.f_is_pilot[fidx]]
            fidx = fidx[state.f_rate[fidx] <= EPS_RATE]
            serve_greedy(state, ci, up, dn, fidx=fidx)
        return True
