"""Discrete-event big-switch fabric engine.

The fabric is a single non-blocking switch: server uplinks and downlinks are
the only contention points, each with ``port_bandwidth`` bytes/ms of capacity
in each direction. The engine advances time event-to-event (coflow arrivals,
exact flow completions, scheduler wakeups), applies piecewise-constant rate
plans in between, and records a per-coflow event log.

Rates are piecewise-constant between events. Completions are computed at the
exact instant a flow's remaining bytes reach zero; the step size is always
chosen so no flow overshoots. Between plan changes the engine advances only
the flows the current plan actually serves, so cost scales with the plan, not
with the backlog. A run is single-threaded and deterministic: identical
(trace, config) inputs produce identical logs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import SimConfig
from .traces import Trace

#: completion slack, bytes. Far below one byte; absorbs float64 rounding at
#: event boundaries for flow sizes up to ~1e12 bytes.
EPS_BYTES = 1e-3

#: rates below this (bytes/ms) are treated as zero
EPS_RATE = 1e-9

END_OF_SIMULATION = math.inf


class SimulationError(RuntimeError):
    """Internal consistency failure (capacity violation, overshoot, deadlock)."""


@dataclass
class EventLog:
    """Per-coflow timeline produced by a run; input to the metrics module."""

    scheduler: str
    num_ports: int
    coflow_ids: list = field(default_factory=list)
    arrival: dict = field(default_factory=dict)          # cid -> ms
    total_size: dict = field(default_factory=dict)       # cid -> bytes
    width: dict = field(default_factory=dict)            # cid -> flow count
    first_start: dict = field(default_factory=dict)      # cid -> ms
    finish: dict = field(default_factory=dict)           # cid -> ms
    flow_finishes: list = field(default_factory=list)    # (ms, cid, fid, bytes)
    queue_events: dict = field(default_factory=dict)     # cid -> [(ms, queue, bytes_sent)]
    pilot_done: dict = field(default_factory=dict)       # cid -> (ms, est_size, pilot_bytes, bytes_sent)
    bypassed: set = field(default_factory=set)

    def cct(self, cid) -> float:
        return self.finish[cid] - self.arrival[cid]

    def to_csv(self) -> str:
        """Flat event rows: time_ms,coflow_id,flow_id,kind,value."""
        rows = [f"# scheduler={self.scheduler} num_ports={self.num_ports}",
                "time_ms,coflow_id,flow_id,kind,value"]
        ev: list = []
        for cid in self.coflow_ids:
            ev.append((self.arrival[cid], cid, -1, "arrival", self.total_size[cid]))
            ev.append((self.arrival[cid], cid, -1, "width", self.width[cid]))
            if cid in self.bypassed:
                ev.append((self.arrival[cid], cid, -1, "bypass", 1))
            if cid in self.first_start:
                ev.append((self.first_start[cid], cid, -1, "start", 0))
            for t, q, d in self.queue_events.get(cid, ()):
                ev.append((t, cid, -1, "queue", q))
                ev.append((t, cid, -1, "sent", d))
            if cid in self.pilot_done:
                t, est, pbytes, d = self.pilot_done[cid]
                ev.append((t, cid, -1, "pilot_done", est))
                ev.append((t, cid, -1, "pilot_bytes", pbytes))
                ev.append((t, cid, -1, "pilot_sent", d))
            if cid in self.finish:
                ev.append((self.finish[cid], cid, -1, "done", self.finish[cid] - self.arrival[cid]))
        for t, cid, fid, size in self.flow_finishes:
            ev.append((t, cid, fid, "flow_finish", size))
        ev.sort(key=lambda r: (r[0], r[1], r[3], r[2]))
        for t, cid, fid, kind, value in ev:
            rows.append(f"{t!r},{cid},{fid},{kind},{value!r}")
        return "\n".join(rows) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "EventLog":
        lines = text.splitlines()
        meta = {}
        for tok in lines[0].lstrip("# ").split():
            k, v = tok.split("=")
            meta[k] = v
        log = cls(scheduler=meta["scheduler"], num_ports=int(meta["num_ports"]))
        pilot_tmp: dict = {}
        for ln in lines[2:]:
            if not ln.strip():
                continue
            t_s, cid_s, fid_s, kind, val_s = ln.split(",")
            t, cid, fid, val = float(t_s), int(cid_s), int(fid_s), float(val_s)
            if kind == "arrival":
                log.coflow_ids.append(cid)
                log.arrival[cid] = t
                log.total_size[cid] = int(val)
            elif kind == "width":
                log.width[cid] = int(val)
            elif kind == "bypass":
                log.bypassed.add(cid)
            elif kind == "start":
                log.first_start[cid] = t
            elif kind == "queue":
                log.queue_events.setdefault(cid, []).append((t, int(val), None))
            elif kind == "sent":
                evs = log.queue_events[cid]
                tt, q, _ = evs[-1]
                evs[-1] = (tt, q, val)
            elif kind == "pilot_done":
                pilot_tmp.setdefault(cid, [t, None, None, None])[1] = val
            elif kind == "pilot_bytes":
                pilot_tmp.setdefault(cid, [t, None, None, None])[2] = val
            elif kind == "pilot_sent":
                pilot_tmp.setdefault(cid, [t, None, None, None])[3] = val
            elif kind == "done":
                log.finish[cid] = t
            elif kind == "flow_finish":
                log.flow_finishes.append((t, cid, fid, int(val)))
        for cid, (t, est, pb, d) in pilot_tmp.items():
            log.pilot_done[cid] = (t, est, pb, d)
        log.coflow_ids.sort(key=lambda c: (log.arrival[c], c))
        return log


class SimState:
    """Mutable state of one run: flat flow arrays plus per-coflow bookkeeping.

    Flows of a coflow occupy a contiguous index range, in trace order. The
    engine tracks the flows served by the current plan in compact arrays;
    ``f_remaining`` of served flows is flushed back before every replan.
    """

    def __init__(self, trace: Trace, config: SimConfig):
        if trace.num_ports > config.num_ports:
            raise ValueError(f"trace uses {trace.num_ports} ports, config has {config.num_ports}")
        self.config = config
        self.trace = trace
        self.P = config.num_ports
        self.C = float(config.port_bandwidth)
        nf = trace.num_flows
        nc = len(trace.coflows)
        self.n_flows = nf
        self.n_coflows = nc

        self.f_sender = np.empty(nf, dtype=np.int64)
        self.f_receiver = np.empty(nf, dtype=np.int64)
        self.f_size = np.empty(nf, dtype=np.float64)
        self.f_coflow = np.empty(nf, dtype=np.int64)   # dense coflow index
        self.f_id = np.empty(nf, dtype=np.int64)
        self.c_start = np.zeros(nc + 1, dtype=np.int64)

        self.c_id = np.empty(nc, dtype=np.int64)
        self.c_arrival = np.empty(nc, dtype=np.float64)
        self.c_width = np.empty(nc, dtype=np.int64)
        self.c_total = np.empty(nc, dtype=np.float64)

        pos = 0
        for ci, cf in enumerate(trace.coflows):
            self.c_id[ci] = cf.coflow_id
            self.c_arrival[ci] = cf.arrival
            self.c_width[ci] = cf.width
            self.c_total[ci] = cf.total_size
            self.c_start[ci] = pos
            for f in cf.flows:
                self.f_sender[pos] = f.sender
                self.f_receiver[pos] = f.receiver
                self.f_size[pos] = f.size
                self.f_coflow[pos] = ci
                self.f_id[pos] = f.flow_id
                pos += 1
        self.c_start[nc] = pos

        self.f_remaining = self.f_size.copy()
        self.f_rate = np.zeros(nf)
        self.f_done = np.zeros(nf, dtype=bool)
        self.f_is_pilot = np.zeros(nf, dtype=bool)
        self.f_finish_time = np.full(nf, np.nan)

        self.c_unfinished = self.c_width.copy()
        self.c_sent = np.zeros(nc)            # bytes sent so far (d)
        self.c_rate = np.zeros(nc)            # current aggregate rate
        self.c_active = np.zeros(nc, dtype=bool)
        self.c_done = np.zeros(nc, dtype=bool)
        self.c_started = np.zeros(nc, dtype=bool)

        self.active_coflows: list[int] = []   # arrived & unfinished, (arrival, id) order
        self.now = 0.0

        # per-port membership of active coflows (unfinished flows touch the port)
        self.port_members: list[set[int]] = [set() for _ in range(self.P)]
        self.port_n = np.zeros(self.P, dtype=np.int64)   # len of each member set
        self._touch: dict[int, np.ndarray] = {}          # ci -> per-port flow touches
        # directional load of the current plan, bytes/ms
        self.load_up = np.zeros(self.P)
        self.load_dn = np.zeros(self.P)

        # flows the current plan serves (all with rate > 0)
        self.sv_idx = np.empty(0, dtype=np.int64)
        self.sv_rate = np.empty(0)
        self.sv_rem = np.empty(0)
        self.sv_sender = np.empty(0, dtype=np.int64)
        self.sv_receiver = np.empty(0, dtype=np.int64)
        self.sv_coflow = np.empty(0, dtype=np.int64)
        #: flow-index arrays touched by the allocator while building a plan
        self.plan_touched: list = []

        # per-coflow staggered service order and unfinished port sets,
        # computed lazily and refreshed after completions
        self._serve_order: dict[int, np.ndarray] = {}
        self._serve_dirty: set[int] = set()
        self._port_view: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self._port_dirty: set[int] = set()

        self.log = EventLog(scheduler=config.scheduler, num_ports=config.num_ports)

    # -- per-coflow views ---------------------------------------------------

    def coflow_flows(self, ci: int) -> np.ndarray:
        return np.arange(self.c_start[ci], self.c_start[ci + 1])

    def serve_order(self, ci: int) -> np.ndarray:
        """Unfinished flows of coflow ci in staggered (diagonal) service order.

        Staggering spreads consecutive service across distinct sender and
        receiver ports so the one-flow-per-port greedy runs in parallel.
        """
        cached = self._serve_order.get(ci)
        if cached is None:
            fl = self.coflow_flows(ci)
            s = self.f_sender[fl]
            r = self.f_receiver[fl]
            _, srk = np.unique(s, return_inverse=True)
            runiq, rrk = np.unique(r, return_inverse=True)
            nr = max(len(runiq), 1)
            diag = (rrk - srk) % nr
            order = fl[np.lexsort((rrk, srk, diag))]
            cached = self._serve_order[ci] = order
            self._serve_dirty.discard(ci)
        elif ci in self._serve_dirty:
            cached = cached[~self.f_done[cached]]
            self._serve_order[ci] = cached
            self._serve_dirty.discard(ci)
        return cached

    def port_view(self, ci: int) -> tuple[np.ndarray, np.ndarray]:
        """(sender ports, receiver ports) that coflow ci's unfinished flows touch."""
        cached = self._port_view.get(ci)
        if cached is None or ci in self._port_dirty:
            fl = self.serve_order(ci)
            cached = (np.unique(self.f_sender[fl]), np.unique(self.f_receiver[fl]))
            self._port_view[ci] = cached
            self._port_dirty.discard(ci)
        return cached

    def _membership_add(self, ci: int) -> None:
        tc = np.zeros(self.P, dtype=np.int64)
        fl = self.coflow_flows(ci)
        np.add.at(tc, self.f_sender[fl], 1)
        np.add.at(tc, self.f_receiver[fl], 1)
        self._touch[ci] = tc
        for p in np.flatnonzero(tc):
            members = self.port_members[p]
            if ci not in members:
                members.add(ci)
                self.port_n[p] += 1

    def _membership_drop_flow(self, fi: int) -> None:
        ci = int(self.f_coflow[fi])
        tc = self._touch[ci]
        for p in (int(self.f_sender[fi]), int(self.f_receiver[fi])):
            tc[p] -= 1
            if tc[p] == 0:
                self.port_members[p].discard(ci)
                self.port_n[p] -= 1

    # -- plan lifecycle -------------------------------------------------------

    def begin_plan(self) -> None:
        """Flush served progress, zero old rates, start collecting a new plan."""
        if len(self.sv_idx):
            self.f_remaining[self.sv_idx] = self.sv_rem
            self.f_rate[self.sv_idx] = 0.0
        self.plan_touched = []

    def commit_plan(self) -> None:
        """Freeze the allocator's touched flows into the served-set arrays."""
        if self.plan_touched:
            cat = np.concatenate([np.asarray(t, dtype=np.int64) for t in self.plan_touched])
            cat = np.unique(cat)
            rates = self.f_rate[cat]
            served = cat[rates > EPS_RATE]
        else:
            served = np.empty(0, dtype=np.int64)
        self.sv_idx = served
        self.sv_rate = self.f_rate[served]
        self.sv_rem = self.f_remaining[served]
        self.sv_sender = self.f_sender[served]
        self.sv_receiver = self.f_receiver[served]
        self.sv_coflow = self.f_coflow[served]
        self.c_rate[:] = 0.0
        if len(served):
            self.c_rate += np.bincount(self.sv_coflow, weights=self.sv_rate,
                                       minlength=self.n_coflows)
        self.load_up = np.bincount(self.sv_sender, weights=self.sv_rate, minlength=self.P)
        self.load_dn = np.bincount(self.sv_receiver, weights=self.sv_rate, minlength=self.P)

    def augment_plan(self) -> np.ndarray:
        """Add repair-touched flows (previously idle) to the served set."""
        if not self.plan_touched:
            return np.empty(0, dtype=np.int64)
        cat = np.concatenate([np.asarray(t, dtype=np.int64) for t in self.plan_touched])
        self.plan_touched = []
        cat = np.unique(cat)
        rates = self.f_rate[cat]
        added = cat[rates > EPS_RATE]
        if len(added) == 0:
            return added
        add_rate = self.f_rate[added]
        add_s = self.f_sender[added]
        add_r = self.f_receiver[added]
        add_c = self.f_coflow[added]
        self.sv_idx = np.concatenate([self.sv_idx, added])
        self.sv_rate = np.concatenate([self.sv_rate, add_rate])
        self.sv_rem = np.concatenate([self.sv_rem, self.f_remaining[added]])
        self.sv_sender = np.concatenate([self.sv_sender, add_s])
        self.sv_receiver = np.concatenate([self.sv_receiver, add_r])
        self.sv_coflow = np.concatenate([self.sv_coflow, add_c])
        self.c_rate += np.bincount(add_c, weights=add_rate, minlength=self.n_coflows)
        self.load_up += np.bincount(add_s, weights=add_rate, minlength=self.P)
        self.load_dn += np.bincount(add_r, weights=add_rate, minlength=self.P)
        tol = self.C * (1 + 1e-9) + 1e-6
        if self.load_up.max(initial=0.0) > tol or self.load_dn.max(initial=0.0) > tol:
            raise SimulationError("repair violated port capacity")
        return added

    # -- engine steps -------------------------------------------------------

    def apply_rates(self, dt: float) -> None:
        """Advance every served flow by ``dt`` ms under the current plan."""
        if dt < 0:
            raise SimulationError(f"negative dt {dt}")
        if dt == 0 or len(self.sv_idx) == 0:
            return
        moved = self.sv_rate * dt
        self.sv_rem -= moved
        if self.sv_rem.min(initial=0.0) < -EPS_BYTES * 1e3:
            raise SimulationError("flow overshoot: next_event_time bug")
        self.c_sent += np.bincount(self.sv_coflow, weights=moved, minlength=self.n_coflows)

    def next_completion(self) -> float:
        """Absolute time of the earliest flow completion under the current plan."""
        if len(self.sv_idx) == 0:
            return math.inf
        dt = (self.sv_rem / self.sv_rate).min()
        return self.now + max(dt, 0.0)

    def pop_completed(self) -> np.ndarray:
        """Finish every served flow whose remaining bytes reached zero."""
        if len(self.sv_idx) == 0:
            return np.empty(0, dtype=np.int64)
        done = self.sv_rem <= EPS_BYTES
        if not done.any():
            return np.empty(0, dtype=np.int64)
        flows = self.sv_idx[done]
        self.f_remaining[flows] = 0.0
        self.f_done[flows] = True
        self.f_finish_time[flows] = self.now
        self.f_rate[flows] = 0.0
        done_rate = self.sv_rate[done]
        self.load_up -= np.bincount(self.sv_sender[done], weights=done_rate, minlength=self.P)
        self.load_dn -= np.bincount(self.sv_receiver[done], weights=done_rate, minlength=self.P)
        self.c_rate -= np.bincount(self.sv_coflow[done], weights=done_rate,
                                   minlength=self.n_coflows)
        keep = ~done
        self.sv_idx = self.sv_idx[keep]
        self.sv_rate = self.sv_rate[keep]
        self.sv_rem = self.sv_rem[keep]
        self.sv_sender = self.sv_sender[keep]
        self.sv_receiver = self.sv_receiver[keep]
        self.sv_coflow = self.sv_coflow[keep]
        return flows

    def validate_plan(self) -> None:
        rates = self.sv_rate
        if len(rates) and rates.min(initial=0.0) < 0:
            raise SimulationError("negative rate in plan")
        tol = self.C * (1 + 1e-9) + 1e-6
        up = np.bincount(self.sv_sender, weights=rates, minlength=self.P)
        if up.max(initial=0.0) > tol:
            p = int(up.argmax())
            raise SimulationError(f"uplink capacity violated at port {p}: {up[p]} > {self.C}")
        dn = np.bincount(self.sv_receiver, weights=rates, minlength=self.P)
        if dn.max(initial=0.0) > tol:
            p = int(dn.argmax())
            raise SimulationError(f"downlink capacity violated at port {p}: {dn[p]} > {self.C}")


class Scheduler:
    """Scheduling policy interface.

    Coflow-level decisions live in the scheduler; the engine owns time and
    byte accounting. ``replan_on_flow_events`` selects the trigger discipline:
    event-driven schedulers re-derive rates whenever the active flow set
    changes, tick-driven ones only at their own wakeups.
    """

    name = "?"
    replan_on_flow_events = True

    def attach(self, state: SimState) -> None:
        pass

    def on_events(self, state: SimState, arrived: list[int], flows_done: np.ndarray,
                  coflows_done: list[int], is_wakeup: bool) -> bool:
        """Digest a batch of events; return True to force a replan."""
        raise NotImplementedError

    def next_wakeup(self, state: SimState) -> float:
        """Next absolute time this scheduler wants control; inf if none."""
        return math.inf

    def allocate(self, state: SimState) -> None:
        """Write state.f_rate for flows to serve (old rates are zeroed) and
        register every touched flow set in state.plan_touched."""
        raise NotImplementedError

    def repair(self, state: SimState, flows_done: np.ndarray) -> bool:
        """Re-offer capacity freed by completions to idle flows, standing plan
        kept. Return False to request a full replan instead."""
        return False


def next_event_time(state: SimState, next_arrival: float, wakeup: float) -> float:
    """Earliest of: next coflow arrival, next completion, scheduler wakeup.

    Returns the END_OF_SIMULATION sentinel when nothing is pending.
    """
    return min(next_arrival, state.next_completion(), wakeup)


def run_simulation(trace: Trace, config: SimConfig) -> EventLog:
    """Simulate the trace under the configured scheduler; return the event log."""
    from .schedulers import make_scheduler

    state = SimState(trace, config)
    sched = make_scheduler(config)
    sched.attach(state)
    log = state.log

    nc = state.n_coflows
    arr_order = np.lexsort((state.c_id, state.c_arrival))
    next_arr_pos = 0

    total_done = 0
    guard = 0
    max_iter = 40 * state.n_flows + 40 * nc + 10_000

    while total_done < nc:
        guard += 1
        if guard > max_iter:
            raise SimulationError("event budget exceeded; scheduler starves some coflow")

        t_arr = state.c_arrival[arr_order[next_arr_pos]] if next_arr_pos < nc else math.inf
        t_wake = sched.next_wakeup(state)
        t_next = next_event_time(state, t_arr, t_wake)
        if math.isinf(t_next):
            raise SimulationError("no pending events but coflows unfinished")
        dt = t_next - state.now
        if dt < 0:
            raise SimulationError("time went backwards")
        state.apply_rates(dt)
        state.now = t_next

        # completions
        flows_done = state.pop_completed()
        coflows_done: list[int] = []
        if len(flows_done):
            for fi in flows_done:
                ci = int(state.f_coflow[fi])
                state._serve_dirty.add(ci)
                state._port_dirty.add(ci)
                state._membership_drop_flow(int(fi))
                log.flow_finishes.append((t_next, int(state.c_id[ci]), int(state.f_id[fi]),
                                          int(state.f_size[fi])))
            cnt = np.bincount(state.f_coflow[flows_done], minlength=nc)
            state.c_unfinished -= cnt
            for ci in np.flatnonzero(cnt):
                if state.c_unfinished[ci] == 0:
                    ci = int(ci)
                    state.c_active[ci] = False
                    state.c_done[ci] = True
                    state.active_coflows.remove(ci)
                    coflows_done.append(ci)
                    log.finish[int(state.c_id[ci])] = t_next
            total_done += len(coflows_done)

        # arrivals
        arrived: list[int] = []
        while next_arr_pos < nc and state.c_arrival[arr_order[next_arr_pos]] <= t_next:
            ci = int(arr_order[next_arr_pos])
            next_arr_pos += 1
            arrived.append(ci)
            state.c_active[ci] = True
            state.active_coflows.append(ci)
            state._membership_add(ci)
            cid = int(state.c_id[ci])
            log.coflow_ids.append(cid)
            log.arrival[cid] = float(state.c_arrival[ci])
            log.total_size[cid] = int(state.c_total[ci])
            log.width[cid] = int(state.c_width[ci])
        if arrived:
            state.active_coflows.sort(key=lambda c: (state.c_arrival[c], state.c_id[c]))

        is_wakeup = t_next >= t_wake
        force = sched.on_events(state, arrived, flows_done, coflows_done, is_wakeup)

        set_changed = bool(arrived) or len(flows_done) > 0
        repaired = False
        if not force and len(flows_done) and not arrived:
            state.plan_touched = []
            repaired = sched.repair(state, flows_done)
            if repaired:
                added = state.augment_plan()
                if len(added):
                    for ci in np.unique(state.f_coflow[added]):
                        if not state.c_started[ci]:
                            state.c_started[ci] = True
                            log.first_start[int(state.c_id[ci])] = t_next
        if not repaired and (force or (sched.replan_on_flow_events and set_changed)):
            state.begin_plan()
            sched.allocate(state)
            state.commit_plan()
            state.validate_plan()
            if len(state.sv_idx):
                for ci in np.unique(state.sv_coflow):
                    if not state.c_started[ci]:
                        state.c_started[ci] = True
                        log.first_start[int(state.c_id[ci])] = t_next

    if not state.f_done.all():
        raise SimulationError("simulation ended with unfinished flows")
    return log
