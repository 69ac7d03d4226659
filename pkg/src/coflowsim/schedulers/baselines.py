"""Clairvoyant and coordination-free baselines: SEBF, FIFO, FAIR.

All three replan on every arrival and completion event. SEBF and FIFO serve
whole coflows in priority order (slowest-flow-equalized shares, then a greedy
work-conserving top-up in the same order); FAIR ignores coflows entirely and
water-fills per-flow max-min rates.
"""

from __future__ import annotations

import numpy as np

from ..fabric import Scheduler, SimState
from .base import serve_equalized, serve_greedy


def sebf_order(state: SimState, actives: list[int]) -> list[int]:
    """Coflows sorted so the one whose slowest port finishes first comes first.

    Bottleneck = max over directional ports of remaining bytes there; ties go
    to the earlier arrival, then the lower id.
    """
    keyed = []
    for ci in actives:
        fidx = state.serve_order(ci)
        rem = state.f_remaining[fidx]
        up = np.bincount(state.f_sender[fidx], weights=rem, minlength=state.P)
        dn = np.bincount(state.f_receiver[fidx], weights=rem, minlength=state.P)
        bottleneck = max(up.max(initial=0.0), dn.max(initial=0.0))
        keyed.append((bottleneck, state.c_arrival[ci], state.c_id[ci], ci))
    keyed.sort()
    return [k[-1] for k in keyed]


class _OrderedCoflowScheduler(Scheduler):
    """Serve coflows one after another in a policy-defined order.

    Full replans happen on coflow arrivals and completions; when a single flow
    finishes, the freed capacity just starts idle flows in plan order.
    """

    replan_on_flow_events = False

    def on_events(self, state, arrived, flows_done, coflows_done, is_wakeup) -> bool:
        return bool(arrived) or bool(coflows_done)

    def order(self, state: SimState) -> list[int]:
        raise NotImplementedError

    def allocate(self, state: SimState) -> None:
        up = np.full(state.P, state.C)
        dn = np.full(state.P, state.C)
        order = self.order(state)
        for ci in order:
            serve_equalized(state, ci, up, dn)
            if up.max() <= 1e-9 or dn.max() <= 1e-9:
                break
        for ci in order:
            if up.max() <= 1e-9 or dn.max() <= 1e-9:
                return
            serve_greedy(state, ci, up, dn)

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
        for ci in self.order(state):
            if ci not in cands:
                continue
            fidx = state.serve_order(ci)
            fidx = fidx[state.f_rate[fidx] <= 1e-9]
            serve_greedy(state, ci, up, dn, fidx=fidx)
            if up.max() <= 1e-9 or dn.max() <= 1e-9:
                break
        return True


class FifoScheduler(_OrderedCoflowScheduler):
    name = "fifo"

    def __init__(self, params=None):
        pass

    def order(self, state: SimState) -> list[int]:
        return sorted(state.active_coflows,
                      key=lambda c: (state.c_arrival[c], state.c_id[c]))


class SebfScheduler(_OrderedCoflowScheduler):
    name = "sebf"

    def __init__(self, params=None):
        pass

    def order(self, state: SimState) -> list[int]:
        return sebf_order(state, state.active_coflows)


def waterfill_rates(senders: np.ndarray, receivers: np.ndarray, counts: np.ndarray,
                    capacity: float, num_ports: int) -> np.ndarray:
    """Max-min fair per-flow rates for flow groups under two-sided port caps.

    Group g carries ``counts[g]`` identical flows on (senders[g], receivers[g]).
    Progressive filling: all unfrozen flows rise together; each step the
    tightest port saturates and its groups freeze at the current level. Work
    per step is bounded by the ports and the groups they freeze.
    """
    G = len(senders)
    rate = np.zeros(G)
    if G == 0:
        return rate
    cap_u = np.full(num_ports, capacity)
    cap_d = np.full(num_ports, capacity)
    nu = np.bincount(senders, weights=counts, minlength=num_ports)
    nd = np.bincount(receivers, weights=counts, minlength=num_ports)
    # group lists per port
    by_s = np.argsort(senders, kind="stable")
    s_start = np.searchsorted(senders[by_s], np.arange(num_ports + 1))
    by_r = np.argsort(receivers, kind="stable")
    r_start = np.searchsorted(receivers[by_r], np.arange(num_ports + 1))
    act = np.ones(G, dtype=bool)
    n_act = G
    level = 0.0
    tolc = 1e-12
    for _ in range(2 * num_ports + 2):
        with np.errstate(divide="ignore", invalid="ignore"):
            lvl_u = np.where(nu > tolc, cap_u / nu, np.inf)
            lvl_d = np.where(nd > tolc, cap_d / nd, np.inf)
        inc = min(lvl_u.min(), lvl_d.min())
        level += inc
        cap_u -= inc * nu
        cap_d -= inc * nd
        np.maximum(cap_u, 0.0, out=cap_u)
        np.maximum(cap_d, 0.0, out=cap_d)
        cap_tol = capacity * 1e-12
        frozen: list[int] = []
        for p in np.flatnonzero((cap_u <= cap_tol) & (nu > tolc)):
            for g in by_s[s_start[p]:s_start[p + 1]]:
                if act[g]:
                    act[g] = False
                    frozen.append(g)
        for p in np.flatnonzero((cap_d <= cap_tol) & (nd > tolc)):
            for g in by_r[r_start[p]:r_start[p + 1]]:
                if act[g]:
                    act[g] = False
                    frozen.append(g)
        if frozen:
            fr = np.array(frozen)
            rate[fr] = level
            w = counts[fr]
            nu -= np.bincount(senders[fr], weights=w, minlength=num_ports)
            nd -= np.bincount(receivers[fr], weights=w, minlength=num_ports)
            np.maximum(nu, 0.0, out=nu)
            np.maximum(nd, 0.0, out=nd)
            n_act -= len(fr)
            if n_act == 0:
                return rate
    if act.any():
        raise RuntimeError("water-filling failed to converge")
    return rate


class FairScheduler(Scheduler):
    """Per-flow max-min fair sharing, oblivious to coflow boundaries."""

    name = "fair"
    replan_on_flow_events = False  # completions re-waterfill via repair()

    def __init__(self, params=None):
        pass

    def attach(self, state: SimState) -> None:
        # incremental (sender, receiver) pair-group census of active flows
        self._cnt = np.zeros(state.P * state.P, dtype=np.int64)
        self._key = state.f_sender * state.P + state.f_receiver

    def on_events(self, state, arrived, flows_done, coflows_done, is_wakeup) -> bool:
        for ci in arrived:
            np.add.at(self._cnt, self._key[state.coflow_flows(ci)], 1)
        if len(flows_done):
            np.subtract.at(self._cnt, self._key[flows_done], 1)
        return bool(arrived)

    def _group_rates(self, state: SimState):
        uniq = np.flatnonzero(self._cnt)
        if len(uniq) == 0:
            return None, None
        cnt = self._cnt[uniq]
        rate_g = waterfill_rates(uniq // state.P, uniq % state.P, cnt.astype(float),
                                 state.C, state.P)
        return uniq, rate_g

    def allocate(self, state: SimState) -> None:
        if not state.active_coflows:
            return
        uniq, rate_g = self._group_rates(state)
        if uniq is None:
            return
        af = np.concatenate([state.serve_order(ci) for ci in state.active_coflows])
        state.f_rate[af] = rate_g[np.searchsorted(uniq, self._key[af])]
        state.plan_touched.append(af)

    def repair(self, state: SimState, flows_done: np.ndarray) -> bool:
        """Fair shares shift on every completion; the served set is already the
        active set, so rewrite rates in place instead of rebuilding the plan."""
        if len(state.sv_idx) == 0:
            return True
        uniq, rate_g = self._group_rates(state)
        if uniq is None:
            return True
        grid = np.zeros(state.P * state.P)
        grid[uniq] = rate_g
        keys = state.sv_sender * state.P + state.sv_receiver
        rates = grid[keys]
        state.sv_rate = rates
        state.f_rate[state.sv_idx] = rates
        state.c_rate[:] = 0.0
        state.c_rate += np.bincount(state.sv_coflow, weights=rates,
                                    minlength=state.n_coflows)
        state.load_up = np.bincount(state.sv_sender, weights=rates, minlength=state.P)
        state.load_dn = np.bincount(state.sv_receiver, weights=rates, minlength=state.P)
        return True
