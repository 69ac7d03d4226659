"""Shared scheduler machinery: queue thresholds, port-budget serving primitives.

All serving primitives mutate per-port budget vectors (bytes/ms available on
each uplink/downlink) and accumulate into ``state.f_rate``. Budgets never go
negative beyond float dust; callers clamp.
"""

from __future__ import annotations

import numpy as np

from ..config import SchedulerParams
from ..fabric import SimState, SimulationError

EPS_RATE = 1e-9


def queue_for(value: float, params: SchedulerParams) -> int:
    """Smallest queue q whose interval [Q_lo_q, Q_hi_q) contains ``value``."""
    if value < 0:
        value = 0.0
    for q in range(params.K - 1):
        if value < params.queue_hi(q):
            return q
    return params.K - 1


def serve_equalized(state: SimState, ci: int, up: np.ndarray, dn: np.ndarray) -> float:
    """Give every unfinished flow of coflow ci the same rate, pinned by the
    tightest port budget.

    The coflow progresses at equal rates everywhere, so no port runs ahead of
    the bottleneck (slowest-flow-equalized shares).
    """
    us, ur = state.port_view(ci)
    if up[us].max(initial=0.0) <= EPS_RATE or dn[ur].max(initial=0.0) <= EPS_RATE:
        return 0.0
    fidx = state.serve_order(ci)
    if len(fidx) == 0:
        return 0.0
    s = state.f_sender[fidx]
    r = state.f_receiver[fidx]
    su = np.bincount(s, minlength=state.P)
    du = np.bincount(r, minlength=state.P)
    rate = min((up[us] / su[us]).min(), (dn[ur] / du[ur]).min())
    if rate <= EPS_RATE:
        return 0.0
    state.f_rate[fidx] += rate
    state.plan_touched.append(fidx)
    up -= su * rate
    dn -= du * rate
    np.maximum(up, 0.0, out=up)
    np.maximum(dn, 0.0, out=dn)
    return rate


def serve_greedy(state: SimState, ci: int, up: np.ndarray, dn: np.ndarray,
                 fidx: np.ndarray | None = None) -> None:
    """One flow at a time takes the entire residual budget at its two ports.

    Flows are considered in the coflow's staggered order (or ``fidx`` if
    given) in rounds: each round serves, per sender port, the first flow whose
    two budgets are positive, breaking receiver collisions toward the earlier
    flow; every pick consumes min(uplink, downlink), so one of its ports
    saturates. Rounds repeat until no flow can be served.
    """
    if fidx is None:
        us, ur = state.port_view(ci)
        if up[us].max(initial=0.0) <= EPS_RATE or dn[ur].max(initial=0.0) <= EPS_RATE:
            return
        fidx = state.serve_order(ci)
    n = len(fidx)
    if n == 0:
        return
    if n <= 48:
        _serve_greedy_scalar(state, fidx, up, dn)
        return
    alive = fidx
    s = state.f_sender[alive]
    r = state.f_receiver[alive]
    scratch = np.empty(state.P, dtype=np.int64)
    guard = 4 * state.P + 8
    for _ in range(guard):
        cand = (up[s] > EPS_RATE) & (dn[r] > EPS_RATE)
        ci_pos = np.flatnonzero(cand)
        if len(ci_pos) == 0:
            return
        # first candidate per sender: reversed scatter keeps the earliest
        scratch.fill(-1)
        rev = ci_pos[::-1]
        scratch[s[rev]] = rev
        sel = np.sort(scratch[scratch >= 0])
        # of those, first per receiver
        scratch.fill(-1)
        rev = sel[::-1]
        scratch[r[rev]] = rev
        sel = scratch[scratch >= 0]
        take = np.minimum(up[s[sel]], dn[r[sel]])
        state.f_rate[alive[sel]] += take
        state.plan_touched.append(alive[sel])
        up[s[sel]] -= take
        dn[r[sel]] -= take
        if len(ci_pos) == len(sel):
            return
        alive = alive[cand]
        s = s[cand]
        r = r[cand]
    raise SimulationError("greedy serving failed to converge")


def _serve_greedy_scalar(state: SimState, fidx: np.ndarray, up: np.ndarray,
                         dn: np.ndarray) -> None:
    """Plain-Python round loop; identical picks to the vectorized path."""
    rates = state.f_rate
    flows = [(int(fi), int(state.f_sender[fi]), int(state.f_receiver[fi])) for fi in fidx]
    picked: list[int] = []
    guard = 4 * state.P + 8
    for _ in range(guard):
        seen_s: set[int] = set()
        heads = []
        n_cand = 0
        for fi, s, r in flows:
            if up[s] > EPS_RATE and dn[r] > EPS_RATE:
                n_cand += 1
                if s not in seen_s:
                    seen_s.add(s)
                    heads.append((fi, s, r))
        if n_cand == 0:
            break
        seen_r: set[int] = set()
        took = 0
        for fi, s, r in heads:
            if r in seen_r:
                continue
            seen_r.add(r)
            take = up[s] if up[s] < dn[r] else dn[r]
            rates[fi] += take
            picked.append(fi)
            up[s] -= take
            dn[r] -= take
            took += 1
        if took == n_cand:
            break
    else:
        raise SimulationError("greedy serving failed to converge")
    if picked:
        state.plan_touched.append(picked)


def allocate_weighted_queues(state: SimState, buckets: list[list[int]],
                             params: SchedulerParams, up: np.ndarray, dn: np.ndarray,
                             fast: bool, topup: bool = True, head_only: bool = True) -> None:
    """Split port budgets across non-empty queues by weights B^-q, then serve.

    ``buckets[q]`` lists the coflow indices of queue q in FIFO order. With
    ``head_only`` the queue's share belongs to the coflow at the head of its
    FIFO (one flow at a time under the fast heuristic); otherwise the share
    cascades down the queue's FIFO. With ``topup``, a final strict-priority
    greedy pass hands all leftover capacity down the queue order, making the
    plan maximal; without it, work conservation rests on the weight
    normalization over non-empty queues alone (the byte-counting learner's
    discipline: ports follow their queue shares until the next interval).
    """
    nonempty = [q for q in range(len(buckets)) if buckets[q]]
    if not nonempty:
        return
    wsum = sum(params.B ** -q for q in nonempty)
    base_up = up.copy()
    base_dn = dn.copy()
    serve = serve_greedy if fast else serve_equalized
    for q in nonempty:
        w = (params.B ** -q) / wsum
        bu = base_up * w
        bd = base_dn * w
        if head_only:
            serve(state, buckets[q][0], bu, bd)
        else:
            for ci in buckets[q]:
                serve(state, ci, bu, bd)
                if bu.max() <= EPS_RATE or bd.max() <= EPS_RATE:
                    break
        # charge what this queue consumed against the master residual
        up -= base_up * w - bu
        dn -= base_dn * w - bd
    np.maximum(up, 0.0, out=up)
    np.maximum(dn, 0.0, out=dn)
    if not topup:
        return
    # work conservation: leftover capacity flows down the priority order
    for q in nonempty:
        if up.max() <= EPS_RATE or dn.max() <= EPS_RATE:
            return
        for ci in buckets[q]:
            serve_greedy(state, ci, up, dn)


def allocate_local_port_queues(state: SimState, buckets: list[list[int]],
                               params: SchedulerParams, up: np.ndarray, dn: np.ndarray,
                               fast: bool) -> None:
    """Per-port weighted sharing among the queues present at each port.

    Every port splits its capacity by B^-q over the queues that have
    unfinished flows there (the local-agent view of the logical queues);
    within a queue, coflows cascade in FIFO order through the queue's
    per-port slice. Capacity a queue cannot use at a port is left idle until
    the next schedule, so only the weight normalization provides work
    conservation.
    """
    nonempty = [q for q in range(len(buckets)) if buckets[q]]
    if not nonempty:
        return
    serve = serve_greedy if fast else serve_equalized
    pres_up = np.zeros((len(buckets), state.P), dtype=bool)
    pres_dn = np.zeros((len(buckets), state.P), dtype=bool)
    for q in nonempty:
        for ci in buckets[q]:
            us, ur = state.port_view(ci)
            pres_up[q, us] = True
            pres_dn[q, ur] = True
    weights = np.array([params.B ** -q for q in range(len(buckets))])
    wsum_up = weights @ pres_up
    wsum_dn = weights @ pres_dn
    wsum_up[wsum_up == 0.0] = 1.0
    wsum_dn[wsum_dn == 0.0] = 1.0
    for q in nonempty:
        bu = up * (weights[q] * pres_up[q] / wsum_up)
        bd = dn * (weights[q] * pres_dn[q] / wsum_dn)
        for ci in buckets[q]:
            serve(state, ci, bu, bd)
            if bu.max() <= EPS_RATE or bd.max() <= EPS_RATE:
                break
