"""Coflow trace model: domain types, benchmark-format parsing, derived-trace generators.

A trace is a set of coflows on a fixed number of fabric ports. Each coflow is a
set of sender->receiver flows with byte sizes and a shared arrival time. The
on-disk format is the classic shuffle benchmark layout::

    <num_ports> <num_coflows>
    <id> <arrival_ms> <M> <m1> ... <mM> <R> <r1>:<MB> ... <rR>:<MB>

Every reducer receives one flow from every mapper; a reducer's megabytes are
divided equally (in bytes) among its M incoming flows, with remainder bytes
handed one-by-one to the lowest-indexed mapper flows so totals are byte-exact.
A reducer token may instead carry an explicit per-mapper byte list
``<r>:<b1|b2|...|bM>``, which is how generated traces with within-reducer skew
(see :func:`gen_mantri_like`) survive serialization.

All sizes are integer bytes, all times integer milliseconds. 1 MB = 2**20 bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MB = 1 << 20


class TraceError(ValueError):
    """Malformed or inconsistent trace input."""


@dataclass(frozen=True)
class FlowSpec:
    """One sender->receiver transfer inside a coflow."""

    flow_id: int
    coflow_id: int
    sender: int
    receiver: int
    size: int  # bytes, > 0

    def validate(self, num_ports: int) -> None:
        if not (0 <= self.sender < num_ports):
            raise TraceError(f"flow {self.flow_id}: sender port {self.sender} >= {num_ports}")
        if not (0 <= self.receiver < num_ports):
            raise TraceError(f"flow {self.flow_id}: receiver port {self.receiver} >= {num_ports}")
        if self.size <= 0:
            raise TraceError(f"flow {self.flow_id}: size must be positive, got {self.size}")


@dataclass(frozen=True)
class CoflowSpec:
    """A coflow: flows that arrive together and complete as a unit."""

    coflow_id: int
    arrival: int  # ms
    flows: tuple[FlowSpec, ...]

    def __post_init__(self):
        if not self.flows:
            raise TraceError(f"coflow {self.coflow_id}: no flows")
        if self.arrival < 0:
            raise TraceError(f"coflow {self.coflow_id}: negative arrival")
        for f in self.flows:
            if f.coflow_id != self.coflow_id:
                raise TraceError(f"coflow {self.coflow_id}: flow {f.flow_id} has mismatched owner")

    @property
    def width(self) -> int:
        return len(self.flows)

    @property
    def senders(self) -> tuple[int, ...]:
        return tuple(sorted({f.sender for f in self.flows}))

    @property
    def receivers(self) -> tuple[int, ...]:
        return tuple(sorted({f.receiver for f in self.flows}))

    @property
    def num_senders(self) -> int:
        return len({f.sender for f in self.flows})

    @property
    def num_receivers(self) -> int:
        return len({f.receiver for f in self.flows})

    @property
    def total_size(self) -> int:
        return sum(f.size for f in self.flows)

    @property
    def skew(self) -> float:
        sizes = [f.size for f in self.flows]
        return max(sizes) / min(sizes)


@dataclass(frozen=True)
class Trace:
    """An ordered coflow workload over ``num_ports`` fabric ports."""

    num_ports: int
    coflows: tuple[CoflowSpec, ...]

    def __post_init__(self):
        order = [(c.arrival, c.coflow_id) for c in self.coflows]
        if order != sorted(order):
            raise TraceError("coflows must be sorted by (arrival, coflow_id)")
        for c in self.coflows:
            for f in c.flows:
                f.validate(self.num_ports)

    @property
    def num_flows(self) -> int:
        return sum(c.width for c in self.coflows)


def _sorted_trace(num_ports: int, coflows: list[CoflowSpec]) -> Trace:
    coflows.sort(key=lambda c: (c.arrival, c.coflow_id))
    return Trace(num_ports=num_ports, coflows=tuple(coflows))


def equal_division(total: int, parts: int) -> list[int]:
    """Split ``total`` bytes into ``parts`` near-equal integers, byte-exact.

    Remainder bytes go one-by-one to the lowest-indexed parts.
    """
    base, rem = divmod(total, parts)
    return [base + 1 if i < rem else base for i in range(parts)]


def _parse_coflow_line(line: str, lineno: int, num_ports: int, next_flow_id: int) -> CoflowSpec:
    toks = line.split()
    try:
        coflow_id = int(toks[0])
        arrival = int(toks[1])
        m = int(toks[2])
        if m <= 0:
            raise TraceError(f"line {lineno}: coflow {coflow_id} has zero mappers")
        mappers = [int(t) for t in toks[3:3 + m]]
        r = int(toks[3 + m])
        if r <= 0:
            raise TraceError(f"line {lineno}: coflow {coflow_id} has zero reducers")
        red_toks = toks[4 + m:4 + m + r]
        if len(red_toks) != r or len(toks) != 4 + m + r:
            raise TraceError(f"line {lineno}: expected {r} reducer tokens")
    except (IndexError, ValueError) as e:
        if isinstance(e, TraceError):
            raise
        raise TraceError(f"line {lineno}: malformed coflow line: {e}") from e

    flows = []
    fid = next_flow_id
    for tok in red_toks:
        try:
            rport_s, size_s = tok.split(":", 1)
            rport = int(rport_s)
        except ValueError as e:
            raise TraceError(f"line {lineno}: malformed reducer token {tok!r}") from e
        if "|" in size_s:
            # explicit per-mapper byte list
            per_mapper = [int(x) for x in size_s.split("|")]
            if len(per_mapper) != m:
                raise TraceError(f"line {lineno}: reducer {rport} lists {len(per_mapper)} sizes, expected {m}")
        else:
            try:
                mb = float(size_s)
            except ValueError as e:
                raise TraceError(f"line {lineno}: bad reducer size {size_s!r}") from e
            total = round(mb * MB)
            if total <= 0:
                raise TraceError(f"line {lineno}: reducer {rport} has non-positive size")
            per_mapper = equal_division(total, m)
        for mport, size in zip(mappers, per_mapper):
            flows.append(FlowSpec(flow_id=fid, coflow_id=coflow_id, sender=mport, receiver=rport, size=size))
            fid += 1

    cf = CoflowSpec(coflow_id=coflow_id, arrival=arrival, flows=tuple(flows))
    for f in cf.flows:
        f.validate(num_ports)
    return cf


def parse_trace(text: str) -> Trace:
    """Parse the line-oriented benchmark format into a :class:`Trace`."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise TraceError("empty trace")
    head = lines[0].split()
    if len(head) != 2:
        raise TraceError("line 1: header must be '<num_ports> <num_coflows>'")
    try:
        num_ports, num_coflows = int(head[0]), int(head[1])
    except ValueError as e:
        raise TraceError(f"line 1: bad header: {e}") from e
    if len(lines) - 1 != num_coflows:
        raise TraceError(f"header declares {num_coflows} coflows, found {len(lines) - 1}")

    coflows = []
    fid = 0
    for i, line in enumerate(lines[1:], start=2):
        cf = _parse_coflow_line(line, i, num_ports, fid)
        fid += cf.width
        coflows.append(cf)
    ids = [c.coflow_id for c in coflows]
    if len(set(ids)) != len(ids):
        raise TraceError("duplicate coflow ids")
    return _sorted_trace(num_ports, coflows)


def load_trace(path) -> Trace:
    with open(path) as f:
        return parse_trace(f.read())


def _reducer_groups(cf: CoflowSpec) -> tuple[list[int], list[int], dict[int, list[FlowSpec]]]:
    """Mapper order, reducer order and per-reducer flow lists, in flow order."""
    mappers: list[int] = []
    reducers: list[int] = []
    per_red: dict[int, list[FlowSpec]] = {}
    for f in cf.flows:
        if f.receiver not in per_red:
            per_red[f.receiver] = []
            reducers.append(f.receiver)
        per_red[f.receiver].append(f)
    for f in per_red[reducers[0]]:
        mappers.append(f.sender)
    return mappers, reducers, per_red


def _is_pairwise(cf: CoflowSpec) -> bool:
    """True if the coflow is an exact mapper x reducer pairwise grid."""
    mappers, reducers, per_red = _reducer_groups(cf)
    if len(set(mappers)) != len(mappers) or len(set(reducers)) != len(reducers):
        return False
    if len(mappers) * len(reducers) != cf.width:
        return False
    it = iter(cf.flows)
    for r in reducers:
        for m in mappers:
            f = next(it)
            if f.sender != m or f.receiver != r:
                return False
    return True


def serialize_trace(trace: Trace) -> str:
    """Emit the canonical text form. Inverse of :func:`parse_trace` on its output."""
    out = [f"{trace.num_ports} {len(trace.coflows)}"]
    for cf in trace.coflows:
        if not _is_pairwise(cf):
            raise TraceError(f"coflow {cf.coflow_id} is not a mapper x reducer grid; not serializable")
        mappers, reducers, per_red = _reducer_groups(cf)
        toks = [str(cf.coflow_id), str(cf.arrival), str(len(mappers))]
        toks += [str(m) for m in mappers]
        toks.append(str(len(reducers)))
        for r in reducers:
            sizes = [f.size for f in per_red[r]]
            total = sum(sizes)
            if sizes == equal_division(total, len(sizes)) and total % MB == 0:
                toks.append(f"{r}:{total // MB}")
            else:
                toks.append(f"{r}:" + "|".join(str(s) for s in sizes))
        out.append(" ".join(toks))
    return "\n".join(out) + "\n"


# --- derived-trace generators ---------------------------------------------


def filter_low_skew(trace: Trace, k: float) -> Trace:
    """Retain exactly the coflows whose skew (max/min flow size) is >= k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    kept = [c for c in trace.coflows if c.skew >= k]
    return Trace(num_ports=trace.num_ports, coflows=tuple(kept))


def filter_thin(trace: Trace, thin_limit: int) -> Trace:
    """Retain coflows with width strictly greater than ``thin_limit``."""
    if thin_limit < 0:
        raise ValueError("thin_limit must be >= 0")
    kept = [c for c in trace.coflows if c.width > thin_limit]
    return Trace(num_ports=trace.num_ports, coflows=tuple(kept))


def replicate_trace(trace: Trace, times: int) -> Trace:
    """Tile the workload ``times`` across port space, keeping arrivals.

    Copy ``i`` offsets all port indices by ``i * num_ports`` and relabels
    coflow ids to stay unique.
    """
    if times < 1:
        raise ValueError("times must be >= 1")
    stride = max(c.coflow_id for c in trace.coflows) + 1 if trace.coflows else 1
    coflows = []
    fid = 0
    for i in range(times):
        poff = i * trace.num_ports
        for cf in trace.coflows:
            flows = []
            for f in cf.flows:
                flows.append(FlowSpec(flow_id=fid, coflow_id=cf.coflow_id + i * stride,
                                      sender=f.sender + poff, receiver=f.receiver + poff,
                                      size=f.size))
                fid += 1
            coflows.append(CoflowSpec(coflow_id=cf.coflow_id + i * stride, arrival=cf.arrival,
                                      flows=tuple(flows)))
    return _sorted_trace(trace.num_ports * times, coflows)


# Small-sample bias corrections for the mapper-weight redistribution, fitted
# offline against the bundled benchmark trace's mapper-count distribution
# (tools/fit_mantri.py). The per-coflow weight sigma is drawn from a log-normal
# meta-distribution solved from the (p50, p90) targets after these corrections.
_COV_P50_CORRECTION = 1.16
_COV_P90_CORRECTION = 1.22
_Z90 = 1.2815515655446004  # standard normal 0.9 quantile


def _sample_cov_sigma(rng: np.random.Generator, p50: float, p90: float, n: int) -> np.ndarray:
    """Per-coflow target population CoV values whose sample CoVs hit the targets."""
    mu = math.log(p50 * _COV_P50_CORRECTION)
    s = (math.log(p90 * _COV_P90_CORRECTION) - mu) / _Z90
    if s <= 0:
        raise ValueError("p90 target must exceed p50 target")
    return np.exp(mu + s * rng.standard_normal(n))


def gen_mantri_like(trace: Trace, target_cov_p50: float = 0.34,
                    target_cov_p90: float = 3.1, seed: int = 0) -> Trace:
    """Redistribute each reducer's bytes across its mapper flows to induce skew.

    Per-mapper weights are drawn from a log-normal per coflow; the log-normal's
    dispersion varies across coflows so that the distribution of per-coflow
    mapper-data coefficients of variation hits the requested p50/p90. Reducer
    totals, flow counts, ports and arrivals are unchanged; single-mapper
    coflows pass through untouched (CoV undefined).
    """
    if target_cov_p50 <= 0 or target_cov_p90 <= 0:
        raise ValueError("targets must be positive")
    rng = np.random.default_rng(seed)
    covs = _sample_cov_sigma(rng, target_cov_p50, target_cov_p90, len(trace.coflows))

    coflows = []
    fid = 0
    for cf, cov in zip(trace.coflows, covs):
        mappers, reducers, per_red = _reducer_groups(cf)
        m = len(mappers)
        if m == 1:
            flows = []
            for f in cf.flows:
                flows.append(FlowSpec(fid, cf.coflow_id, f.sender, f.receiver, f.size))
                fid += 1
            coflows.append(CoflowSpec(cf.coflow_id, cf.arrival, tuple(flows)))
            continue
        # log-normal weights with population CoV == cov: sigma^2 = ln(1 + cov^2)
        sigma = math.sqrt(math.log1p(cov * cov))
        w = np.exp(sigma * rng.standard_normal(m))
        w /= w.sum()
        flows = []
        for r in reducers:
            group = per_red[r]
            total = sum(f.size for f in group)
            sizes = _weighted_division(total, w)
            for f, size in zip(group, sizes):
                flows.append(FlowSpec(fid, cf.coflow_id, f.sender, f.receiver, int(size)))
                fid += 1
        coflows.append(CoflowSpec(cf.coflow_id, cf.arrival, tuple(flows)))
    return Trace(num_ports=trace.num_ports, coflows=tuple(coflows))


def _weighted_division(total: int, weights: np.ndarray) -> list[int]:
    """Split ``total`` bytes by ``weights`` into positive integers, byte-exact.

    Largest-remainder rounding; every part gets at least 1 byte when possible.
    """
    m = len(weights)
    if total < m:
        raise TraceError(f"cannot split {total} bytes into {m} positive flows")
    raw = weights * (total - m)  # reserve 1 byte per flow up front
    base = np.floor(raw).astype(np.int64)
    rem = int(total - m - base.sum())
    frac_order = np.argsort(-(raw - base), kind="stable")
    base[frac_order[:rem]] += 1
    return list(base + 1)


def mapper_data_cov(cf: CoflowSpec) -> float | None:
    """Coefficient of variation of per-mapper totals; None for single-mapper coflows."""
    per_mapper: dict[int, int] = {}
    for f in cf.flows:
        per_mapper[f.sender] = per_mapper.get(f.sender, 0) + f.size
    vals = np.array(list(per_mapper.values()), dtype=float)
    if len(vals) < 2:
        return None
    mean = vals.mean()
    return float(vals.std() / mean) if mean > 0 else None
