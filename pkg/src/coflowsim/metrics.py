"""Evaluation quantities derived from event logs.

Completion times, per-coflow speedups between two runs, size-learning overhead
(latency and bytes spent before a coflow reaches its final priority), size
estimation error, and the width/size bin breakdown. Everything here is a pure
function of completed logs.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .fabric import EventLog
from .traces import MB, CoflowSpec, Trace

BIG_COFLOW_BYTES = 100 * MB
THIN_WIDTH = 7


def compute_cct(log: EventLog) -> dict[int, float]:
    """Coflow completion time: last flow finish minus coflow arrival."""
    return {cid: log.finish[cid] - log.arrival[cid] for cid in log.coflow_ids}


def bin_of(coflow: CoflowSpec) -> int:
    """Workload bin by width (flow count) and total size.

    1: thin small, 2: wide small, 3: thin large, 4: wide large
    (thin: width <= 7; small: total <= 100 MB).
    """
    thin = coflow.width <= THIN_WIDTH
    small = coflow.total_size <= BIG_COFLOW_BYTES
    if small:
        return 1 if thin else 2
    return 3 if thin else 4


def bin_of_dims(width: int, total_size: float) -> int:
    thin = width <= THIN_WIDTH
    small = total_size <= BIG_COFLOW_BYTES
    if small:
        return 1 if thin else 2
    return 3 if thin else 4


@dataclass
class LearningRecord:
    coflow_id: int
    latency_ms: float
    latency_frac: float  # of CCT
    bytes: float
    excluded: bool


def learning_overhead(log: EventLog, kind: str | None = None) -> dict[int, LearningRecord]:
    """Per-coflow cost of finding the right priority.

    Sampling runs: latency is the piloting span, bytes the pilot flow bytes.
    Queue-learner runs: latency is the first entry into the queue the coflow
    occupies at completion, bytes the amount sent by then. Bypassed coflows
    and queue-learner coflows that finish in the top queue are excluded.
    """
    kind = kind or ("sampling" if log.scheduler == "sampling" else "aalo")
    out: dict[int, LearningRecord] = {}
    for cid in log.coflow_ids:
        cct = log.finish[cid] - log.arrival[cid]
        if kind == "sampling":
            if cid in log.bypassed or cid not in log.pilot_done:
                out[cid] = LearningRecord(cid, 0.0, 0.0, 0.0, excluded=True)
                continue
            t, _est, pbytes, _d = log.pilot_done[cid]
            lat = t - log.arrival[cid]
            out[cid] = LearningRecord(cid, lat, lat / cct if cct > 0 else 0.0, pbytes,
                                      excluded=False)
        else:
            events = log.queue_events.get(cid, [])
            if not events:
                out[cid] = LearningRecord(cid, 0.0, 0.0, 0.0, excluded=True)
                continue
            final_q = events[-1][1]
            if final_q == 0:
                out[cid] = LearningRecord(cid, 0.0, 0.0, 0.0, excluded=True)
                continue
            t_enter, _, d_at = next((t, q, d) for t, q, d in events if q == final_q)
            lat = t_enter - log.arrival[cid]
            out[cid] = LearningRecord(cid, lat, lat / cct if cct > 0 else 0.0, d_at,
                                      excluded=False)
    return out


@dataclass
class ComparisonReport:
    """Speedups of a subject run against a baseline run on the same trace."""

    baseline: str
    subject: str
    coflow_ids: list[int]
    speedups: np.ndarray          # per-coflow baseline_cct / subject_cct
    avg_cct_ratio: float          # mean baseline CCT / mean subject CCT
    p10: float
    p50: float
    p90: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# baseline={self.baseline} subject={self.subject}\n")
        buf.write(f"# avg_cct_ratio={self.avg_cct_ratio!r} p10={self.p10!r} "
                  f"p50={self.p50!r} p90={self.p90!r}\n")
        buf.write("coflow_id,speedup\n")
        for cid, s in zip(self.coflow_ids, self.speedups):
            buf.write(f"{cid},{s!r}\n")
        return buf.getvalue()


def speedup_report(base: EventLog, subject: EventLog) -> ComparisonReport:
    """Per-coflow CCT ratios and the ratio of mean CCTs, base over subject."""
    if sorted(base.coflow_ids) != sorted(subject.coflow_ids):
        raise ValueError("logs cover different coflow sets; need identical traces")
    ids = sorted(base.coflow_ids)
    b = np.array([base.finish[c] - base.arrival[c] for c in ids])
    s = np.array([subject.finish[c] - subject.arrival[c] for c in ids])
    ratios = b / s
    return ComparisonReport(
        baseline=base.scheduler, subject=subject.scheduler, coflow_ids=ids,
        speedups=ratios, avg_cct_ratio=float(b.mean() / s.mean()),
        p10=float(np.percentile(ratios, 10)),
        p50=float(np.percentile(ratios, 50)),
        p90=float(np.percentile(ratios, 90)),
    )


@dataclass
class EstimationReport:
    mean_error: float
    std_error: float
    pairs: list[tuple[int, float, float]] = field(default_factory=list)  # (cid, true, est)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# mean_error={self.mean_error!r} std_error={self.std_error!r}\n")
        buf.write("coflow_id,true_bytes,estimated_bytes,rel_error\n")
        for cid, true, est in self.pairs:
            err = abs(est - true) / true
            buf.write(f"{cid},{true},{est!r},{err!r}\n")
        return buf.getvalue()


def estimation_report(log: EventLog) -> EstimationReport:
    """Relative size-estimation error over coflows that went through piloting."""
    pairs = []
    errs = []
    for cid in log.coflow_ids:
        if cid not in log.pilot_done:
            continue
        _t, est, _pb, _d = log.pilot_done[cid]
        true = log.total_size[cid]
        pairs.append((cid, true, est))
        errs.append(abs(est - true) / true)
    if not errs:
        return EstimationReport(0.0, 0.0, [])
    arr = np.array(errs)
    return EstimationReport(float(arr.mean()), float(arr.std()), pairs)


def bin_breakdown(trace: Trace) -> dict[int, list[int]]:
    """Coflow ids per bin."""
    out: dict[int, list[int]] = {1: [], 2: [], 3: [], 4: []}
    for cf in trace.coflows:
        out[bin_of(cf)].append(cf.coflow_id)
    return out


def cdf_points(values) -> list[tuple[float, float]]:
    """(value, cumulative fraction) pairs for plotting an empirical CDF."""
    vals = np.sort(np.asarray(values, dtype=float))
    n = len(vals)
    return [(float(v), (i + 1) / n) for i, v in enumerate(vals)]


def cdf_csv(values, header: str = "value") -> str:
    rows = [f"{header},cum_frac"]
    rows += [f"{v!r},{f!r}" for v, f in cdf_points(values)]
    return "\n".join(rows) + "\n"


def coflow_metrics_csv(trace: Trace, log: EventLog) -> str:
    """Per-coflow metrics table: cct, learning, estimation error, bin."""
    learn = learning_overhead(log)
    by_id = {cf.coflow_id: cf for cf in trace.coflows}
    rows = ["coflow_id,arrival_ms,width,total_bytes,bin,cct_ms,"
            "learn_latency_ms,learn_frac,learn_bytes,learn_excluded,est_bytes,est_rel_error"]
    for cid in sorted(log.coflow_ids):
        cf = by_id[cid]
        cct = log.finish[cid] - log.arrival[cid]
        lr = learn[cid]
        if cid in log.pilot_done:
            est_b = log.pilot_done[cid][1]
            est_err = abs(est_b - cf.total_size) / cf.total_size
            est_s, err_s = repr(float(est_b)), repr(float(est_err))
        else:
            est_s, err_s = "", ""
        rows.append(f"{cid},{log.arrival[cid]!r},{cf.width},{cf.total_size},{bin_of(cf)},"
                    f"{cct!r},{lr.latency_ms!r},{lr.latency_frac!r},{lr.bytes!r},"
                    f"{int(lr.excluded)},{est_s},{err_s}")
    return "\n".join(rows) + "\n"
