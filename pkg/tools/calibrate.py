#!/usr/bin/env python3
"""Run the scheduler matrix on the bundled workload and print the numbers the
acceptance criteria care about. Used while tuning the workload generator."""

import pathlib
import sys
import time

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

import numpy as np

from coflowsim.config import PilotPolicy, SchedulerParams, SimConfig
from coflowsim.fabric import run_simulation
from coflowsim.metrics import bin_of, estimation_report, learning_overhead, speedup_report
from coflowsim.workloads import load_bundled_benchmark, synthesize_benchmark

FRESH = "--fresh" in sys.argv
trace = synthesize_benchmark() if FRESH else load_bundled_benchmark()
by_id = {cf.coflow_id: cf for cf in trace.coflows}
print(f"trace: {len(trace.coflows)} coflows, {trace.num_flows} flows, "
      f"{sum(c.total_size for c in trace.coflows)/2**30:.0f} GB")

logs = {}
for name in ("sampling", "aalo", "aalo-oracle", "sebf", "fifo", "fair"):
    t0 = time.time()
    logs[name] = run_simulation(trace, SimConfig(num_ports=150, scheduler=name))
    ccts = np.array([logs[name].cct(c) for c in logs[name].coflow_ids])
    print(f"{name:12s} {time.time()-t0:6.1f}s  avg_cct={ccts.mean():12.1f}  "
          f"p50={np.percentile(ccts, 50):9.1f}")

samp = logs["sampling"]
print("\n-- criterion 1: sampling vs aalo --")
rep = speedup_report(logs["aalo"], samp)
print(f"avg ratio {rep.avg_cct_ratio:.3f} (need >=1.2)   P90 {rep.p90:.2f} (need >=4)  "
      f"P50 {rep.p50:.2f}")

print("\n-- criterion 2: learning overhead --")
la = learning_overhead(logs["aalo"], "aalo")
ls = learning_overhead(samp, "sampling")
lat_a = np.array([r.latency_ms for r in la.values() if not r.excluded])
lat_s = np.array([r.latency_ms for r in ls.values() if not r.excluded])
by_a = np.array([r.bytes for r in la.values() if not r.excluded])
by_s = np.array([r.bytes for r in ls.values() if not r.excluded])
fr_s = np.array([r.latency_frac for r in ls.values() if not r.excluded])
print(f"frac of sampled coflows <2% cct learning: {np.mean(fr_s < 0.02):.2f} (need >=0.5)")
print(f"median latency ratio {np.median(lat_a)/np.median(lat_s):.1f} (need >=5)  "
      f"[aalo {np.median(lat_a):.0f}ms vs {np.median(lat_s):.0f}ms, n={len(lat_a)}/{len(lat_s)}]")
print(f"median bytes ratio {np.median(by_a)/np.median(by_s):.1f} (need >=5)  "
      f"[aalo {np.median(by_a)/2**20:.1f}MB vs {np.median(by_s)/2**20:.2f}MB]")

print("\n-- criterion 3: estimation accuracy --")
est = estimation_report(samp)
print(f"mean rel error {est.mean_error:.3f} (need <=0.10), std {est.std_error:.3f}")

print("\n-- criterion 5: baseline ordering --")
means = {n: np.mean([lg.cct(c) for c in lg.coflow_ids]) for n, lg in logs.items()}
order = sorted(means, key=means.get)
print("order:", " < ".join(order))
print(f"sampling vs fifo  {means['fifo']/means['sampling']:.2f} (need >=2)")
print(f"sampling vs fair  {means['fair']/means['sampling']:.2f} (need >=3)")
print(f"sampling vs oracle {means['aalo-oracle']/means['sampling']:.3f} (need >1)")

print("\n-- criterion 4: pilot selection sweep --")
for pp in (PilotPolicy("constant", 2), PilotPolicy("frac_senders", 0.05), PilotPolicy("frac_flows", 0.10)):
    cfg = SimConfig(num_ports=150, scheduler="sampling", params=SchedulerParams(pilot_policy=pp))
    t0 = time.time()
    lg = run_simulation(trace, cfg)
    err = estimation_report(lg).mean_error
    ratio = speedup_report(logs["aalo"], lg).avg_cct_ratio
    print(f"{str(pp):20s} err={err:.4f} avg_ratio={ratio:.2f}  ({time.time()-t0:.0f}s)")

print("\n-- pilot phase durations (sampling default) --")
pd = np.array([v[0] - samp.arrival[c] for c, v in samp.pilot_done.items()])
print("p50/p90/max ms:", np.round(np.percentile(pd, [50, 90, 100]), 1))

print("\n-- per-bin avg ratios sampling vs aalo --")
for b in (1, 2, 3, 4):
    ids = [c for c in rep.coflow_ids if bin_of(by_id[c]) == b]
    am = np.mean([logs["aalo"].cct(c) for c in ids])
    sm = np.mean([samp.cct(c) for c in ids])
    rr = [logs["aalo"].cct(c) / samp.cct(c) for c in ids]
    print(f"bin{b}: n={len(ids):3d} avg_ratio={am/sm:5.2f}  p50_ratio={np.median(rr):5.2f}")
