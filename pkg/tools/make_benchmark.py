#!/usr/bin/env python3
"""Regenerate the bundled benchmark workload file from the frozen seed."""

import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from coflowsim.traces import serialize_trace
from coflowsim.workloads import synthesize_benchmark, workload_stats

out = pathlib.Path(__file__).resolve().parents[1] / "src/coflowsim/data/fb_like_150ports_526coflows.txt"
trace = synthesize_benchmark()
out.parent.mkdir(parents=True, exist_ok=True)
out.write_text(serialize_trace(trace))
print(f"wrote {out}")
for k, v in workload_stats(trace).items():
    print(f"  {k}: {v}")
