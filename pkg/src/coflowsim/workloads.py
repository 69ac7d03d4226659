"""Synthetic benchmark workload calibrated to the published shuffle-trace shape.

The original 150-port, 526-coflow production shuffle trace is not
redistributable here, so this module synthesizes a stand-in that reproduces
its published aggregate statistics exactly where tests pin them:

* 150 ports, 526 coflows;
* bin mix (thin/wide x small/large at width 7, 100 MB): 233/127/24/142;
* skew spectrum: 142 coflows with skew > 1, of which 100/65/51/43 have
  skew >= 2/3/4/5;
* wide coflows (width > 7): 269;
* heavy tail: the top 5 (20) coflows carry roughly 53% (95%) of all bytes;
* bursty arrivals over a ~9 minute window.

Coflows are mapper x reducer grids with integer-megabyte reducer totals and
power-of-two mapper counts, so equal division is byte-exact and within-reducer
flows are exactly equal (skew comes from across-reducer imbalance, as in the
replayed benchmark). The generator is deterministic per seed.
"""

from __future__ import annotations

import importlib.resources
import math

import numpy as np

from .traces import MB, CoflowSpec, FlowSpec, Trace

NUM_PORTS = 150
NUM_COFLOWS = 526
DEFAULT_SEED = 20240811

# skew-bucket counts per bin: bucket -> {bin: count}; buckets are [lo, hi)
# ratios sampled strictly inside. Totals: >1: 142, >=2: 100, >=3: 65,
# >=4: 51, >=5: 43 (nested), per the published filtered-trace sizes.
# The 20 heavy coflows all sit in bin 4's top bucket, so every skew-filtered
# subset keeps the byte backbone of the workload.
SKEW_PLAN = [
    ((1.0, 2.0), {1: 8, 2: 12, 3: 2, 4: 20}),
    ((2.0, 3.0), {1: 6, 2: 9, 3: 2, 4: 18}),
    ((3.0, 4.0), {1: 2, 2: 4, 3: 0, 4: 8}),
    ((4.0, 5.0), {1: 2, 2: 2, 3: 0, 4: 4}),
    ((5.0, 24.0), {1: 8, 2: 13, 3: 2, 4: 20}),
]
BIN_TOTALS = {1: 233, 2: 127, 3: 24, 4: 142}

# byte shares of the 20 largest coflows (the remaining 506 share the rest)
HEAVY_SHARES = (0.13, 0.12, 0.10, 0.09, 0.09) + (0.028,) * 15

#: cap on the ratio of a heavy coflow's bytes to its width (bytes per flow);
#: keeps pilot transfers short so piloting windows stay brief
HEAVY_FLOW_CAP_MB = 26

# arrival process: bursts of coflows over a ~1 minute window; the byte
# backlog outlives the window, so the fabric stays saturated throughout
NUM_BURSTS = 10
BURST_SPACING_MS = 4_300
BURST_SIGMA_MS = 600
WINDOW_MS = 45_000
BURST_FRACTION = 0.7

# rack utilization skew: most traffic concentrates on a hot subset of ports,
# so wide coflows overlap heavily instead of running on disjoint port sets
HOT_PORTS = 56
HOT_FRACTION = 0.82


def _pick_ports(rng: np.random.Generator, n: int, hot_frac: float = HOT_FRACTION) -> np.ndarray:
    hot = min(round(hot_frac * n), HOT_PORTS)
    cold = min(n - hot, NUM_PORTS - HOT_PORTS)
    hot = n - cold
    parts = [rng.choice(HOT_PORTS, size=hot, replace=False)]
    if cold:
        parts.append(HOT_PORTS + rng.choice(NUM_PORTS - HOT_PORTS, size=cold, replace=False))
    return np.sort(np.concatenate(parts))


#: wide jobs land on racks with very different utilization; thin interactive
#: traffic concentrates on the busy ones
WIDE_HOT_CHOICES = (0.3, 0.65, 0.95)


def _geometry(rng: np.random.Generator, b: int, skewed: bool,
              heavy_rank: int | None) -> tuple[int, int]:
    """Pick (mappers, reducers); mappers are powers of two, width respects the bin."""
    if heavy_rank is not None:
        if heavy_rank < 5:
            return 64, 24
        return (64, 16) if heavy_rank < 10 else (64, 8)
    if b == 1:  # thin small
        choices = [(1, 2), (1, 3), (2, 2), (2, 3), (1, 4), (1, 5), (1, 6), (1, 7)]
        if not skewed:
            choices = [(1, 1)] * 6 + choices + [(2, 1), (4, 1)]
    elif b == 2:  # wide small
        if skewed:
            choices = [(64, 2), (64, 3), (64, 4)]
        else:
            choices = [(16, 2), (32, 2), (16, 3), (32, 3), (16, 4), (32, 4), (64, 2), (8, 4)]
    elif b == 3:  # thin large
        choices = [(1, 2), (1, 3), (2, 2), (2, 3), (1, 4)]
        if not skewed:
            choices = [(1, 1)] * 3 + choices + [(2, 1), (4, 1)]
    else:  # wide large
        if skewed:
            choices = [(64, 3), (64, 4), (64, 6)]
        else:
            choices = [(32, 8), (16, 12), (32, 4), (64, 4), (16, 8), (32, 6), (64, 3), (16, 16)]
    m, r = choices[int(rng.integers(len(choices)))]
    return m, r


def _skew_minmax(rng: np.random.Generator, lo: float, hi: float,
                 min_mb: int) -> tuple[int, int]:
    """(min_mb, max_mb) integers whose ratio lies in [lo, hi)."""
    target = float(rng.uniform(lo + 0.1, hi - 0.1))
    max_mb = max(min_mb + 1, round(min_mb * target))
    while max_mb / min_mb >= hi:
        max_mb -= 1
    while max_mb / min_mb < lo:
        max_mb += 1
    if not (lo <= max_mb / min_mb < hi):
        raise AssertionError("could not realize skew bucket")
    return min_mb, max_mb


def _skewed_mbs(rng: np.random.Generator, lo: float, hi: float, r: int,
                small: bool) -> list[int]:
    """Integer reducer megabytes whose max/min ratio lies in [lo, hi).

    Small (thin) coflows spread reducers log-uniformly between the extremes.
    Large wide coflows realize the skew with a single small-outlier reducer,
    the rest staying near the top: high max/min but low dispersion, the shape
    that dominates wide production shuffles.
    """
    if small:
        target = float(rng.uniform(lo + 0.1, hi - 0.1))
        budget = 90
        min_mb = max(2, min(20, int(budget / ((1 + target) * (1 + 0.5 * max(r - 2, 0))))))
        min_mb, max_mb = _skew_minmax(rng, lo, hi, min_mb)
        mids = []
        if r > 2:
            u = rng.uniform(math.log(min_mb), math.log(max_mb), size=r - 2)
            mids = [min(max(int(round(math.exp(x))), min_mb), max_mb) for x in u]
        mbs = [min_mb, *mids, max_mb]
        if sum(mbs) > 100:
            mbs = [min_mb] * (r - 1) + [max_mb]
        return mbs
    min_mb, max_mb = _skew_minmax(rng, lo, hi, int(rng.integers(10, 25)))
    mids = [int(rng.integers(max(max_mb - 2, min_mb + 1), max_mb + 1)) for _ in range(r - 2)]
    return [min_mb, *mids, max_mb]


def _equal_mbs(rng: np.random.Generator, b: int, r: int) -> list[int]:
    if b == 1:  # thin small: mostly interactive-tiny, some mid-size mass
        hi = max(2, 92 // r)
        if rng.random() < 0.7:
            mb = int(rng.integers(1, max(2, min(9, hi))))
        else:
            mb = int(rng.integers(min(24, hi - 1), hi + 1))
    elif b == 2:  # wide small
        hi = max(2, 92 // r)
        lo_mb = min(40, hi - 1)
        mb = int(np.exp(rng.uniform(math.log(max(lo_mb, 1)), math.log(hi))))
        mb = max(1, min(mb, hi))
    else:  # large: log-uniform totals spanning several queue thresholds
        lo = max(105 // r + 1, 1)
        hi = max(2400 // r, lo + 1)
        mb = int(round(math.exp(rng.uniform(math.log(lo), math.log(hi)))))
        mb = max(lo, min(mb, hi))
    return [mb] * r


def _scale_to_large(mbs: list[int]) -> list[int]:
    """Integer-scale reducer totals above the 100 MB bin boundary, keeping ratios."""
    s = sum(mbs)
    if s > 100:
        return mbs
    k = 101 // s + 1
    return [mb * k for mb in mbs]


def synthesize_benchmark(seed: int = DEFAULT_SEED) -> Trace:
    """Build the bundled 150-port, 526-coflow benchmark workload."""
    rng = np.random.default_rng(seed)

    recipes = []  # (bin, skew_bucket_or_None)
    for (lo, hi), per_bin in SKEW_PLAN:
        for b, count in per_bin.items():
            recipes += [(b, (lo, hi))] * count
    for b, total in BIN_TOTALS.items():
        have = sum(1 for rb, _ in recipes if rb == b)
        recipes += [(b, None)] * (total - have)

    # the heavy coflows are exactly bin 4's top-skew recipes, so the backbone
    # of the byte distribution survives every skew filter
    heavy_recipes = [i for i, (b, bucket) in enumerate(recipes)
                     if b == 4 and bucket is not None and bucket[0] >= 5.0]
    assert len(heavy_recipes) == len(HEAVY_SHARES)
    heavy_idx = {int(i): rank for rank, i in
                 enumerate(rng.permutation(heavy_recipes))}

    built = []  # (mbs, m, senders, receivers)
    rest_bytes = 0
    for i, (b, bucket) in enumerate(recipes):
        heavy = i in heavy_idx
        skewed = bucket is not None
        m, r = _geometry(rng, b, skewed, heavy_idx.get(i))
        if skewed:
            mbs = _skewed_mbs(rng, bucket[0], bucket[1], r, small=b in (1, 2))
            if b in (3, 4):
                mbs = _scale_to_large(mbs)
        else:
            mbs = _equal_mbs(rng, b, r)
        if m * r > 7:
            hf = float(WIDE_HOT_CHOICES[int(rng.integers(len(WIDE_HOT_CHOICES)))])
        else:
            hf = HOT_FRACTION
        built.append([mbs, m, _pick_ports(rng, m, hf), _pick_ports(rng, r, hf)])
        if not heavy:
            rest_bytes += sum(mbs)

    # scale heavies so the top-20 carry ~95% of all bytes, capping per-flow
    # size so pilot transfers stay short
    rest_share = 1.0 - sum(HEAVY_SHARES)
    total_target = rest_bytes / rest_share
    for i, rank in heavy_idx.items():
        mbs, m = built[i][0], built[i][1]
        width = m * len(mbs)
        target_mb = HEAVY_SHARES[rank] * total_target
        target_mb = min(target_mb, HEAVY_FLOW_CAP_MB * width)
        k = max(2, round(target_mb / sum(mbs)))
        built[i][0] = [mb * k for mb in mbs]

    # bursty arrivals; heavies anchored to distinct bursts
    centers = [(k + 0.5) * BURST_SPACING_MS for k in range(NUM_BURSTS)]
    arrivals = np.empty(len(recipes), dtype=np.int64)
    for i in range(len(recipes)):
        if i in heavy_idx:
            # big jobs trail their burst: the backlog they create outlives
            # the short coflows that arrived just before them
            c = centers[heavy_idx[i] % NUM_BURSTS] + 1_500
            arrivals[i] = int(rng.normal(c, 400))
        elif recipes[i][0] in (2, 4) and rng.random() < BURST_FRACTION:
            # wide analytics jobs batch up; thin traffic arrives steadily
            c = centers[int(rng.integers(NUM_BURSTS))]
            arrivals[i] = int(rng.normal(c, BURST_SIGMA_MS))
        else:
            arrivals[i] = int(rng.uniform(0, WINDOW_MS))
    np.clip(arrivals, 0, None, out=arrivals)

    order = np.argsort(arrivals, kind="stable")
    coflows = []
    fid = 0
    for new_id, i in enumerate(order, start=1):
        mbs, m, senders, receivers = built[i]
        flows = []
        for rport, mb in zip(receivers, mbs):
            size = mb * MB // m  # m is a power of two: byte-exact
            for sport in senders:
                flows.append(FlowSpec(fid, new_id, int(sport), int(rport), int(size)))
                fid += 1
        coflows.append(CoflowSpec(new_id, int(arrivals[i]), tuple(flows)))
    return Trace(num_ports=NUM_PORTS, coflows=tuple(coflows))


def workload_stats(trace: Trace) -> dict:
    """Aggregates the acceptance suite checks the bundled workload against."""
    from .metrics import bin_of

    bins = {1: 0, 2: 0, 3: 0, 4: 0}
    skews = []
    sizes = []
    for cf in trace.coflows:
        bins[bin_of(cf)] += 1
        skews.append(cf.skew)
        sizes.append(cf.total_size)
    skews_arr = np.array(skews)
    sizes_arr = np.array(sorted(sizes, reverse=True), dtype=float)
    top = sizes_arr.cumsum() / sizes_arr.sum()
    return {
        "num_ports": trace.num_ports,
        "num_coflows": len(trace.coflows),
        "num_flows": trace.num_flows,
        "bins": bins,
        "skew_gt1": int((skews_arr > 1.0).sum()),
        "skew_ge": {k: int((skews_arr >= k).sum()) for k in (2, 3, 4, 5)},
        "wide": int(sum(1 for cf in trace.coflows if cf.width > 7)),
        "top5_share": float(top[4]),
        "top20_share": float(top[19]),
    }


def load_bundled_benchmark() -> Trace:
    """The benchmark workload shipped with the package (fixed seed, committed file)."""
    from .traces import parse_trace

    ref = importlib.resources.files("coflowsim").joinpath("data/fb_like_150ports_526coflows.txt")
    return parse_trace(ref.read_text())
