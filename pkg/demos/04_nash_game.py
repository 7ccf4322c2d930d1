"""Box-constrained two-player Nash game solved as a projected-gradient fixed point.

Each trial draws a new game. Means over seeds are what the iteration tables
report. Dimensions here are a desk-scale version of n1=1000, n2=500.
"""

import statistics

from fpaccel import DepthPolicy, StoppingRule, gen_nash, run_method

seeds = range(5)
rows = [("picard", 0)] + [(meth, m) for m in (1, 3, 5, 10) for meth in ("anderson", "s-anderson")]
iters = {r: [] for r in rows}
cs = []
for seed in seeds:
    inst = gen_nash(200, 100, a=0.0, b=0.0, seed=seed)
    cs.append(inst.contraction_c)
    for meth, m in rows:
        rep = run_method(inst.map, inst.u0, meth, DepthPolicy.fixed(m), StoppingRule())
        iters[meth, m].append(rep.iterations)

print(f"mean contraction factor over {len(cs)} games: {statistics.fmean(cs):.4f}")
for (meth, m), ks in iters.items():
    print(f"{meth:>10}({m:>2}): mean iterations {statistics.fmean(ks):6.1f}")
