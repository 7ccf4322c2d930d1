"""Picard, Anderson, EDIIS and smoothing Anderson on the American-option LCP.

The planted solution has about theta * n components sitting on the kink of
max{., 0}. The history arrays printed here are what a convergence plot of
||F_k|| / ||F_0|| against k would use.
"""

import numpy as np

from fpaccel import DepthPolicy, StoppingRule, gen_lcp_option, run_method

inst = gen_lcp_option(200, theta=0.8, seed=0)
print(f"n = {inst.n}, contraction factor c = {inst.contraction_c:.6f}")
print(f"planted active components: {np.sum(inst.u_star == 0)}")

stop = StoppingRule(rel_residual_tol=1e-14, max_iter=7000)
for method, m in [("picard", 0), ("anderson", 10), ("ediis", 10), ("s-anderson", 10)]:
    rep = run_method(inst.map, inst.u0, method, DepthPolicy.fixed(m), stop)
    err = np.linalg.norm(rep.u_final - inst.u_star)
    print(
        f"{method:>10}({m:>2}): {rep.status:<9} k={rep.iterations:<5} "
        f"rate={rep.terminal_rate:.4f}  ||u-u*||={err:.2e}"
    )

rep = run_method(inst.map, inst.u0, "s-anderson", DepthPolicy.fixed(10), stop)
print("s-Anderson(10) mu_k every 25 steps:", np.array2string(rep.mu_history[::25], precision=2))
