"""Smoothing kernels for max{t, 0}.

The four classical kernels differ from max{t, 0} everywhere near the kink,
so a smoothed map never has exactly the same fixed point. The exact-outside
kernel agrees with max{t, 0} for t <= 0 and t >= mu + 2 sqrt(mu), which is
what lets the smoothing Anderson method reach the true fixed point.
"""

import numpy as np

from fpaccel import ExtendedBox, get_kernel, kernel_value, smoothed_projection

mu = 0.25
t = np.array([-1.0, -0.1, 0.0, 0.1, 0.25, 0.75, 1.25, 2.0])
print(f"t         {np.array2string(t, precision=3)}")
print(f"max(t,0)  {np.array2string(np.maximum(t, 0), precision=4)}")
for name in ("psi1", "psi2", "psi3", "psi4", "psi-new"):
    k = get_kernel(name)
    v = kernel_value(k, t, mu)
    print(f"{name:<9} {np.array2string(v, precision=4)}   kappa={k.kappa_psi:.4f}")

# Largest error over a grid, relative to mu: this is how kappa is fixed.
grid = np.linspace(-10, 10, 20001)
for name in ("psi1", "psi2", "psi3", "psi4", "psi-new"):
    k = get_kernel(name)
    err = max(np.abs(kernel_value(k, grid, m) - np.maximum(grid, 0)).max() / m for m in (1, 0.1, 0.01))
    print(f"sup |psi - max| / mu for {name}: {err:.6f}")

# Smoothed projection onto [0, 1]: exact inside the box and far outside.
box = ExtendedBox([0.0], [1.0])
new = get_kernel("psi-new")
for v in (-2.0, -0.1, 0.5, 1.1, 3.0):
    phi = smoothed_projection(box, new, np.array([v]), mu)[0]
    print(f"phi({v:+.1f}) = {phi:.6f}   clamp = {min(max(v, 0.0), 1.0):.1f}")
