"""Certified ratio of the adaptive policy as a function of p.

For each p we minimize the factor-revealing program and compare with the
non-adaptive guarantee p + (1 - p) / (2 - a). The gap is what adapting to the
observed prefix buys. At b = n the program's value is exactly 1.
"""

import numpy as np

from ppalloc.mp1 import Mp1Params, mp1_lower_bound, solve_mp1

a, kappa = 0.5, 0.7
print(f"a={a}, b/n={kappa}")
print(f"{'p':>5s} {'c*':>8s} {'non-adaptive':>13s}")
for p in np.round(np.arange(0.1, 1.0, 0.2), 2):
    sol = solve_mp1(Mp1Params(a, p, kappa))
    print(f"{p:5.2f} {sol.c_star:8.4f} {mp1_lower_bound(a, p):13.4f}")

full = solve_mp1(Mp1Params(a, 0.5, 1.0))
print("b = n:", round(full.c_star, 6))
print("worst case found at", full.argmin)
