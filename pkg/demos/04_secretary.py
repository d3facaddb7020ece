"""Observe-then-select when only part of the order is random.

With p = 1 the classic 1/e rule reappears. With less randomness the best
observation window grows towards 1/2 and the guarantee falls. Randomizing the
window length does better than any fixed one.
"""

from ppalloc.secretary import (adversarial_secretary_instance, asymptotic_success, estimate_success,
                               optimal_gamma, randomized_lower_bound)

print(f"{'p':>4s} {'gamma*':>8s} {'success':>8s}")
for p in (0.1, 0.3, 0.5, 0.7, 0.9, 1.0):
    g = optimal_gamma(p)
    print(f"{p:4.1f} {g:8.4f} {asymptotic_success(g, p):8.4f}")

p = 0.5
g = optimal_gamma(p)
print("\nrandomized windows (0.427 w.p. 0.824, else 0.69):", round(randomized_lower_bound(0.427, 0.69, 0.824, p), 4))
print("best fixed window:", round(asymptotic_success(g, p), 4))

inst = adversarial_secretary_instance(2000, g)
est, half = estimate_success(inst, g, p, trials=5000, seed=0)
print(f"simulated on the hard order, n=2000: {est:.4f} +- {half:.4f}")
