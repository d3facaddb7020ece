"""How a partially predictable arrival sequence is built.

An adversary writes down an order. Each customer then independently joins a
random group with probability p, and that group is shuffled among its own
positions. Everybody else stays where the adversary put them.
"""

from ppalloc import build_instance, deterministic_approx, observed_counts, realize, stochastic_observed_count
from ppalloc.arrival import sample_realization

seq = build_instance("1,0,1,a,1,a,1,0", a=0.5)
print("initial order :", seq.tokens(), f"(n1={seq.n1}, n2={seq.n2})")

# Positions 2, 5, 6 and 8 (1-based) are in the random group and rotate 2->6->5->2.
r = realize(seq, members=[1, 4, 5, 7], images=[5, 1, 4, 7])
print("arrival order :", ",".join("01a"[k] for k in r.arrivals))

step = 5  # lambda = 5/8
o1, o2 = observed_counts(r, step)
print(f"after {step} arrivals: o1={o1}, o2={o2}, random-group Type-2 = {stochastic_observed_count(r, step)}")
print("deterministic approximation (o1~, o2~, o2S~):", deterministic_approx(seq, 0.5, step))

# A few random draws at p = 0.5. Customers outside the group never move.
for seed in range(3):
    draw = sample_realization(seq, 0.5, seed)
    moved = draw.assignment.members + 1
    print(f"seed {seed}: {','.join('01a'[k] for k in draw.arrivals)}  group={moved.tolist()}")
