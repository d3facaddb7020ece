"""Five policies on the instance where b Type-2 customers arrive first and
nothing else comes.

The offline optimum sells all b units. A fixed booking limit holds back stock
for Type-1 customers who never show up. The rate-capped baseline only sells
about lambda b units by time lambda. The first online policy mixes both ideas.
The adaptive policy sees from the empty tail that no Type-1 demand is coming.
"""

from ppalloc.experiments import reproduce_table2

a, p, n = 0.5, 0.5, 4000
b = n // 2
rows = reproduce_table2(a, p, b, n, trials=2000, seed=1, c=0.85)

print(f"a={a} p={p} b={b} n={n}")
print(f"{'policy':10s} {'E[ALG]/OPT':>11s} {'+-95%':>8s} {'reference':>10s}")
for row in rows:
    print(f"{row['policy']:10s} {row['mean_ratio']:11.4f} {row['ci_half_width']:8.4f} {row['analytic']:10.4f}")
