"""The commutator estimate on periodic maps.

For f : T^3 -> R^3 and a closed compact 2-form kappa, the quantity
||Delta^{-1/4} f* kappa||^2 is bounded by seminorms of f times norms of
kappa. The sweep raises the frequency M of f(x) = A (sin M x_i + cos M x_{i+1})
and reports lhs / rhs.

The rhs has two pieces, ||kappa|| and ||D kappa|| [f]_{W^{s,3/s}}. At a
small amplitude the first piece dominates and the ratio barely moves with M.
At a large amplitude the second piece dominates, and it grows with M faster
than the lhs. The ratio then falls like 1/M. Both regimes are consistent
with an upper bound.
"""
from hopfdeg.experiments import run_commutator_sweep

for A in (0.002, 0.05):
    rep = run_commutator_sweep(frequency_list=(1, 2, 4, 8), s_list=(0.6, 0.9), amplitude=A,
                               N=48, mc_samples=40000)
    print(f"amplitude A = {A}")
    for r in rep.rows:
        print(f"  M={r['M']}  lhs {r['lhs']:.3e}  ratio s=0.6 {r['ratio_s0.6']:.3e}  s=0.9 {r['ratio_s0.9']:.3e}")
    for key, st in rep.ratios.items():
        print(f"  {key}: max/min {st['max_over_min']:.2f}")
