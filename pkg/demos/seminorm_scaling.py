"""How fractional seminorms see the degree.

For bubble maps f_d : S^1 -> S^1 with d bubbles, [f_d]_{W^{s,1/s}}^{1/s}
grows linearly in d, so |deg| is bounded by a multiple of it.

Shrinking the image instead, g_k = k^{-sigma} f_k, breaks this when
s < n/(n+1): the seminorm of g_k stays bounded while the integral of
g_k* of the volume form behaves like k^{1 - 2 sigma} on S^1. The integral
still detects the degree.
"""
from hopfdeg.experiments import run_degree_blowup, run_degree_sharpness

rep = run_degree_sharpness(n=1, s_list=(0.6, 0.8), d_list=(1, 2, 3, 4, 6, 8))
print("sharpness, n = 1")
for r in rep.rows:
    print(f"  d={r['d']:>2}  [f]^(1/s): s=0.6 {r['seminorm_pow_s0.6']:9.2f}   s=0.8 {r['seminorm_pow_s0.8']:9.2f}")
for key, reg in rep.regressions.items():
    print(f"  log-log slope {key}: {reg.slope:.4f}  95% CI [{reg.ci_low:.3f}, {reg.ci_high:.3f}]")

sigma = 0.4
rep = run_degree_blowup(n=1, s=0.4, sigma=sigma, k_list=(1, 2, 4, 8, 16))
print(f"\nblow-up, n = 1, s = 0.4, sigma = {sigma}")
for r in rep.rows:
    print(f"  k={r['k']:>2}  scale {r['scale']:.3f}  integral {r['integral']:.5f}  [g_k] {r['seminorm_g']:.4f}")
print(f"  integral slope {rep.regressions['integral'].slope:.4f} (expected {1 - 2 * sigma:.4f})")
print(f"  seminorm of g_k: max/min {rep.ratios['seminorm_g']['max_over_min']:.3f}")
