"""Brouwer degree of bubble maps, computed twice.

The integral method pulls back a volume form and integrates it over the
sphere. The counting method solves f(x) = y by Newton's method from every
quadrature node and sums the Jacobian signs of the distinct roots. The two
share nothing except the map, so agreement is a real check.
"""
import numpy as np

from hopfdeg.invariants import (NonRegularValueError, brouwer_degree_count,
                                brouwer_degree_count_auto, brouwer_degree_integral)
from hopfdeg.mapzoo import SphereMap, bubble_map

print("bubble maps S^n -> S^n, d bubbles of degree sign(d)")
print(f"{'n':>2} {'d':>3} {'integral':>14} {'count':>6} {'preimages':>10}")
for n in (1, 2):
    for d in (-2, 1, 3, 6):
        f = bubble_map(n, d)
        a = brouwer_degree_integral(f)
        c = brouwer_degree_count_auto(f, seed=1)
        print(f"{n:>2} {d:>3} {a.raw:>14.8f} {c.rounded:>6} {c.params['preimages']:>10}")

# Outside the bubbles the map is constant, so the constant value is hit on
# a whole open set where the Jacobian vanishes. The counter refuses it.
f = bubble_map(2, 3)
base = f(np.array([[0.0, 0.0, -1.0]]))[0]
print("\ncounting at the constant value", np.round(base, 6))
try:
    brouwer_degree_count(f, base)
except NonRegularValueError as e:
    print("  rejected:", e)

# Precomposing with a reflection of the domain reverses orientation.
mirror = np.array([1.0, 1.0, -1.0])
g = SphereMap(2, 3, lambda x: f(x * mirror), tag="mirrored bubble")
print("\nbubble_map(2, 3) precomposed with a reflection:", brouwer_degree_integral(g).rounded)
