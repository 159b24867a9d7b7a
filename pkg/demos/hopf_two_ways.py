"""Hopf invariant of maps S^3 -> S^2, computed twice.

Both methods work on the stereographic picture F = f o Upsilon on a cube
in R^3.

Whitehead: beta = F* omega is a closed 2-form. Solving d eta = beta with
eta = d* Delta^{-1} beta by FFT gives H(f) = integral of eta ^ beta.

Linking: for two regular values p, q the fibers F^{-1}(p), F^{-1}(q) are
closed curves. H(f) is their linking number, computed exactly for the
polygons found by marching tetrahedra.
"""
import time

from hopfdeg.invariants import (InconclusiveError, hopf_invariant_linking,
                                hopf_invariant_whitehead, sample_pullback)
from hopfdeg.mapzoo import hopf_fibration, whitehead_map

N = 96
cases = [
    ("Hopf fibration (capped)", hopf_fibration(capped=True)),
    ("Whitehead map k+ = k- = 1", whitehead_map(1, 1)),
    ("Whitehead map k+ = 2, k- = 1", whitehead_map(1, 2, 1)),
]
for name, f in cases:
    t0 = time.perf_counter()
    sample = sample_pullback(f, N=N)
    w = hopf_invariant_whitehead(f, N=N, sample=sample)
    try:
        lk = hopf_invariant_linking(f, N=N, sample_F=sample.F)
        lk_txt = f"{lk.raw:+.6f}"
    except InconclusiveError as e:
        lk_txt = f"inconclusive ({e})"
    print(f"{name:30s} Whitehead {w.raw:+9.4f}  linking {lk_txt}  box L={sample.L:.2f}  "
          f"[{time.perf_counter() - t0:.1f}s]")

# The Whitehead maps are built so that H = 2 k+ k-. The integral is a grid
# quantity and needs N = 96 once k+ k- > 1 (at N = 64 the (2, 1) map gives
# 4.54). The linking number of the extracted polygons is an integer up to
# roundoff.
