"""Reference values computed with independent code and frozen here.

The S^1 seminorm values come from a Gauss-Jacobi rule in the offset
variable (weight u^(p-2) absorbs the diagonal singularity) times a
periodic trapezoid rule in the base point, 4096 x 400 nodes, refined
from 2048 x 200 with agreement to 1e-7.
"""
import math

import numpy as np
import pytest

from hopfdeg.geometry import make_quadrature
from hopfdeg.mapzoo import PROFILE_C, bubble_map, profile_theta
from hopfdeg.sobolev import SeminormSpec, fractional_seminorm

CIRCLE_2048 = make_quadrature(1, 2048)


def test_profile_normalisation_constant():
    # int_0^1 (1 - t^4)^2 dt = 1 - 2/5 + 1/9 = 32/45
    assert PROFILE_C == pytest.approx(45 / 32, rel=1e-14)
    assert profile_theta(0.0, 0.3) == pytest.approx(math.pi, abs=1e-14)
    assert profile_theta(0.3, 0.3) == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("d, s, ref", [
    (1, 0.6, 45.345867441493766),
    (3, 0.6, 131.65868474030677),
    (2, 0.8, 142.65382424277078),
])
def test_circle_seminorm_against_offline_quadrature(d, s, ref):
    res = fractional_seminorm(bubble_map(1, d), SeminormSpec(s, 1 / s, m=1), CIRCLE_2048)
    assert res.pth_power == pytest.approx(ref, rel=1e-6)
    assert res.value == pytest.approx(ref ** s, rel=1e-6)
