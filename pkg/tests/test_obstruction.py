import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from anosov_forge.obstruction import (
    VERTICAL, CircleMapLift, FunctionLineField, GridLineField, SlopePath, circle_leaf_contradiction,
    constant_field, eigen_slopes, fiberwise_obstruction_report, find_rational_crossing,
    is_certified_irrational, linear_slope_of_foliation, read_line_field, rotation_number,
    simplest_rational_between, write_line_field,
)
from anosov_forge.toral_dynamics import CAT_MAP, ToralAutomorphism, block_diag, stable_unstable_dims
from oracles import brute_simplest_rational, first_companion_with_dims, holonomy_slope_oracle, long_orbit_rotation

PHI = (1 + math.sqrt(5)) / 2


def test_rigid_rotation_is_exact():
    est, bound = rotation_number(CircleMapLift(1 / 3), 7)
    assert est == 1 / 3 and bound == 1 / 7


def test_identity_rotation_is_zero():
    assert rotation_number(CircleMapLift(0.0), 100)[0] == 0.0


def test_wobbly_rotation_against_long_orbit():
    F = CircleMapLift(0.3, ((0.05, 1, 0.0),))
    est, bound = rotation_number(F, 10 ** 5)
    ref = long_orbit_rotation(0.3, 0.05, 10 ** 7)
    assert abs(est - ref) < 1e-5
    assert bound == 1e-5


def test_lift_degree_one_and_non_monotone_rejected():
    F = CircleMapLift(0.3, ((0.05, 1, 0.0), (0.01, 3, 0.4)))
    assert F.degree_one_defect() < 1e-12
    with pytest.raises(ValueError, match="monotone"):
        rotation_number(CircleMapLift(0.0, ((0.5, 1, 0.0),)), 10)


@settings(max_examples=25, deadline=None)
@given(st.floats(-1, 1), st.floats(0, 0.15), st.floats(0, 1))
def test_rotation_estimates_agree_within_bound(shift, amp, x0):
    F = CircleMapLift(shift, ((amp, 1, 0.0),))
    a, bound = rotation_number(F, 500, x0)
    b, _ = rotation_number(F, 1000, x0)
    c, _ = rotation_number(F, 500, 0.0)
    assert abs(a - b) <= bound
    assert abs(a - c) <= bound


def test_constant_slope_fields():
    assert linear_slope_of_foliation(constant_field(2.0), 50.0) == pytest.approx(2.0, abs=1e-12)
    assert linear_slope_of_foliation(constant_field(VERTICAL), 10.0) == VERTICAL


def test_cat_unstable_field_slope_matches_eigenvector():
    su, ss = eigen_slopes(CAT_MAP)
    # eigenvector (1, phi - 1) of [[2,1],[1,1]] for phi^2
    assert su == pytest.approx(PHI - 1, abs=1e-12)
    assert ss == pytest.approx(-PHI, abs=1e-12)
    assert linear_slope_of_foliation(constant_field(su), 100.0) == pytest.approx(PHI - 1, abs=1e-12)


def _wobble(amp=0.1, slope=PHI):
    base = math.atan(slope)
    return FunctionLineField(lambda x, y: base + amp * math.sin(2 * math.pi * x) * math.cos(2 * math.pi * y))


def test_wobble_slope_matches_long_leaf_oracle():
    f = _wobble()
    ours = linear_slope_of_foliation(f, 1000.0)
    ref = holonomy_slope_oracle(f, 1e4, h=0.01)
    assert abs(ours - ref) < 0.01


def test_slope_convergence_on_random_parallel_fields():
    rng = np.random.default_rng(3)
    diffs = []
    for _ in range(20):
        slope = rng.uniform(0.3, 2.5)
        amp = rng.uniform(0.0, 0.1)
        f = _wobble(amp, slope)
        a = linear_slope_of_foliation(f, 200.0, h=0.02)
        b = linear_slope_of_foliation(f, 400.0, h=0.02)
        diffs.append(abs(a - b) * 200.0)
    c = max(diffs)
    assert c < 10.0  # |slope(L) - slope(2L)| <= c / L with a modest fitted c


def test_grid_field_discontinuity_rejected():
    ang = np.zeros((8, 8))
    ang[:, 4:] = math.pi / 2
    with pytest.raises(ValueError, match="continuous"):
        linear_slope_of_foliation(GridLineField(ang), 10.0)


def test_line_field_file_roundtrip(tmp_path):
    g = _wobble().to_grid(6, 5)
    write_line_field(tmp_path / "f.txt", g)
    back = read_line_field(tmp_path / "f.txt")
    assert np.allclose(back.angles, g.angles)


@pytest.mark.parametrize("a,b,expected", [(PHI, 1 - PHI, Fraction(0)), (math.sqrt(2), math.sqrt(3), Fraction(3, 2))])
def test_simplest_rational_examples(a, b, expected):
    assert simplest_rational_between(a, b) == expected
    assert brute_simplest_rational(a, b) == expected


@settings(max_examples=200)
@given(st.floats(-20, 20), st.floats(1e-3, 5))
def test_simplest_rational_is_minimal(a, w):
    b = a + w
    r = simplest_rational_between(a, b)
    assert a < r < b
    ref = brute_simplest_rational(a, b, q_max=50)
    if ref is not None:
        assert r == ref


def test_cat_crossing_witness():
    su, ss = eigen_slopes(CAT_MAP)
    t0, p, q = find_rational_crossing(SlopePath.linear(su, ss))
    assert (p, q) == (0, 1)
    assert abs((1 - t0) * su + t0 * ss) < 1e-9


def test_sqrt2_sqrt3_crossing():
    t0, p, q = find_rational_crossing(SlopePath.linear(math.sqrt(2), math.sqrt(3)))
    assert (p, q) == (3, 2)


def test_crossing_preconditions():
    with pytest.raises(ValueError):
        find_rational_crossing(SlopePath.linear(PHI, PHI))
    with pytest.raises(ValueError, match="rational"):
        find_rational_crossing(SlopePath.linear(0.5, PHI))
    with pytest.raises(ValueError, match="continuous"):
        SlopePath([0.0, 1.0], [0.0, 3.0])


def test_irrationality_certificate():
    assert is_certified_irrational(math.sqrt(2))
    assert not is_certified_irrational(0.375)


@pytest.mark.parametrize("len0,rate,systole,expected", [
    (1.0, math.exp(-1), 0.1, math.log(10)),
    (1.0, 0.5, 0.1, math.log2(10)),
    (0.1, 0.5, 0.1, 0.0),
])
def test_circle_leaf_closed_forms(len0, rate, systole, expected):
    assert abs(circle_leaf_contradiction(len0, rate, systole) - expected) < 1e-12


def test_circle_leaf_needs_contraction():
    with pytest.raises(ValueError):
        circle_leaf_contradiction(1.0, 1.0, 0.1)


def test_verdicts():
    v = fiberwise_obstruction_report(CAT_MAP, True)
    assert v.verdict == "impossible_d2" and (v.witness["p"], v.witness["q"]) == (0, 1)
    assert fiberwise_obstruction_report(block_diag(CAT_MAP, CAT_MAP), True).verdict == "not_obstructed"
    assert fiberwise_obstruction_report(CAT_MAP, False).verdict == "not_obstructed"
    odd = block_diag(CAT_MAP, ToralAutomorphism(((-1,),)))
    with pytest.raises(ValueError):
        fiberwise_obstruction_report(odd, True)  # eigenvalue -1 is not hyperbolic
    keys = set(v.as_dict())
    assert {"verdict", "witness.t0", "witness.p", "witness.q", "dims.stable", "dims.unstable"} <= keys


def test_unequal_dims_found_by_search():
    C = first_companion_with_dims(4, (1, 3))
    assert C is not None
    A = ToralAutomorphism(C)
    assert stable_unstable_dims(A) == (1, 3)
    v = fiberwise_obstruction_report(A, True)
    assert v.verdict == "impossible_dims" and v.dims[0] != v.dims[1]


def test_odd_dimension_parity():
    C = first_companion_with_dims(3, (1, 2))
    v = fiberwise_obstruction_report(ToralAutomorphism(C), True)
    assert v.verdict == "impossible_parity"
