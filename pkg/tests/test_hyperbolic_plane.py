import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from anosov_forge import hyperbolic_plane as hp
from anosov_forge.hyperbolic_plane import (
    LocalProductCoords, UnitTangentFrame, build_U_set, chart_axis_angle, coords_from_matrix,
    coords_to_matrix, flip_coords, flip_map, geodesic_flow_h2, local_coords, one_sided_hausdorff,
    product_flow_check, random_frames, sasaki_distance, tube_distance, u_residual, u_set_frames,
)
from oracles import hyperbolic_distance_upper, mobius


def _frame_close(f, g, tol):
    return min(np.max(np.abs(f.matrix - g.matrix)), np.max(np.abs(f.matrix + g.matrix))) < tol


def test_flow_moves_identity_to_e_i():
    f = geodesic_flow_h2(UnitTangentFrame.identity(), 1.0)
    assert abs(f.base - mobius(np.diag([math.exp(0.5), math.exp(-0.5)]), 1j)) < 1e-14
    assert abs(f.base - math.e * 1j) < 1e-14


def test_flow_zero_time_and_inverse():
    rng = np.random.default_rng(0)
    for g in random_frames(rng, 50):
        f = UnitTangentFrame.from_matrix(g)
        assert _frame_close(geodesic_flow_h2(f, 0.0), f, 1e-15)
        assert _frame_close(geodesic_flow_h2(geodesic_flow_h2(f, 1.7), -1.7), f, 1e-12)


@settings(max_examples=50)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_flow_group_law_and_unit_speed(t1, t2):
    f = UnitTangentFrame.from_matrix(random_frames(np.random.default_rng(7), 1)[0])
    a = geodesic_flow_h2(geodesic_flow_h2(f, t1), t2)
    b = geodesic_flow_h2(f, t1 + t2)
    assert _frame_close(a, b, 1e-9 * math.exp(abs(t1) + abs(t2)))
    assert hyperbolic_distance_upper(f.base, geodesic_flow_h2(f, t1).base) == pytest.approx(abs(t1), abs=1e-7)


def test_flip_examples():
    f = flip_map(UnitTangentFrame.identity())
    assert abs(f.base - 1j) < 1e-15
    assert math.cos(f.angle) == pytest.approx(0.0, abs=1e-15) and math.sin(f.angle) == pytest.approx(-1.0)
    g = UnitTangentFrame.identity()
    assert _frame_close(flip_map(flip_map(g)), g, 1e-12)


def test_flip_conjugates_flow_to_its_reverse():
    rng = np.random.default_rng(1)
    G = random_frames(rng, 1000)
    T = rng.uniform(-3, 3, 1000)
    worst = 0.0
    for g, t in zip(G, T):
        lhs = flip_map(geodesic_flow_h2(g, t))
        rhs = geodesic_flow_h2(flip_map(g), -t)
        worst = max(worst, min(np.abs(lhs - rhs).max(), np.abs(lhs + rhs).max()))
    assert worst < 1e-9


def test_sasaki_examples():
    f = UnitTangentFrame.identity()
    assert sasaki_distance(f.matrix, f.matrix) == 0.0
    assert sasaki_distance(f.matrix, flip_map(f).matrix) == pytest.approx(math.pi, abs=1e-12)
    assert sasaki_distance(f.matrix, geodesic_flow_h2(f, 1.0).matrix) == pytest.approx(1.0, abs=1e-12)


def test_sasaki_symmetric_on_random_pairs():
    rng = np.random.default_rng(2)
    A, B = random_frames(rng, 200, 0.5), random_frames(rng, 200, 0.5)
    assert np.allclose(sasaki_distance(A, B), sasaki_distance(B, A), atol=1e-10)
    assert np.all(sasaki_distance(A, B) > 0)


def test_frame_text_roundtrip():
    f = UnitTangentFrame.from_matrix(random_frames(np.random.default_rng(3), 1)[0])
    assert UnitTangentFrame.from_text(f.to_text()) == f


def test_u_set_contains_center_and_respects_eps():
    f = random_frames(np.random.default_rng(4), 1)[0]
    fams = build_U_set(f, 0.3, samples_per_curve=33, n_levels=3)
    frames = u_set_frames(fams)
    assert np.min(sasaki_distance(frames, f)) < 1e-12
    assert np.max(tube_distance(f, frames)[0]) <= 0.3 + hp.TRUNCATION_SLACK
    assert np.max(u_residual(f, frames)) < 1e-10
    with pytest.raises(ValueError):
        build_U_set(f, math.pi)


def test_family_vectors_orthogonal_to_base_curves():
    fams = build_U_set(random_frames(np.random.default_rng(5), 1)[0], 0.5, samples_per_curve=41, n_levels=4)
    kinds = {fam.kind for fam in fams}
    assert kinds == {"fiber", "stable_horocycle", "unstable_horocycle", "circle", "equidistant"}
    for fam in fams:
        if fam.kind != "fiber":
            assert fam.orthogonality_defect() < 1e-10


def test_flow_equivariance_of_u_sets():
    rng = np.random.default_rng(6)
    eps = 0.3
    for f in random_frames(rng, 10):
        for t in (0.1, 0.5, 1.0):
            eps_prime = eps * math.exp(-t) / 2
            src = u_set_frames(build_U_set(f, eps_prime, samples_per_curve=16, n_levels=2))
            moved = src @ hp.a_mat(t)
            target = f @ hp.a_mat(t)
            assert np.max(u_residual(target, moved)) < 1e-8
            assert np.max(tube_distance(target, moved)[0]) <= eps


def test_flip_symmetry_as_sampled_sets():
    rng = np.random.default_rng(8)
    for f in random_frames(rng, 5):
        A = u_set_frames(build_U_set(f, 0.3, samples_per_curve=16, n_levels=2)) @ hp.FLIP
        B = u_set_frames(build_U_set(f @ hp.FLIP, 0.3, samples_per_curve=16, n_levels=2))
        assert max(one_sided_hausdorff(A, B), one_sided_hausdorff(B, A)) < 1e-9


def test_disjoint_u_sets_for_far_frames():
    f = np.eye(2)
    g = f @ hp.k_mat(1.0)  # same base, vector turned by 2 rad: Sasaki distance 2 > 2 * 0.3
    assert sasaki_distance(f, g) > 0.6
    A = u_set_frames(build_U_set(f, 0.3, samples_per_curve=16, n_levels=2))
    B = u_set_frames(build_U_set(g, 0.3, samples_per_curve=16, n_levels=2))
    margin = min(sasaki_distance(a, B).min() for a in A)
    assert margin > 0.05


def test_local_coords_on_sn_and_on_unstable_horocycle():
    z = local_coords(hp.a_mat(0.4))
    assert (z.s, z.u) == (0.0, 0.0) and z.tau == pytest.approx(0.4)
    f = hp.a_mat(0.4) @ hp.nbar_mat(0.01)
    z = local_coords(f)
    assert z.s == pytest.approx(0.0, abs=1e-15) and z.u == pytest.approx(0.01, abs=1e-15)
    # hyperbolic arc length of the projected horocycle from 0 to u, by quadrature
    us = np.linspace(0.0, 0.01, 2001)
    pts = hp.base_point(hp.a_mat(0.4) @ hp.nbar_mat(us))
    seg = np.abs(np.diff(pts)) / (0.5 * (pts[1:].imag + pts[:-1].imag))
    assert float(seg.sum()) == pytest.approx(0.01, rel=1e-8)


def test_local_coords_rejects_far_frames():
    with pytest.raises(ValueError, match="outside the chart"):
        local_coords(hp.nbar_mat(0.9))


def test_coordinate_round_trip():
    rng = np.random.default_rng(9)
    s, u = rng.uniform(-0.3, 0.3, (2, 1000))
    tau = rng.uniform(-2, 2, 1000)
    fl = rng.random(1000) < 0.5
    g = coords_to_matrix(s, u, tau, fl)
    s2, u2, tau2, fl2 = coords_from_matrix(g)
    assert np.all(fl2 == fl)
    assert max(np.abs(s2 - s).max(), np.abs(u2 - u).max(), np.abs(tau2 - tau).max()) < 1e-9


def test_product_flow_examples():
    assert product_flow_check(LocalProductCoords(0.01, 0.0, 0.0), 1.0) < 1e-8
    for t in (-2.0, 0.5, 3.0):
        assert product_flow_check(LocalProductCoords(0.0, 0.0, 0.3), t) < 1e-12
    z = LocalProductCoords(0.01, 0.01, 0.2)
    g = coords_to_matrix(z.s, z.u, z.tau) @ hp.a_mat(1.0) @ hp.a_mat(-1.0)
    back = coords_from_matrix(g, flipped=False)
    assert max(abs(back[0] - z.s), abs(back[1] - z.u), abs(back[2] - z.tau)) < 1e-8
    with pytest.raises(ValueError):
        product_flow_check(LocalProductCoords(0.0, 0.1, 0.0), 3.0)


def test_flip_in_coordinates_matches_frame_flip():
    rng = np.random.default_rng(10)
    for s, u, tau in rng.uniform(-0.2, 0.2, (50, 3)):
        z = LocalProductCoords(s, u, tau)
        w = flip_coords(z)
        lhs = coords_to_matrix(z.s, z.u, z.tau) @ hp.FLIP
        rhs = coords_to_matrix(w.s, w.u, w.tau, w.flipped)
        assert min(np.abs(lhs - rhs).max(), np.abs(lhs + rhs).max()) < 1e-12


def test_chart_axes_transverse():
    g = np.linspace(-0.3, 0.3, 21)
    S, U = np.meshgrid(g, g)
    ang = chart_axis_angle(S.ravel(), U.ravel())
    assert ang.min() > 1.0
