import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from anosov_forge.toral_dynamics import (
    CAT_MAP, SuspensionPoint, ToralAutomorphism, block_diag, characteristic_polynomial,
    check_gluing_conjugacy, fiberwise_rate_check, growth_check, identity, integer_determinant,
    is_hyperbolic, read_matrix, real_eigenbasis, section_return_map, stable_unstable_dims,
    suspension_flow, torus_distance, write_matrix,
)
from oracles import fraction_determinant, quadratic_eigen_moduli

small_ints = st.integers(-6, 6)


@st.composite
def unimodular_2x2(draw):
    """Products of elementary shears; always determinant 1."""
    M = identity(2)
    for k in draw(st.lists(st.tuples(st.sampled_from([0, 1]), st.integers(-3, 3)), min_size=1, max_size=6)):
        kind, n = k
        E = ToralAutomorphism(((1, n), (0, 1)) if kind == 0 else ((1, 0), (n, 1)))
        M = M @ E
    return M


@given(st.lists(st.lists(small_ints, min_size=4, max_size=4), min_size=4, max_size=4))
def test_integer_determinant_matches_rational_elimination(rows):
    assert integer_determinant(rows) == fraction_determinant(rows)


@given(st.lists(st.lists(small_ints, min_size=3, max_size=3), min_size=3, max_size=3))
def test_charpoly_matches_eigenvalue_expansion(rows):
    ours = characteristic_polynomial(rows)
    ref = np.poly(np.array(rows, dtype=float))
    assert np.allclose(ours, ref, atol=1e-6)


def test_non_unimodular_rejected_with_determinant():
    with pytest.raises(ValueError, match="determinant = 2"):
        ToralAutomorphism(((2, 0), (0, 1)))


def test_cat_map_moduli_from_quadratic_formula():
    ok, moduli = is_hyperbolic(CAT_MAP)
    assert ok
    assert np.allclose(moduli, quadratic_eigen_moduli(2, 1, 1, 1), atol=1e-12)
    assert np.allclose(moduli, [0.381966, 2.618034], atol=1e-6)


@pytest.mark.parametrize("M", [((1, 0), (0, 1)), ((0, -1), (1, 0))])
def test_identity_and_rotation_are_not_hyperbolic(M):
    assert not is_hyperbolic(ToralAutomorphism(M))[0]


def test_dims_of_cat_and_block_diag():
    assert stable_unstable_dims(CAT_MAP) == (1, 1)
    assert stable_unstable_dims(block_diag(CAT_MAP, CAT_MAP)) == (2, 2)


def test_non_hyperbolic_dims_name_the_eigenvalue():
    with pytest.raises(ValueError, match="modulus"):
        stable_unstable_dims(identity(3))


@given(unimodular_2x2())
def test_spectral_inversion_swaps_dims(M):
    if not is_hyperbolic(M)[0]:
        return
    s, u = stable_unstable_dims(M)
    assert stable_unstable_dims(M.inverse()) == (u, s)
    assert (M @ M.inverse()).entries == identity(2).entries


def test_gluing_conjugacy_examples():
    D = ToralAutomorphism(((1, 1), (0, 1)))
    C = D @ CAT_MAP @ D.inverse()
    assert check_gluing_conjugacy(CAT_MAP, CAT_MAP, identity(2))
    assert not check_gluing_conjugacy(CAT_MAP, CAT_MAP @ CAT_MAP, identity(2))
    assert check_gluing_conjugacy(CAT_MAP, C, D)
    # hand-multiplied D B D^-1 for D = [[1,1],[0,1]]
    assert C.entries == ((3, -1), (1, 0))
    with pytest.raises(ValueError):
        check_gluing_conjugacy(CAT_MAP, identity(3), identity(2))


@given(unimodular_2x2(), unimodular_2x2())
def test_conjugate_matrices_share_charpoly(B, D):
    C = D @ B @ D.inverse()
    assert check_gluing_conjugacy(B, C, D)
    assert C.charpoly() == B.charpoly()


def test_suspension_examples():
    p = suspension_flow(SuspensionPoint((0.3, 0.7), 0.2), 0.5, CAT_MAP)
    assert np.allclose(p.x, (0.3, 0.7)) and p.s == pytest.approx(0.7)
    x = (0.1, 0.25)
    q = suspension_flow(SuspensionPoint(x, 0.0), 1.0, CAT_MAP)
    assert np.allclose(q.x, CAT_MAP.act(np.array(x))) and q.s == 0.0
    r = suspension_flow(SuspensionPoint(x, 0.5), -0.5, CAT_MAP)
    assert np.allclose(r.x, x) and r.s == 0.0


def test_flow_additivity_on_random_samples():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(1000):
        p = SuspensionPoint(tuple(rng.random(2)), float(rng.random()))
        t1, t2 = rng.uniform(-2, 2, 2)
        a = suspension_flow(suspension_flow(p, t1, CAT_MAP), t2, CAT_MAP)
        b = suspension_flow(p, t1 + t2, CAT_MAP)
        ds = abs(a.s - b.s)
        worst = max(worst, torus_distance(a.x, b.x), min(ds, 1 - ds))
    assert worst < 1e-12


def test_rate_check_cat_cat_gives_exact_eigenrate():
    rep = fiberwise_rate_check(CAT_MAP, CAT_MAP, 5.0)
    lam = (3 - math.sqrt(5)) / 2
    assert rep.passed
    assert rep.contraction_rate == pytest.approx(lam, rel=1e-6)
    assert rep.C_adapted == pytest.approx(1.0, rel=1e-6)
    assert rep.dim_stable + rep.dim_unstable == 2


def test_zero_vector_passes_and_unstable_forward_is_growth():
    assert growth_check(CAT_MAP, np.zeros(2), 5.0)[0]
    P, _ = real_eigenbasis(CAT_MAP)
    ok, _, lam, offending = growth_check(CAT_MAP, P[:, 1], 5.0)
    assert not ok and lam > 1 and offending is not None


def test_stable_frame_stays_in_stable_space():
    P, _ = real_eigenbasis(CAT_MAP)
    vs, vu = P[:, 0], P[:, 1]
    for n in range(1, 6):
        w = CAT_MAP.power(n).matrix @ vs
        coords = np.linalg.solve(P, w)
        assert abs(coords[1]) < 1e-12 * np.linalg.norm(w) + 1e-12


def test_section_return_map_is_block_product_and_semigroup():
    R = section_return_map(CAT_MAP, CAT_MAP)
    assert R.entries == block_diag(CAT_MAP, CAT_MAP).entries
    assert section_return_map(CAT_MAP, CAT_MAP, periods=2).entries == (R @ R).entries
    with pytest.raises(ValueError):
        section_return_map(CAT_MAP, identity(2))


def test_matrix_file_roundtrip(tmp_path):
    M = block_diag(CAT_MAP, CAT_MAP)
    write_matrix(tmp_path / "m.txt", M)
    assert read_matrix(tmp_path / "m.txt") == M
    (tmp_path / "bad.txt").write_text("2\n1 2 3\n")
    with pytest.raises(ValueError):
        read_matrix(tmp_path / "bad.txt")


@settings(max_examples=30)
@given(st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True), st.floats(-3, 3))
def test_suspension_coordinate_stays_in_unit_interval(x, s, t):
    q = suspension_flow(SuspensionPoint((x, x), s), t, CAT_MAP)
    assert 0.0 <= q.s < 1.0
    assert all(0.0 <= v < 1.0 for v in q.x)


@pytest.mark.parametrize("M", [identity(3), ToralAutomorphism(((1, 1), (0, 1))),
                               block_diag(ToralAutomorphism(((1, 1), (0, 1))), ToralAutomorphism(((1, 1), (0, 1))))])
def test_repeated_unit_eigenvalues_are_not_smeared_into_hyperbolicity(M):
    ok, moduli = is_hyperbolic(M)
    assert not ok
    assert np.allclose(moduli, 1.0, atol=1e-12)


def test_squarefree_factors_multiply_back():
    from anosov_forge.toral_dynamics import squarefree_decomposition
    f = np.polymul(np.polymul([1, -1], [1, -1]), [1, -3, 1])
    parts = squarefree_decomposition([int(c) for c in f])
    prod = np.array([1.0])
    for g, k in parts:
        for _ in range(k):
            prod = np.polymul(prod, g)
    assert np.allclose(prod, f)
    assert sorted(k for _, k in parts) == [1, 2]
