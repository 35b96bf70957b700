"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``ACn PASS|FAIL ...`` line before asserting.
"""

import math
import time

import numpy as np
import pytest

from anosov_forge import cli, cone_engine as ce, fw3d, hyperbolic_plane as hp, surgery as sg
from anosov_forge.da_flow import (
    D_P, BumpProfile, DADomain, da_jacobian, da_vector_field, integrate_da, integrate_da_with_jacobian,
    scan_grid,
)
from anosov_forge.obstruction import (
    SlopePath, circle_leaf_contradiction, eigen_slopes, fiberwise_obstruction_report, find_rational_crossing,
)
from anosov_forge.toral_dynamics import CAT_MAP, ToralAutomorphism, block_diag, write_matrix
from oracles import central_difference, first_companion_with_dims


@pytest.fixture
def line(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\nAC{n} {'PASS' if ok else 'FAIL'} {detail}")
        return ok
    return emit


@pytest.fixture(scope="module")
def dom():
    return DADomain(BumpProfile(0.05))


def test_ac01_xi_positive(line):
    t = time.perf_counter()
    r = scan_grid(DADomain(BumpProfile(0.05)), 400)
    dt = time.perf_counter() - t
    assert line(1, r.xi > 0 and dt < 10, f"xi = {r.xi:.6g} runtime = {dt:.2f}s")


def test_ac02_c_below_delta_independent_bound(line):
    bars = [BumpProfile(d).c_bar for d in (0.2, 0.1, 0.05)]
    r = scan_grid(DADomain(BumpProfile(0.05)), 400)
    spread = max(bars) - min(bars)
    ok = r.c_max < r.c_bar and r.c_bar - r.c_max > 0 and spread <= 1e-12
    assert line(2, ok, f"c_max = {r.c_max:.6g} c_bar = {r.c_bar:.12g} margin = {r.c_bar - r.c_max:.4g} "
                       f"spread = {spread:.2g}")


def test_ac03_cone_inequalities(line, dom):
    t = time.perf_counter()
    p = dom.profile
    pts = ce.sample_domain(dom, 0.3, D_P, 10000)
    sig, c = da_jacobian(p, pts[:, 0], pts[:, 1])
    l, r = -p.c_bar, p.c_bar
    first = sig * r + c + r > 0
    second = l < -c / (sig + 1)
    dt = time.perf_counter() - t
    ok = len(pts) == 10000 and first.all() and second.all() and dt < 30
    assert line(3, ok, f"first = {first.mean():.2%} second = {second.mean():.2%} runtime = {dt:.2f}s")


def test_ac04_eventual_expansion(line, dom):
    p = dom.profile
    rng = np.random.default_rng(0)
    pts = ce.sample_domain(dom, 0.3, D_P, 1000)
    a = rng.uniform(-p.c_bar, p.c_bar, 1000)
    v = np.stack([a, np.ones_like(a)], -1)
    flow = ce.da_flow_with_derivative(p)
    violations, worst = 0, np.inf
    for t, (_, M) in zip((1.0, 2.0, 5.0), flow.flow_and_derivative(pts, [1.0, 2.0, 5.0])):
        w = np.einsum("nij,nj->ni", M, v)
        ratio2 = np.sum(w * w, -1) / np.sum(v * v, -1)
        bound = math.exp(2 * t) / (p.c_bar ** 2 + 1)
        violations += int(np.sum(ratio2 < bound))
        worst = min(worst, float(np.min(ratio2 / bound)))
    assert line(4, violations == 0, f"violations = {violations} min ratio/bound = {worst:.6g}")


def test_ac05_product_flow_in_chart(line):
    rng = np.random.default_rng(1)
    s, u = rng.uniform(-0.01, 0.01, (2, 1000))
    tau, t = rng.uniform(-1, 1, 1000), rng.uniform(-3, 3, 1000)
    worst = max(hp.product_flow_check(hp.LocalProductCoords(*z), tt) for z, tt in zip(zip(s, u, tau), t))
    assert line(5, worst < 1e-8, f"max residual = {worst:.3g} over 1000 points")


def test_ac06_u_set_equivariance(line):
    rng = np.random.default_rng(2)
    frames = hp.random_frames(rng, 100)
    eps = 0.3
    flow_worst, flip_worst, outside = 0.0, 0.0, 0
    for f in frames:
        for t in (0.1, 0.5, 1.0):
            src = hp.u_set_frames(hp.build_U_set(f, eps * math.exp(-t) / 2, samples_per_curve=16, n_levels=2))
            moved, target = src @ hp.a_mat(t), f @ hp.a_mat(t)
            flow_worst = max(flow_worst, float(np.max(hp.distance_to_U(target, moved))))
            outside += int(np.sum(hp.tube_distance(target, moved)[0] > eps))
        A = hp.u_set_frames(hp.build_U_set(f, eps, samples_per_curve=16, n_levels=2)) @ hp.FLIP
        B = hp.u_set_frames(hp.build_U_set(f @ hp.FLIP, eps, samples_per_curve=16, n_levels=2))
        flip_worst = max(flip_worst, hp.one_sided_hausdorff(A, B), hp.one_sided_hausdorff(B, A))
    ok = flow_worst < 1e-8 and outside == 0 and flip_worst < 1e-8
    assert line(6, ok, f"flow = {flow_worst:.3g} (outside eps: {outside}) flip = {flip_worst:.3g}")


def test_ac07_obstruction_verdicts(line):
    v = fiberwise_obstruction_report(CAT_MAP, True)
    su, ss = eigen_slopes(CAT_MAP)
    sigma_t0 = SlopePath.linear(su, ss)(v.witness["t0"])
    target = v.witness["p"] / v.witness["q"]
    C = first_companion_with_dims(4, (1, 3))
    v4 = fiberwise_obstruction_report(ToralAutomorphism(C), True)
    vb = fiberwise_obstruction_report(block_diag(CAT_MAP, CAT_MAP), True)
    ok = (v.verdict == "impossible_d2" and abs(sigma_t0 - target) < 1e-9 and target == 0
          and v4.verdict == "impossible_dims" and vb.verdict == "not_obstructed")
    assert line(7, ok, f"cat = {v.verdict} |sigma(t0)| = {abs(sigma_t0):.2g} dims(1,3) = {v4.verdict} "
                       f"cat+cat = {vb.verdict}")


def test_ac08_circle_leaf_witness(line):
    val = circle_leaf_contradiction(1, math.exp(-1), 0.1)
    err = abs(val - math.log(10))
    assert line(8, err < 1e-12, f"value = {val:.15g} error = {err:.2g}")


def test_ac09_surgery_certificate(line):
    p = BumpProfile(0.05)
    field_ = sg.boundary_line_field(sg.boundary_sample(p, p.delta / 4, 10000))
    flip, _ = sg.transversality_certificate(field_, "flip")
    ident, _ = sg.transversality_certificate(field_, "identity")
    ok = flip["theta_min"] > 0 and flip["pass"] and ident["theta_min"] < 1e-6
    assert line(9, ok, f"flip theta_min = {flip['theta_min']:.3g} identity theta_min = {ident['theta_min']:.3g} "
                       f"samples = {flip['samples']}")


def test_ac10_fw3d_pipeline(line):
    t = time.perf_counter()
    m = fw3d.DAMap2D(CAT_MAP, 1.2 * math.log(1 / ((3 - math.sqrt(5)) / 2)), r_support=0.2)
    numeric, _ = m.repeller_spectrum()
    split = fw3d.nonwandering_split(m)
    trace = fw3d.boundary_foliation_trace(m, r_tube=0.05)
    quarter, _ = fw3d.quarter_turn_transversality(trace, "quarter_turn")
    ident, _ = fw3d.quarter_turn_transversality(trace, "identity")
    dt = time.perf_counter() - t
    ok = (numeric.min() > 1 and split.stable and quarter["theta_min"] > 0 and quarter["pass"]
          and ident["theta_min"] < 1e-6 and dt < 60)
    assert line(10, ok, f"moduli = {numeric.round(4).tolist()} hausdorff = {split.hausdorff:.3g} "
                        f"quarter theta_min = {quarter['theta_min']:.3g} identity = {ident['theta_min']:.3g} "
                        f"runtime = {dt:.1f}s")


def test_ac11_gradient_checks(line, dom):
    rng = np.random.default_rng(3)
    p = dom.profile

    def rel(A, F):
        return float(np.max(np.abs(A - F) / np.maximum(1.0, np.abs(A))))

    pts = rng.uniform(-0.05, 0.05, (1000, 2))
    field_err = 0.0
    for s, u in pts:
        J = central_difference(lambda z: np.array(da_vector_field(p, z[0], z[1]), float), (s, u), h=1e-7)
        sig, c = da_jacobian(p, s, u)
        field_err = max(field_err, rel(np.array([[-sig, -c], [0.0, 1.0]]), J))
    flow = ce.da_flow_with_derivative(p)
    flow_err = rel(flow.derivative(pts, 0.5), flow.fd_derivative(pts, 0.5))
    m = fw3d.DAMap2D(CAT_MAP, 1.2 * math.log((3 + math.sqrt(5)) / 2))
    X = rng.uniform(-0.25, 0.25, (1000, 2))
    map_err = rel(m.jacobian(X), m.fd_jacobian(X))
    worst = max(field_err, flow_err, map_err)
    assert line(11, worst < 1e-5, f"field = {field_err:.2g} flow = {flow_err:.2g} fw3d map = {map_err:.2g}")


def test_ac12_determinism(line, tmp_path):
    write_matrix(tmp_path / "cat.txt", CAT_MAP)
    configs = {
        "hyperbolicity": "matrix = cat.txt\n",
        "obstruction": "matrix = cat.txt\n",
        "suspension-rates": "matrix_b = cat.txt\nmatrix_a = cat.txt\nt_max = 5\n",
        "da-scan": "delta = 0.05\ngrid = 100\n",
        "cone-certify": "delta = 0.05\nn_points = 1000\nn_flow = 200\n",
        "surgery-certify": "delta = 0.05\nsamples = 2000\n",
        "fw3d": "matrix = cat.txt\nresolution = 200\niterations = 5\n",
    }
    differing = []
    for exp, text in configs.items():
        (tmp_path / f"{exp}.cfg").write_text(text)
        outs = []
        for k in range(2):
            out = tmp_path / f"{exp}-{k}"
            cli.main([exp, "--config", str(tmp_path / f"{exp}.cfg"), "--out", str(out), "--seed", "11"])
            outs.append({f.name: f.read_bytes() for f in sorted(out.iterdir())})
        if outs[0] != outs[1] or "error.txt" in outs[0]:
            differing.append(exp)
    n_files = sum(1 for _ in tmp_path.glob("*-0/*"))
    assert line(12, not differing, f"experiments = {len(configs)} files = {n_files} differing = {differing or 'none'}")
