"""Unit tangent bundle of the hyperbolic plane as PSL(2, R).

A frame is a 2x2 matrix ``g`` of determinant one, modulo sign. The identity
is the frame at ``i`` pointing straight up; ``g`` is the frame ``g . (i, up)``
under the Moebius action. The geodesic flow is right multiplication by
``a_t = diag(e^{t/2}, e^{-t/2})`` and the flip is right multiplication by
``k = [[0, 1], [-1, 0]]``.

All functions accept stacks of shape ``(..., 2, 2)``.
"""

from dataclasses import dataclass
import math

import numpy as np

ID = np.eye(2)
FLIP = np.array([[0.0, 1.0], [-1.0, 0.0]])

# orthonormal Lie algebra basis for the Sasaki metric: flow, transverse, fiber
GEN_FLOW = np.array([[0.5, 0.0], [0.0, -0.5]])
GEN_TRANSVERSE = np.array([[0.0, 0.5], [0.5, 0.0]])
GEN_FIBER = np.array([[0.0, 0.5], [-0.5, 0.0]])
E_SS = (GEN_TRANSVERSE + GEN_FIBER) / math.sqrt(2)
E_UU = (GEN_TRANSVERSE - GEN_FIBER) / math.sqrt(2)


def _stack(a, b, c, d):
    a, b, c, d = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (a, b, c, d)))
    return np.stack([np.stack([a, b], -1), np.stack([c, d], -1)], -2)


def a_mat(t):
    t = np.asarray(t, dtype=float)
    z = np.zeros_like(t)
    return _stack(np.exp(t / 2), z, z, np.exp(-t / 2))


def k_mat(theta):
    """Rotation at ``i``; turns the vector counterclockwise by ``2 theta``."""
    c, s = np.cos(theta), np.sin(theta)
    return _stack(c, s, -s, c)


def n_mat(s):
    s = np.asarray(s, dtype=float)
    return _stack(np.ones_like(s), s, np.zeros_like(s), np.ones_like(s))


def nbar_mat(u):
    u = np.asarray(u, dtype=float)
    return _stack(np.ones_like(u), np.zeros_like(u), u, np.ones_like(u))


def hperp_mat(r):
    """Translation by ``r`` along the geodesic through ``i`` orthogonal to the imaginary axis."""
    r = np.asarray(r, dtype=float)
    return _stack(np.cosh(r / 2), np.sinh(r / 2), np.sinh(r / 2), np.cosh(r / 2))


def det(g):
    return g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]


def inv(g):
    return _stack(g[..., 1, 1], -g[..., 0, 1], -g[..., 1, 0], g[..., 0, 0]) / det(g)[..., None, None]


def renormalize(g):
    """Rescale to determinant one and pick the sign with ``(g00, g10)`` lexicographically positive."""
    g = np.asarray(g, dtype=float)
    dt = det(g)
    if np.any(dt <= 0):
        raise ValueError("frame matrix must have positive determinant")
    g = g / np.sqrt(dt)[..., None, None]
    a, c = g[..., 0, 0], g[..., 1, 0]
    neg = (a < 0) | ((a == 0) & (c < 0))
    return np.where(neg[..., None, None], -g, g)


def base_point(g):
    a, b, c, d = g[..., 0, 0], g[..., 0, 1], g[..., 1, 0], g[..., 1, 1]
    return (a * 1j + b) / (c * 1j + d)


def vector_angle(g):
    """Angle of the unit vector at the base point, measured from the real axis."""
    c, d = g[..., 1, 0], g[..., 1, 1]
    return np.angle(1.0 / (c * 1j + d) ** 2) + np.pi / 2


def hyperbolic_distance(z1, z2):
    z1, z2 = np.asarray(z1), np.asarray(z2)
    x = 1 + np.abs(z1 - z2) ** 2 / (2 * z1.imag * z2.imag)
    return np.arccosh(np.maximum(x, 1.0))


@dataclass(frozen=True)
class UnitTangentFrame:
    g: tuple

    @classmethod
    def from_matrix(cls, m):
        m = renormalize(np.asarray(m, dtype=float))
        if base_point(m).imag <= 0:
            raise ValueError("base point left the upper half-plane")
        return cls(tuple(float(x) for x in m.ravel()))

    @classmethod
    def identity(cls):
        return cls.from_matrix(ID)

    @property
    def matrix(self):
        return np.array(self.g).reshape(2, 2)

    @property
    def base(self):
        return complex(base_point(self.matrix))

    @property
    def angle(self):
        return float(vector_angle(self.matrix))

    def ideal_endpoints(self):
        """``(v_plus, v_minus)``: forward and backward endpoints on the boundary (``inf`` allowed)."""
        a, b, c, d = self.g
        vp = math.inf if c == 0 else a / c
        vm = math.inf if d == 0 else b / d
        return vp, vm

    def to_text(self):
        return " ".join(repr(x) for x in self.g)

    @classmethod
    def from_text(cls, text):
        vals = [float(x) for x in text.split()]
        if len(vals) != 4:
            raise ValueError("a frame is four reals")
        return cls.from_matrix(np.array(vals).reshape(2, 2))


def _as_matrix(f):
    return f.matrix if isinstance(f, UnitTangentFrame) else np.asarray(f, dtype=float)


def _wrap(f, out):
    return UnitTangentFrame.from_matrix(out) if isinstance(f, UnitTangentFrame) else renormalize(out)


def geodesic_flow_h2(f, t):
    return _wrap(f, _as_matrix(f) @ a_mat(t))


def flip_map(f):
    return _wrap(f, _as_matrix(f) @ FLIP)


def sasaki_distance(g1, g2):
    """``sqrt(d_H^2 + theta^2)`` with ``theta`` the angle between ``g2`` and the
    parallel transport of ``g1`` along the connecting geodesic."""
    h = inv(_as_matrix(g1)) @ _as_matrix(g2)
    q = base_point(h)
    dh = hyperbolic_distance(1j, q)
    psi = np.angle((q - 1j) / (q + 1j))
    transport = k_mat(psi / 2) @ a_mat(dh) @ k_mat(-psi / 2)
    r = inv(transport) @ h
    theta = 2 * np.arctan2(r[..., 0, 1], r[..., 0, 0])
    theta = np.mod(theta + np.pi, 2 * np.pi) - np.pi
    return np.sqrt(dh ** 2 + theta ** 2)


def _golden_min(fun, lo, hi, iters=80):
    invphi = (math.sqrt(5) - 1) / 2
    a, b = np.array(lo, dtype=float), np.array(hi, dtype=float)
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(iters):
        left = fc < fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        c_new = b - invphi * (b - a)
        d_new = a + invphi * (b - a)
        c, d = np.where(left, c_new, d), np.where(left, c, d_new)
        f_new = fun(np.where(left, c, d))
        fc, fd = np.where(left, f_new, fd), np.where(left, fc, f_new)
    x = 0.5 * (a + b)
    return x, fun(x)


def tube_distance(f, g):
    """Sasaki distance from ``g`` to the flowline of ``f``; returns ``(distance, tau)``."""
    h = inv(_as_matrix(f)) @ _as_matrix(g)
    tau0 = np.log(base_point(h).imag)
    tau, dist = _golden_min(lambda tau: sasaki_distance(a_mat(tau), h), tau0 - 3.0, tau0 + 3.0)
    return dist, tau


def u_residual(f, g):
    """``|a - d|`` of ``f^{-1} g``: zero exactly on the disc ``U_f``."""
    h = renormalize(inv(_as_matrix(f)) @ _as_matrix(g))
    return np.abs(h[..., 0, 0] - h[..., 1, 1])


# chart on U_id: h(s, u) = [[1, s], [u, 1]] / sqrt(1 - su)


def chart_matrix(s, u):
    s, u = np.asarray(s, dtype=float), np.asarray(u, dtype=float)
    if np.any(s * u >= 1):
        raise ValueError("chart requires s*u < 1")
    return _stack(1.0, s, u, 1.0) / np.sqrt(1 - s * u)[..., None, None]


def distance_to_U(f, g):
    """Upper bound on the Sasaki distance from ``g`` to the disc ``U_f`` (untruncated)."""
    h = renormalize(inv(_as_matrix(f)) @ _as_matrix(g))
    s = h[..., 0, 1] / h[..., 0, 0]
    u = h[..., 1, 0] / h[..., 1, 1]
    return sasaki_distance(h, chart_matrix(s, u))


@dataclass
class CurveFamilySample:
    kind: str
    t: float
    params: np.ndarray
    frames: np.ndarray
    generator: np.ndarray  # Z with frames = origin @ exp(param * Z)
    origin: np.ndarray

    def base_tangent(self):
        """Analytic tangent of the base curve as a complex number."""
        (p, q), (r, _) = self.generator
        w = base_point(inv(self.origin) @ self.frames)
        c, d = self.origin[1]
        # Moebius vector field of Z, pushed forward by the origin frame
        return (q + 2 * p * w - r * w ** 2) / (c * w + d) ** 2

    def orthogonality_defect(self):
        """Max ``|cos|`` of the angle between frame vectors and base tangents."""
        tan = self.base_tangent()
        vec = np.exp(1j * vector_angle(self.frames))
        mask = np.abs(tan) > 1e-12
        if not mask.any():
            return 0.0
        return float(np.max(np.abs((vec[mask] * np.conj(tan[mask])).real) / np.abs(tan[mask])))


def _family(f, kind, t, params, gen_id, builder):
    frames = renormalize(f @ builder(params))
    return CurveFamilySample(kind, float(t), np.asarray(params), frames, gen_id, f)


TRUNCATION_SLACK = 1e-12


def build_U_set(f, eps, samples_per_curve=64, n_levels=8, t_max=2.0):
    """Sampled curve families of ``U_{f, eps}``, truncated by tube distance to the flowline.

    ``circle(t)`` frames point towards ``g^t(f)``'s base point; ``equidistant(t)``
    frames lie at distance ``|t|`` from the geodesic through ``g^t(f)`` orthogonal
    to the flow. Families with ``t`` use ``n_levels`` values on each side of zero.
    """
    if not 0 < eps < math.pi:
        raise ValueError(f"eps = {eps} outside (0, pi)")
    f = _as_matrix(f)
    n = samples_per_curve
    reach = math.sinh(eps) * 1.05
    out = [
        _family(f, "fiber", 0.0, np.linspace(-eps / 2, eps / 2, n), GEN_FIBER * 2, k_mat),
        _family(f, "stable_horocycle", 0.0, np.linspace(-reach, reach, n),
                np.array([[0.0, 1.0], [0.0, 0.0]]), n_mat),
        _family(f, "unstable_horocycle", 0.0, np.linspace(-reach, reach, n),
                np.array([[0.0, 0.0], [1.0, 0.0]]), nbar_mat),
    ]
    levels = np.linspace(t_max / n_levels, t_max, n_levels)
    for t in np.concatenate([-levels[::-1], levels]):
        at, amt = a_mat(t), a_mat(-t)
        # circle of radius |t|: arc length s maps to rotation angle s / (2 sinh|t|)
        half = min(math.pi / 2, reach / (2 * math.sinh(abs(t))))
        th = np.linspace(-half, half, n)
        gen = at @ (2 * GEN_FIBER) @ amt
        out.append(_family(f, "circle", t, th, gen, lambda x, at=at, amt=amt: at @ k_mat(x) @ amt))
        rr = np.linspace(-reach, reach, n) / math.cosh(t)
        gen = at @ GEN_TRANSVERSE @ amt
        out.append(_family(f, "equidistant", t, rr, gen, lambda x, at=at, amt=amt: at @ hperp_mat(x) @ amt))
    kept = []
    dists = np.split(tube_distance(f, np.concatenate([fam.frames for fam in out]))[0],
                     np.cumsum([len(fam.params) for fam in out])[:-1])
    for fam, dist in zip(out, dists):
        keep = dist <= eps + TRUNCATION_SLACK  # fiber endpoints sit exactly at eps
        if keep.any():
            kept.append(CurveFamilySample(fam.kind, fam.t, fam.params[keep], fam.frames[keep],
                                          fam.generator, fam.origin))
    return kept


def u_set_frames(samples):
    return np.concatenate([fam.frames for fam in samples], axis=0)


def one_sided_hausdorff(A, B, chunk=256):
    """``max_a min_b sasaki(a, b)`` over two stacks of frames."""
    best = np.empty(len(A))
    for i in range(0, len(A), chunk):
        d = sasaki_distance(A[i:i + chunk, None], B[None])
        best[i:i + chunk] = d.min(axis=1)
    return float(best.max())


def hausdorff(A, B):
    return max(one_sided_hausdorff(A, B), one_sided_hausdorff(B, A))


def write_curve_csv(path, samples):
    from .reports import write_csv
    rows = []
    for fam in samples:
        for p, g in zip(fam.params, fam.frames):
            rows.append([fam.kind, fam.t, float(p), *map(float, g.ravel())])
    write_csv(path, ["kind", "t", "s", "g00", "g01", "g10", "g11"], rows)


# local product coordinates near the model SN = {a_tau} and its flip


@dataclass(frozen=True)
class LocalProductCoords:
    s: float
    u: float
    tau: float
    flipped: bool = False

    @property
    def base(self):
        """Point of the model SN: ``a_tau`` or, on the flipped orbit, ``a_{-tau} k``."""
        return UnitTangentFrame.from_matrix(sn_base(self.tau, self.flipped))


def sn_base(tau, flipped=False):
    flipped = np.asarray(flipped, dtype=bool)
    return np.where(flipped[..., None, None], a_mat(-np.asarray(tau)) @ FLIP, a_mat(tau))


def coords_to_matrix(s, u, tau, flipped=False):
    return renormalize(sn_base(tau, flipped) @ chart_matrix(s, u))


def coords_from_matrix(g, flipped=None):
    """``(s, u, tau, flipped)`` arrays; picks the branch with the smaller ``|s| + |u|`` when not given."""
    g = renormalize(_as_matrix(g))
    a, b, c, d = g[..., 0, 0], g[..., 0, 1], g[..., 1, 0], g[..., 1, 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        r0 = a / d
        s0, u0, tau0 = b / a, c / d, np.log(np.where(r0 > 0, r0, np.nan))
        # flipped branch: g = a_{-tau} k h  =>  e^{-tau} = -b/c, s = d/c, u = a/b
        r1 = -b / c
        s1, u1, tau1 = d / c, a / b, -np.log(np.where(r1 > 0, r1, np.nan))
    size0 = np.where(np.isfinite(tau0), np.abs(s0) + np.abs(u0), np.inf)
    size1 = np.where(np.isfinite(tau1), np.abs(s1) + np.abs(u1), np.inf)
    use1 = size1 < size0 if flipped is None else np.full(np.shape(a), bool(flipped))
    s = np.where(use1, s1, s0)
    u = np.where(use1, u1, u0)
    tau = np.where(use1, tau1, tau0)
    return s, u, tau, use1


def local_coords(f, eps=0.3):
    g = _as_matrix(f)
    s, u, tau, fl = coords_from_matrix(g)
    if not np.isfinite(tau) or max(abs(s), abs(u)) > eps:
        raise ValueError(f"frame outside the chart: |s|, |u| = {abs(s):.4g}, {abs(u):.4g} vs eps = {eps}")
    return LocalProductCoords(float(s), float(u), float(tau), bool(fl))


def product_flow_check(z, t, eps=0.3):
    """Residual between chart coordinates of the flowed frame and ``(e^-t s, e^t u, tau + t)``."""
    g = coords_to_matrix(z.s, z.u, z.tau, z.flipped) @ a_mat(t)
    s_exp, u_exp = z.s * math.exp(-t), z.u * math.exp(t)
    if max(abs(s_exp), abs(u_exp)) > eps:
        raise ValueError(f"flowed point leaves the chart at t = {t}")
    s, u, tau, _ = coords_from_matrix(g, flipped=z.flipped)
    return float(max(abs(s - s_exp), abs(u - u_exp), abs(tau - (z.tau + t))))


def flip_coords(z):
    """The flip in coordinates: ``(s, u) -> (-u, -s)`` onto the other orbit of SN."""
    return LocalProductCoords(-z.u, -z.s, -z.tau, not z.flipped)


def chart_tangents(s, u, tau=0.0, flipped=False, h=1e-6):
    """Left-invariant components of ``d/ds`` and ``d/du`` in the (flow, transverse, fiber) basis."""
    g = coords_to_matrix(s, u, tau, flipped)
    gi = inv(g)
    out = []
    for ds, du in ((h, 0.0), (0.0, h)):
        dg = (coords_to_matrix(s + ds, u + du, tau, flipped) - coords_to_matrix(s - ds, u - du, tau, flipped)) / (2 * h)
        X = gi @ dg
        out.append(np.stack([2 * X[..., 0, 0], X[..., 0, 1] + X[..., 1, 0], X[..., 0, 1] - X[..., 1, 0]], -1))
    return out


def chart_axis_angle(s, u, tau=0.0, flipped=False):
    """Sasaki angle between the images of the ``s`` and ``u`` axes at chart points."""
    vs, vu = chart_tangents(s, u, tau, flipped)
    cos = np.sum(vs * vu, -1) / (np.linalg.norm(vs, axis=-1) * np.linalg.norm(vu, axis=-1))
    return np.arccos(np.clip(np.abs(cos), 0, 1))


def random_frames(rng, n, spread=1.0):
    """Frames ``n(x) a(log y) k(theta)`` with ``x, log y`` normal of scale ``spread``, theta uniform."""
    x = rng.normal(scale=spread, size=n)
    ly = rng.normal(scale=spread, size=n)
    th = rng.uniform(0, np.pi, size=n)
    return renormalize(n_mat(x) @ a_mat(ly) @ k_mat(th))
