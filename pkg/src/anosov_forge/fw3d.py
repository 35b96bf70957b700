"""Three-dimensional DA pipeline on the suspension of a hyperbolic 2-torus map.

The deformation pushes along the stable eigendirection inside a small disc,
so the linear stable foliation survives and the fixed point becomes a
repeller. Suspending and drilling out the repelling orbit leaves a boundary
torus carrying the trace of the weak stable foliation.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange
from scipy.optimize import minimize
from scipy.spatial import cKDTree

from .toral_dynamics import ToralAutomorphism, is_hyperbolic

TWO_PI = 2.0 * math.pi


def bump(x):
    """Standard bump: 1 at the origin, 0 for ``|x| >= 1``."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1.0
    xi = x[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - xi * xi))
    return out


@njit(cache=True)
def _rho(x):
    if x >= 1.0:
        return 0.0, 0.0
    d = 1.0 - x * x
    v = math.exp(1.0 - 1.0 / d)
    return v, -v * 2.0 * x / (d * d)


@njit(cache=True)
def _g(xs, xu, mu, r):
    R = math.sqrt(xs * xs + xu * xu)
    v, dv = _rho(R / r)
    g = mu * v * xs
    if R > 0.0:
        gs = mu * v + mu * dv * xs * xs / (R * r)
        gu = mu * dv * xs * xu / (R * r)
    else:
        gs, gu = mu * v, 0.0
    return g, gs, gu


@njit(cache=True, parallel=True)
def _deform(xs0, xu, mu, r, t, n_steps):
    """RK4 of the stable push and its variational equation, per point.

    Returns ``(xs, a, b)`` where the derivative is ``[[a, b], [0, 1]]``.
    """
    n = xs0.shape[0]
    XS = xs0.copy()
    A = np.ones(n)
    B = np.zeros(n)
    h = t / n_steps
    for i in prange(n):
        xs, a, b, u = xs0[i], 1.0, 0.0, xu[i]
        if xs * xs + u * u >= r * r:
            continue
        for _ in range(n_steps):
            g1, s1, u1 = _g(xs, u, mu, r)
            k1, l1, m1 = g1, s1 * a, s1 * b + u1
            g2, s2, u2 = _g(xs + 0.5 * h * k1, u, mu, r)
            k2, l2, m2 = g2, s2 * (a + 0.5 * h * l1), s2 * (b + 0.5 * h * m1) + u2
            g3, s3, u3 = _g(xs + 0.5 * h * k2, u, mu, r)
            k3, l3, m3 = g3, s3 * (a + 0.5 * h * l2), s3 * (b + 0.5 * h * m2) + u3
            g4, s4, u4 = _g(xs + h * k3, u, mu, r)
            k4, l4, m4 = g4, s4 * (a + h * l3), s4 * (b + h * m3) + u4
            xs += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            a += h / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4)
            b += h / 6.0 * (m1 + 2.0 * m2 + 2.0 * m3 + m4)
        XS[i], A[i], B[i] = xs, a, b
    return XS, A, B


@njit(cache=True, parallel=True)
def _iterate(X, n_iter, A, E, Einv, p, mu, r, n_steps):
    """``n_iter`` applications of the DA torus map, fused per point."""
    out = X.copy()
    h = 1.0 / n_steps
    for i in prange(X.shape[0]):
        x0, x1 = out[i, 0], out[i, 1]
        for _ in range(n_iter):
            d0, d1 = x0 - p[0], x1 - p[1]
            k0, k1 = np.round(d0), np.round(d1)
            d0 -= k0
            d1 -= k1
            xs = Einv[0, 0] * d0 + Einv[0, 1] * d1
            xu = Einv[1, 0] * d0 + Einv[1, 1] * d1
            if xs * xs + xu * xu < r * r:
                for _s in range(n_steps):
                    k1s = _g(xs, xu, mu, r)[0]
                    k2s = _g(xs + 0.5 * h * k1s, xu, mu, r)[0]
                    k3s = _g(xs + 0.5 * h * k2s, xu, mu, r)[0]
                    k4s = _g(xs + h * k3s, xu, mu, r)[0]
                    xs += h / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s)
            y0 = p[0] + k0 + E[0, 0] * xs + E[0, 1] * xu
            y1 = p[1] + k1 + E[1, 0] * xs + E[1, 1] * xu
            x0 = A[0, 0] * y0 + A[0, 1] * y1
            x1 = A[1, 0] * y0 + A[1, 1] * y1
            x0 -= math.floor(x0)
            x1 -= math.floor(x1)
            if x0 >= 1.0:
                x0 = 0.0
            if x1 >= 1.0:
                x1 = 0.0
        out[i, 0], out[i, 1] = x0, x1
    return out


def _wrap(x):
    x = np.mod(x, 1.0)
    x[x >= 1.0] = 0.0
    return x


@dataclass(frozen=True)
class DAMap2D:
    A: ToralAutomorphism
    mu: float
    r_support: float = 0.2
    p: tuple = (0.0, 0.0)
    n_steps: int = 16

    def __post_init__(self):
        if self.A.d != 2:
            raise ValueError("DAMap2D needs a 2x2 automorphism")
        if not is_hyperbolic(self.A)[0]:
            raise ValueError("A is not hyperbolic")
        vals = np.linalg.eigvals(self.A.matrix)
        if np.any(np.abs(vals.imag) > 1e-12) or np.any(vals.real <= 0):
            raise ValueError("eigenvalues of A must be real and positive")
        fixed = self.A.matrix @ np.asarray(self.p, float) - np.asarray(self.p, float)
        if np.max(np.abs(fixed - np.round(fixed))) > 1e-12:
            raise ValueError("p is not fixed by A")
        if not 0.0 < self.r_support < 1.0 / (4.0 * self.distortion):
            raise ValueError(f"support radius {self.r_support} overlaps across the lattice")

    @property
    def _eig(self):
        vals, vecs = np.linalg.eig(self.A.matrix)
        order = np.argsort(vals.real)
        lam = vals.real[order]
        E = vecs.real[:, order]
        E = E / np.linalg.norm(E, axis=0)
        return lam, E

    @property
    def lam_s(self):
        return float(self._eig[0][0])

    @property
    def lam_u(self):
        return float(self._eig[0][1])

    @property
    def E(self):
        """Columns: unit stable and unstable eigenvectors."""
        return self._eig[1]

    @property
    def distortion(self):
        E = self._eig[1]
        return max(np.linalg.norm(E, 2), np.linalg.norm(np.linalg.inv(E), 2))

    @property
    def mu_threshold(self):
        return math.log(1.0 / self.lam_s)

    def _split(self, x):
        d = np.atleast_2d(np.asarray(x, float)) - np.asarray(self.p)
        k = np.round(d)
        xi = np.linalg.solve(self.E, (d - k).T).T
        return k, xi

    def to_eigen(self, x):
        return self._split(x)[1]

    def deform(self, xi, t=1.0):
        xi = np.atleast_2d(np.asarray(xi, float))
        xs, a, b = _deform(np.ascontiguousarray(xi[:, 0]), np.ascontiguousarray(xi[:, 1]),
                           float(self.mu), float(self.r_support), float(t), int(self.n_steps))
        return np.column_stack([xs, xi[:, 1]]), a, b

    def lift(self, x):
        """Lift of the DA map to the plane (no reduction mod 1)."""
        k, xi = self._split(x)
        xi2, _, _ = self.deform(xi)
        y = np.asarray(self.p) + k + xi2 @ self.E.T
        return y @ self.A.matrix.T

    def __call__(self, x):
        return _wrap(self.lift(x))

    def inverse(self, x):
        y = np.atleast_2d(np.asarray(x, float)) @ np.linalg.inv(self.A.matrix).T
        k, xi = self._split(y)
        xi2, _, _ = self.deform(xi, t=-1.0)
        return _wrap(np.asarray(self.p) + k + xi2 @ self.E.T)

    def jacobian(self, x):
        _, xi = self._split(x)
        _, a, b = self.deform(xi)
        J = np.zeros((len(a), 2, 2))
        J[:, 0, 0], J[:, 0, 1], J[:, 1, 1] = a, b, 1.0
        Einv = np.linalg.inv(self.E)
        return self.A.matrix @ self.E @ J @ Einv

    def fd_jacobian(self, x, h=1e-6):
        x = np.atleast_2d(np.asarray(x, float))
        cols = []
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            cols.append((self.lift(x + e) - self.lift(x - e)) / (2 * h))
        return np.stack(cols, axis=-1)

    def repeller_spectrum(self):
        """Numerical and closed-form eigenvalues of the derivative at ``p``."""
        J = self.jacobian(np.asarray(self.p))[0]
        numeric = np.sort(np.abs(np.linalg.eigvals(J)))
        expected = np.sort([self.lam_s * math.exp(self.mu), self.lam_u])
        return numeric, expected

    def iterate(self, x, n):
        """``f^n`` on an ``(N, 2)`` array of torus points; equal to ``n`` calls of the map."""
        x = np.ascontiguousarray(np.atleast_2d(np.asarray(x, float)))
        return _iterate(x, int(n), self.A.matrix.astype(float), np.ascontiguousarray(self.E),
                        np.linalg.inv(self.E), np.asarray(self.p, float), float(self.mu),
                        float(self.r_support), int(self.n_steps))

    def power(self, n):
        return _Iterate(self, int(n))


@dataclass(frozen=True)
class _Iterate:
    """``f^n`` with the ``act`` interface of a toral automorphism."""
    f: DAMap2D
    n: int

    def act(self, x):
        y = np.atleast_2d(np.asarray(x, float))
        step = self.f if self.n >= 0 else self.f.inverse
        for _ in range(abs(self.n)):
            y = step(y)
        return y[0] if np.ndim(x) == 1 else y


def suspension_transverse_rates(m):
    """Log-moduli of the monodromy of the suspended orbit ``{p} x S^1``."""
    numeric, _ = m.repeller_spectrum()
    return np.log(numeric)


# -- non-wandering set ------------------------------------------------------

@dataclass
class NonwanderingSplit:
    repeller: tuple
    attractor_sample: np.ndarray
    doubled_sample: np.ndarray
    hausdorff: float
    min_distance_to_p: float
    exclude_radius: float
    iterations: int
    tolerance: float

    @property
    def stable(self):
        return self.hausdorff < self.tolerance

    def as_dict(self):
        return {
            "repeller": self.repeller,
            "iterations": self.iterations,
            "sample_size": len(self.attractor_sample),
            "hausdorff_n_2n": self.hausdorff,
            "tolerance": self.tolerance,
            "stable": self.stable,
            "min_distance_to_p": self.min_distance_to_p,
            "exclude_radius": self.exclude_radius,
        }


def torus_hausdorff(X, Y):
    tx, ty = cKDTree(_wrap(X.copy()), boxsize=1.0), cKDTree(_wrap(Y.copy()), boxsize=1.0)
    return max(float(ty.query(X)[0].max()), float(tx.query(Y)[0].max()))


def nonwandering_split(m, iterations=15, resolution=1200, exclude_radius=None, tolerance=1e-3):
    """Iterate a grid ``n`` and ``2n`` times and compare the limit sets."""
    numeric, _ = m.repeller_spectrum()
    if numeric.min() <= 1.0:
        raise ValueError(f"p is not repelling (mu={m.mu} <= {m.mu_threshold})")
    if exclude_radius is None:
        exclude_radius = m.r_support / 20.0
    g = (np.arange(resolution) + 0.5) / resolution
    X = np.stack(np.meshgrid(g, g, indexing="xy"), axis=-1).reshape(-1, 2)
    dist = np.linalg.norm(m.to_eigen(X), axis=1)
    X = X[dist >= exclude_radius]
    X = m.iterate(X, iterations)
    Y = m.iterate(X, iterations)
    d_p = float(np.linalg.norm(m.to_eigen(Y), axis=1).min())
    return NonwanderingSplit(tuple(m.p), X, Y, torus_hausdorff(X, Y), d_p,
                             exclude_radius, iterations, tolerance)


# -- boundary torus of the drilled orbit ------------------------------------

@dataclass
class BoundaryTorus:
    """Trace line field on the boundary torus, covering coordinates ``x1 = theta/2pi``, ``x2 = tau``."""
    m: DAMap2D
    r_tube: float
    theta: np.ndarray
    tau: np.ndarray
    angle: np.ndarray  # shape (n_tau, n_theta), line angle in [0, pi) in the (x1, x2) plane

    def direction(self, x1, x2):
        return trace_direction(self.m, self.r_tube, np.asarray(x1, float) * TWO_PI, np.asarray(x2, float))

    def max_jump(self):
        def jump(a, b):
            d = np.abs(a - b) % math.pi
            return np.minimum(d, math.pi - d)
        a = self.angle
        return float(max(jump(a, np.roll(a, 1, axis=0)).max(), jump(a, np.roll(a, 1, axis=1)).max()))

    def tau_coupling(self):
        """Largest spread along ``tau`` of the trace angle at fixed ``theta``."""
        d = np.abs(self.angle - self.angle[0:1, :]) % math.pi
        return float(np.minimum(d, math.pi - d).max())

    def rows(self):
        T, H = np.meshgrid(self.theta, self.tau, indexing="xy")
        return np.column_stack([T.ravel(), H.ravel(), self.angle.ravel()])


def trace_direction(m, r_tube, theta, tau):
    """Direction ``(dx1, dx2)`` of the weak stable leaf cut by the tube boundary.

    In the suspension chart ``eta = A^tau Phi_tau(xi)`` the leaf tangent is
    spanned by the stable axis and the flow vector; the tube tangent plane has
    normal ``(cos theta, sin theta, 0)``.
    """
    theta, tau = np.broadcast_arrays(theta, tau)
    c, s = np.cos(theta), np.sin(theta)
    es, eu = r_tube * c, r_tube * s
    ls, lu = math.log(m.lam_s), math.log(m.lam_u)
    pulled = np.hypot(es * m.lam_s ** (-tau), eu * m.lam_u ** (-tau))
    rate_s = ls + m.mu * bump(pulled / m.r_support)
    Y = np.stack([rate_s * es, lu * eu, np.ones_like(es)], axis=-1)
    a = np.broadcast_to([1.0, 0.0, 0.0], Y.shape)
    n = np.stack([c, s, np.zeros_like(c)], axis=-1)
    d = np.cross(np.cross(a, Y), n)
    dtheta = (-s * d[..., 0] + c * d[..., 1]) / r_tube
    return np.stack([dtheta / TWO_PI, d[..., 2]], axis=-1)


def _line_angle(v):
    return np.mod(np.arctan2(v[..., 1], v[..., 0]), math.pi)


def boundary_foliation_trace(m, r_tube=0.05, n_theta=100, n_tau=100):
    if not 0.0 < r_tube < m.r_support:
        raise ValueError("tube radius must be positive and below the support radius")
    theta = np.arange(n_theta) * TWO_PI / n_theta
    tau = np.arange(n_tau) / n_tau
    T, H = np.meshgrid(theta, tau, indexing="xy")
    ang = _line_angle(trace_direction(m, r_tube, T, H))
    return BoundaryTorus(m, r_tube, theta, tau, ang)


# -- gluings of the boundary torus ------------------------------------------

@dataclass(frozen=True)
class TorusGluing:
    name: str
    linear: np.ndarray = field(default_factory=lambda: np.eye(2))
    shift: tuple = (0.0, 0.0)

    def __call__(self, x):
        return np.asarray(x, float) @ self.linear.T + np.asarray(self.shift)

    def inverse(self, y):
        return (np.asarray(y, float) - np.asarray(self.shift)) @ np.linalg.inv(self.linear).T

    def push(self, v):
        return np.asarray(v, float) @ self.linear.T


GLUINGS = {
    "quarter_turn": TorusGluing("quarter_turn", np.array([[0.0, 1.0], [-1.0, 0.0]])),
    "identity": TorusGluing("identity"),
    "disc_rotation": TorusGluing("disc_rotation", np.eye(2), (0.25, 0.0)),
}


def _pair_angle(u, v):
    cross = np.abs(u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0])
    dot = np.abs(np.sum(u * v, axis=-1))
    return np.arctan2(cross, dot)


def gluing_angle(trace, gluing, x):
    """Angle between the trace and the pushed-forward trace at points ``x``."""
    x = np.atleast_2d(x)
    pre = gluing.inverse(x)
    image = gluing.push(trace.direction(pre[:, 0], pre[:, 1]))
    return _pair_angle(trace.direction(x[:, 0], x[:, 1]), image)


def quarter_turn_transversality(trace, kind="quarter_turn", floor=1e-3, bins=18, refine=8):
    """Minimum angle between the trace field and its image under a gluing.

    The sampled minimum is refined by local searches from the ``refine``
    lowest samples so that grid aliasing cannot hide a tangency.
    """
    gluing = GLUINGS[kind]
    X1, X2 = np.meshgrid(trace.theta / TWO_PI, trace.tau, indexing="xy")
    pts = np.column_stack([X1.ravel(), X2.ravel()])
    angles = gluing_angle(trace, gluing, pts)
    sampled = float(angles.min())
    best, arg = sampled, pts[int(np.argmin(angles))]
    for i in np.argsort(angles)[:refine]:
        res = minimize(lambda z: float(gluing_angle(trace, gluing, z)[0]), pts[i],
                       method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 2000})
        if res.fun < best:
            best, arg = float(res.fun), np.mod(res.x, 1.0)
    hist, _ = np.histogram(angles, bins=bins, range=(0.0, math.pi / 2))
    return {
        "gluing": kind,
        "theta_min": best,
        "theta_min_sampled": sampled,
        "samples": len(angles),
        "floor": floor,
        "pass": bool(best > floor),
        "argmin": tuple(float(a) for a in arg),
        "histogram": hist.tolist(),
    }, angles


def order_four_residual(points):
    h = GLUINGS["quarter_turn"]
    y = np.asarray(points, float)
    for _ in range(4):
        y = h(y)
    return float(np.max(np.abs(y - points)))


def write_trace_csv(path, trace):
    from .reports import write_csv
    write_csv(path, ["theta", "tau", "angle"], trace.rows())


def trace_svg(trace, kind="quarter_turn", size=480, stride=4):
    """Line-field picture: solid segments for the trace, dashed for its glued image."""
    gluing = GLUINGS[kind]
    seg = 0.4 * size * stride / len(trace.theta)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
           f'viewBox="0 0 {size} {size}">',
           f'<rect width="{size}" height="{size}" fill="white" stroke="black"/>']
    for j in range(0, len(trace.tau), stride):
        for i in range(0, len(trace.theta), stride):
            x = np.array([[trace.theta[i] / TWO_PI, trace.tau[j]]])
            cx, cy = x[0, 0] * size, (1.0 - x[0, 1]) * size
            own = trace.direction(x[:, 0], x[:, 1])[0]
            pre = gluing.inverse(x)
            img = gluing.push(trace.direction(pre[:, 0], pre[:, 1]))[0]
            for v, dash in ((own, ""), (img, ' stroke-dasharray="3,2"')):
                v = v / np.linalg.norm(v) * seg / 2
                out.append(f'<line x1="{cx - v[0]:.2f}" y1="{cy + v[1]:.2f}" x2="{cx + v[0]:.2f}" '
                           f'y2="{cy - v[1]:.2f}" stroke="black" stroke-width="1"{dash}/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
