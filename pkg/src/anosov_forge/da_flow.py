"""Planar DA deformation of a hyperbolic saddle.

In product coordinates ``(s, u)`` near a periodic orbit the flow is the
saddle ``s' = -s, u' = u``. Inside the square ``|s|, |u| <= delta`` it is
replaced by ``s' = (beta(s, u) - 1) s, u' = u`` with the separable bump
``beta(s, u) = alpha(s / delta) alpha(u / delta)``. The origin becomes a
repeller and ``(+-s_bar, 0)`` become saddles.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.interpolate import make_interp_spline
from scipy.optimize import brentq, minimize_scalar

SQRT2 = math.sqrt(2.0)
T0 = 0.01


def canonical_alpha(x):
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) < 1
    xi = np.where(inside, x, 0.0)
    return np.where(inside, SQRT2 * np.exp(1 - 1 / (1 - xi ** 2)), 0.0)


def canonical_alpha_prime(x):
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) < 1
    xi = np.where(inside, x, 0.0)
    a = SQRT2 * np.exp(1 - 1 / (1 - xi ** 2))
    return np.where(inside, -a * 2 * xi / (1 - xi ** 2) ** 2, 0.0)


class TabulatedAlpha:
    """Spline through ``(x, alpha)`` samples on ``[0, 1]``, extended evenly and by zero."""

    def __init__(self, xs, ys, k=3):
        self.spline = make_interp_spline(np.asarray(xs, float), np.asarray(ys, float), k=k)
        self.dspline = self.spline.derivative()

    def __call__(self, x):
        ax = np.abs(np.asarray(x, dtype=float))
        return np.where(ax < 1, self.spline(np.minimum(ax, 1.0)), 0.0)

    def prime(self, x):
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        return np.where(ax < 1, np.sign(x) * self.dspline(np.minimum(ax, 1.0)), 0.0)


@dataclass(frozen=True)
class BumpProfile:
    delta: float
    alpha: object = canonical_alpha
    alpha_prime: object = canonical_alpha_prime
    max_alpha_prime: float = field(init=False)

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        res = minimize_scalar(lambda x: -abs(float(self.alpha_prime(x))), bounds=(0.0, 1.0),
                              method="bounded", options={"xatol": 1e-13})
        object.__setattr__(self, "max_alpha_prime", float(-res.fun))

    @classmethod
    def tabulated(cls, delta, xs, ys, k=3):
        t = TabulatedAlpha(xs, ys, k)
        return cls(delta, t, t.prime)

    @property
    def c_bar(self):
        return SQRT2 * self.max_alpha_prime

    def check(self, n=1000):
        """Qualitative profile requirements; returns a list of failures."""
        bad = []
        if abs(float(self.alpha(0.0)) - SQRT2) > 1e-12:
            bad.append("alpha(0) != sqrt(2)")
        if float(self.alpha(1.0)) != 0 or float(self.alpha(-1.0)) != 0:
            bad.append("alpha(+-1) != 0")
        x = np.linspace(0, 1, n + 2)[1:-1]
        if np.max(np.abs(self.alpha(x) - self.alpha(-x))) > 1e-12:
            bad.append("alpha not even")
        if not np.all(np.diff(self.alpha(x)) < 0):
            bad.append("alpha not strictly decreasing on (0, 1)")
        return bad


def beta(profile, s, u):
    d = profile.delta
    return profile.alpha(np.asarray(s) / d) * profile.alpha(np.asarray(u) / d)


def beta_grad(profile, s, u):
    d = profile.delta
    xs, xu = np.asarray(s) / d, np.asarray(u) / d
    a_s, a_u = profile.alpha(xs), profile.alpha(xu)
    return profile.alpha_prime(xs) * a_u / d, a_s * profile.alpha_prime(xu) / d


def find_sbar(profile):
    """Positive root of ``beta(s, 0) = 1``."""
    return brentq(lambda s: float(beta(profile, s, 0.0)) - 1.0, 0.0, profile.delta, xtol=1e-16)


def da_vector_field(profile, s, u):
    return (beta(profile, s, u) - 1) * s, np.asarray(u, dtype=float) * 1.0


def da_jacobian(profile, s, u):
    """``(sigma, c)`` with ``J = [[-sigma, -c], [0, 1]]``."""
    s = np.asarray(s, dtype=float)
    b = beta(profile, s, u)
    bs, bu = beta_grad(profile, s, u)
    return -(b - 1 + bs * s), -bu * s


def h_max(profile):
    return 1e-3 * min(1.0, profile.delta)


def _steps(profile, t, h):
    if h is None:
        h = h_max(profile)
    if h > h_max(profile) * (1 + 1e-12):
        raise ValueError(f"step {h} exceeds h_max = {h_max(profile)}")
    n = max(1, int(math.ceil(abs(t) / h - 1e-9)))
    return n, t / n


def _checkpoint_steps(times, dt):
    steps = []
    for tc in times:
        k = tc / dt
        if abs(k - round(k)) > 1e-6:
            raise ValueError(f"checkpoint {tc} is not a multiple of the step {dt}")
        steps.append(int(round(k)))
    if any(b <= a for a, b in zip(steps, steps[1:])) or steps[0] < 1:
        raise ValueError("checkpoints must increase away from zero")
    return np.array(steps, dtype=np.int64)


def _rhs_numpy(profile, s, p, q, u, et):
    d = profile.delta
    xs, xu = s / d, u / d
    a_s, a_u = profile.alpha(xs), profile.alpha(xu)
    b = a_s * a_u
    sig = -(b - 1 + profile.alpha_prime(xs) * a_u / d * s)
    c = -a_s * profile.alpha_prime(xu) / d * s
    return (b - 1) * s, -sig * p, -sig * q - c * et


def _rk4_numpy(profile, s0, u0, dt, chk):
    s, u0 = s0.copy(), u0
    p, q = np.ones_like(s), np.zeros_like(s)
    out = []
    for step in range(chk[-1]):
        tt = step * dt
        e0, em, eb = math.exp(tt), math.exp(tt + dt / 2), math.exp(tt + dt)
        k1 = _rhs_numpy(profile, s, p, q, u0 * e0, e0)
        k2 = _rhs_numpy(profile, s + dt / 2 * k1[0], p + dt / 2 * k1[1], q + dt / 2 * k1[2], u0 * em, em)
        k3 = _rhs_numpy(profile, s + dt / 2 * k2[0], p + dt / 2 * k2[1], q + dt / 2 * k2[2], u0 * em, em)
        k4 = _rhs_numpy(profile, s + dt * k3[0], p + dt * k3[1], q + dt * k3[2], u0 * eb, eb)
        s = s + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        p = p + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        q = q + dt / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        if step + 1 in chk:
            out.append((s, p, q))
    return [np.stack(x) for x in zip(*out)]


def _integrate(profile, s0, u0, times, h):
    n, dt = _steps(profile, times[-1], h)
    chk = _checkpoint_steps(times, dt)
    shape = np.shape(np.broadcast_arrays(np.asarray(s0, float), np.asarray(u0, float))[0])
    s0 = np.broadcast_to(np.asarray(s0, dtype=float), shape).ravel().copy()
    u0 = np.broadcast_to(np.asarray(u0, dtype=float), shape).ravel().copy()
    if profile.alpha is canonical_alpha:
        from ._da_kernel import rk4_canonical
        S, P, Q = rk4_canonical(s0, u0, profile.delta, dt, chk)
    else:
        S, P, Q = _rk4_numpy(profile, s0, u0, dt, list(chk))
    return [(S[k].reshape(shape), (u0 * math.exp(chk[k] * dt)).reshape(shape),
             P[k].reshape(shape), Q[k].reshape(shape)) for k in range(len(chk))]


def integrate_da(profile, s0, u0, t, h=None):
    """RK4 in ``s`` with ``u(t) = e^t u0`` in closed form; ``t`` may be negative."""
    if t == 0:
        return np.array(s0, dtype=float), np.array(u0, dtype=float)
    s, u, _, _ = _integrate(profile, s0, u0, [t], h)[0]
    return s, u


def integrate_da_with_jacobian(profile, s0, u0, t, h=None, checkpoints=None):
    """Flow together with its derivative ``[[P, Q], [0, e^t]]``.

    The variational system is ``P' = -sigma P`` and ``Q' = -sigma Q - c e^t``.
    Returns ``(s, u, P, Q)``, or one such tuple per checkpoint time.
    """
    times = [t] if checkpoints is None else list(checkpoints)
    if times[-1] != t:
        raise ValueError("last checkpoint must equal t")
    res = _integrate(profile, s0, u0, times, h)
    return res[0] if checkpoints is None else res


@dataclass
class DADomain:
    """``E = {beta >= 1}`` and ``Ehat = phi^{t0}(E)``; both star-shaped about the origin."""

    profile: BumpProfile
    t0: float = T0
    n_boundary: int = 2048
    s_bar: float = field(init=False)
    E_boundary: np.ndarray = field(init=False)
    Ehat_boundary: np.ndarray = field(init=False)

    def __post_init__(self):
        p = self.profile
        self.s_bar = find_sbar(p)
        phis = np.linspace(0, 2 * np.pi, self.n_boundary, endpoint=False)
        radii = np.array([self._radius(ph) for ph in phis])
        self.E_boundary = np.stack([radii * np.cos(phis), radii * np.sin(phis)], -1)
        s, u = integrate_da(p, self.E_boundary[:, 0], self.E_boundary[:, 1], self.t0)
        self.Ehat_boundary = np.stack([s, u], -1)
        ang = np.unwrap(np.arctan2(u, s))
        if not np.all(np.diff(ang) > 0):
            raise ValueError("flowed boundary is not star-shaped about the origin")
        order = np.argsort(np.mod(ang, 2 * np.pi))
        ang = np.mod(ang, 2 * np.pi)[order]
        rad = np.hypot(s, u)[order]
        # periodic padding for interpolation
        self._ang = np.concatenate([ang[-1:] - 2 * np.pi, ang, ang[:1] + 2 * np.pi])
        self._rad = np.concatenate([rad[-1:], rad, rad[:1]])

    def _radius(self, phi):
        c, s = math.cos(phi), math.sin(phi)
        return brentq(lambda r: float(beta(self.profile, r * c, r * s)) - 1.0, 0.0,
                      self.profile.delta * math.sqrt(2), xtol=1e-15)

    def boundary_radius(self, phi):
        return np.interp(np.mod(phi, 2 * np.pi), self._ang, self._rad)

    def in_Ehat(self, s, u):
        s, u = np.asarray(s, dtype=float), np.asarray(u, dtype=float)
        return np.hypot(s, u) < self.boundary_radius(np.arctan2(u, s))

    def in_E(self, s, u):
        return beta(self.profile, s, u) >= 1


D_G, D_T, D_P, EXCLUDED = "D_G", "D_T", "D_P", "excluded"


def build_domains(domain, eps, s, u):
    """Tag query points as ``D_G``, ``D_T``, ``D_P`` or ``excluded``."""
    delta = domain.profile.delta
    if not delta < eps:
        raise ValueError(f"need delta < eps, got delta = {delta}, eps = {eps}")
    s, u = np.asarray(s, dtype=float), np.asarray(u, dtype=float)
    m = np.maximum(np.abs(s), np.abs(u))
    tags = np.full(s.shape, D_P, dtype=object)
    tags[m > delta] = D_T
    tags[m > eps] = D_G
    tags[(m <= delta) & domain.in_Ehat(s, u)] = EXCLUDED
    return tags


@dataclass
class ScanResult:
    s: np.ndarray
    u: np.ndarray
    beta: np.ndarray
    sigma: np.ndarray
    c: np.ndarray
    domain: np.ndarray
    xi: float
    c_max: float
    c_abs_max: float
    c_bar: float
    beta_max_outside: float

    def rows(self):
        for row in zip(self.s, self.u, self.beta, self.sigma, self.c, self.domain):
            yield [float(x) for x in row[:5]] + [row[5]]


def scan_grid(domain, n=400, exclude_radius_steps=2.0):
    """Scan ``[-delta, delta]^2`` on an ``n x n`` grid.

    ``xi`` is the minimum of ``sigma`` over non-excluded grid points, skipping
    discs of radius ``exclude_radius_steps`` grid steps around ``(+-s_bar, 0)``.
    """
    p = domain.profile
    g = np.linspace(-p.delta, p.delta, n)
    S, U = np.meshgrid(g, g, indexing="xy")
    S, U = S.ravel(), U.ravel()
    b = beta(p, S, U)
    sig, c = da_jacobian(p, S, U)
    inside = domain.in_Ehat(S, U)
    tags = np.where(inside, EXCLUDED, D_P).astype(object)
    step = g[1] - g[0]
    near = np.minimum(np.hypot(S - domain.s_bar, U), np.hypot(S + domain.s_bar, U)) < exclude_radius_steps * step
    keep = ~inside & ~near
    out = ~inside
    return ScanResult(S, U, b, sig, c, tags,
                      xi=float(sig[keep].min()),
                      c_max=float(c[out].max()),
                      c_abs_max=float(np.abs(c[out]).max()),
                      c_bar=p.c_bar,
                      beta_max_outside=float(b[keep].max()))


def write_scan_csv(path, result):
    from .reports import write_csv
    write_csv(path, ["s", "u", "beta", "sigma", "c", "domain"], result.rows())


def load_profile(config):
    """Profile from a mapping with ``delta`` and ``alpha`` (``canonical`` or a CSV path)."""
    delta = float(config["delta"])
    alpha = config.get("alpha", "canonical")
    if alpha == "canonical":
        return BumpProfile(delta)
    data = np.loadtxt(alpha, delimiter=",", skiprows=1)
    return BumpProfile.tabulated(delta, data[:, 0], data[:, 1], int(config.get("spline_order", 3)))
