"""Twisted double of the DA flow along the excised neighbourhood of SN.

The excised set is modelled in product coordinates as the solid cylinder
``s^2 + u^2 <= kappa^2`` over the SN coordinate ``tau``. ``W1`` carries the DA
flow, ``W2`` is the same chart with time reversed, and a unit-width collar
joins ``dW2`` (collar height 0) to ``dW1`` (height 1). Forward orbits run
from ``W2`` through the collar into ``W1``.
"""

from dataclasses import dataclass, replace
import math

import numpy as np

from . import da_flow
from .hyperbolic_plane import FLIP, GEN_FLOW, GEN_TRANSVERSE, GEN_FIBER, coords_to_matrix, chart_tangents

W1, W2, COLLAR = "W1", "W2", "collar"
T_STEP_MAX = 0.1

# weak stable / unstable planes in (flow, transverse, fiber) Lie components
WEAK_STABLE = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 1.0]])
WEAK_UNSTABLE = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, -1.0]])


def _lie(X):
    return np.stack([2 * X[..., 0, 0], X[..., 0, 1] + X[..., 1, 0], X[..., 0, 1] - X[..., 1, 0]], -1)


def chart_to_lie(s, u):
    """3x3 matrix taking chart vectors ``(ds, du, dtau)`` to Lie components; independent of ``tau``
    and of the SN orbit."""
    vs, vu = chart_tangents(s, u)
    from .hyperbolic_plane import chart_matrix, inv
    h = chart_matrix(s, u)
    vt = _lie(inv(h) @ GEN_FLOW @ h)
    return np.stack([vs, vu, vt], -1)


@dataclass
class BoundarySample:
    theta: np.ndarray
    tau: np.ndarray
    kappa: float
    flipped: np.ndarray
    field: np.ndarray  # DA vector field (ds, du)
    radial: np.ndarray  # outward normal component of the field

    @property
    def s(self):
        return self.kappa * np.cos(self.theta)

    @property
    def u(self):
        return self.kappa * np.sin(self.theta)

    def __len__(self):
        return self.theta.size


def boundary_sample(profile, kappa, n, n_tau=1, flipped=False):
    """``n`` points on the circle ``s^2 + u^2 = kappa^2`` over ``n_tau`` values of ``tau``."""
    if not 0 < kappa < profile.delta / 2:
        raise ValueError(f"kappa = {kappa} outside (0, delta/2)")
    per = max(1, n // n_tau)
    th = np.linspace(0, 2 * np.pi, per, endpoint=False)
    taus = np.linspace(0, 1, n_tau, endpoint=False)
    TH, TA = np.meshgrid(th, taus, indexing="ij")
    TH, TA = TH.ravel(), TA.ravel()
    s, u = kappa * np.cos(TH), kappa * np.sin(TH)
    ds, du = da_flow.da_vector_field(profile, s, u)
    radial = (s * ds + u * du) / kappa
    return BoundarySample(TH, TA, kappa, np.full(TH.shape, bool(flipped)), np.stack([ds, du], -1), radial)


@dataclass
class BoundaryLineField:
    sample: BoundarySample
    stable_trace: np.ndarray  # chart vectors (ds, du, dtau), unit Sasaki length
    unstable_trace: np.ndarray

    def normal_defect(self):
        s, u = self.sample.s, self.sample.u
        return float(max(np.max(np.abs(s * tr[:, 0] + u * tr[:, 1])) for tr in (self.stable_trace, self.unstable_trace)))


def _trace(plane, L, s, u):
    """Line of ``plane`` (left-invariant, Lie components) inside the boundary tangent plane."""
    n_plane = np.cross(plane[0], plane[1])
    tc = np.stack([-u, s, np.zeros_like(s)], -1)
    dt = np.broadcast_to([0.0, 0.0, 1.0], tc.shape)
    n_bdry = np.cross(np.einsum("nij,nj->ni", L, tc), np.einsum("nij,nj->ni", L, dt))
    lie = np.cross(np.broadcast_to(n_plane, n_bdry.shape), n_bdry)
    lie /= np.linalg.norm(lie, axis=-1, keepdims=True)
    return np.linalg.solve(L, lie[..., None])[..., 0]


def boundary_line_field(sample):
    """Traces of the weak stable and weak unstable foliations on the boundary, from the frame model."""
    L = chart_to_lie(sample.s, sample.u)
    return BoundaryLineField(sample, _trace(WEAK_STABLE, L, sample.s, sample.u),
                             _trace(WEAK_UNSTABLE, L, sample.s, sample.u))


# gluing maps on the boundary, in chart coordinates (s, u, tau, flipped)


def flip_gluing(s, u, tau, flipped):
    return -u, -s, -tau, ~np.asarray(flipped, dtype=bool)


def flip_vector(v):
    return np.stack([-v[..., 1], -v[..., 0], -v[..., 2]], -1)


def identity_gluing(s, u, tau, flipped):
    return s, u, tau, np.asarray(flipped, dtype=bool)


def quarter_turn_gluing(s, u, tau, flipped):
    """Rotate the disc by a quarter turn: ``(s, u) -> (-u, s)``."""
    return -u, s, tau, np.asarray(flipped, dtype=bool)


GLUINGS = {
    "flip": (flip_gluing, flip_vector),
    "identity": (identity_gluing, lambda v: v),
    "quarter_turn": (quarter_turn_gluing, lambda v: np.stack([-v[..., 1], v[..., 0], v[..., 2]], -1)),
}


def gluing_map(s, u, tau, flipped, kappa, kind="flip", tol=1e-12):
    r = np.hypot(s, u)
    if np.any(np.abs(r - kappa) > tol * max(1.0, kappa) + 1e-15):
        raise ValueError(f"point off the boundary: |r - kappa| = {np.max(np.abs(r - kappa)):.3g}")
    return GLUINGS[kind][0](s, u, tau, flipped)


def flip_frame_residual(s, u, tau, flipped):
    """Frame-model distance between ``flip(frame(p))`` and ``frame(flip_gluing(p))``."""
    g = coords_to_matrix(s, u, tau, flipped) @ FLIP
    h = coords_to_matrix(*flip_gluing(s, u, tau, flipped))
    sign = np.sign(np.sum(g * h, axis=(-2, -1)))[..., None, None]
    return np.max(np.abs(g - sign * h), axis=(-2, -1))


def _line_angle(L, a, b):
    va = np.einsum("nij,nj->ni", L, a)
    vb = np.einsum("nij,nj->ni", L, b)
    return np.arctan2(np.linalg.norm(np.cross(va, vb), axis=-1), np.abs(np.sum(va * vb, -1)))


def transversality_angles(line_field, kind="flip"):
    """Sasaki angle at ``q = omega(p)`` between ``omega_*`` of the stable trace at ``p`` and the
    stable trace of the time-reversed copy at ``q`` (the unstable foliation of its repeller)."""
    smp = line_field.sample
    glue, push = GLUINGS[kind]
    s2, u2, tau2, fl2 = glue(smp.s, smp.u, smp.tau, smp.flipped)
    img = replace(smp, theta=np.arctan2(u2, s2), tau=tau2, flipped=fl2)
    target = boundary_line_field(img).stable_trace
    L = chart_to_lie(s2, u2)
    return _line_angle(L, push(line_field.stable_trace), target)


def transversality_certificate(line_field, kind="flip", floor=1e-3, bins=18):
    if len(line_field.sample) == 0:
        raise ValueError("empty boundary sample")
    ang = transversality_angles(line_field, kind)
    hist, edges = np.histogram(ang, bins=bins, range=(0, np.pi / 2))
    i = int(np.argmin(ang))
    return {
        "gluing": kind,
        "theta_min": float(ang[i]),
        "samples": int(ang.size),
        "floor": floor,
        "pass": bool(ang[i] > floor),
        "argmin.s": float(line_field.sample.s[i]),
        "argmin.u": float(line_field.sample.u[i]),
        "histogram": [int(x) for x in hist],
    }, ang


# glued flow


@dataclass(frozen=True)
class GluedChartPoint:
    side: str
    s: float
    u: float
    tau: float
    flipped: bool = False
    collar: float = math.nan  # height in (0, 1) while in the collar

    @property
    def orientation(self):
        return {W1: 1, W2: -1, COLLAR: 1}[self.side]


@dataclass
class GluedFlow:
    profile: object
    kappa: float
    gluing: str = "flip"
    h: float = None

    def __post_init__(self):
        if not 0 < self.kappa < self.profile.delta / 2:
            raise ValueError("kappa must lie in (0, delta/2)")
        self.glue, _ = GLUINGS[self.gluing]

    def _da(self, s, u, t):
        if t == 0:
            return s, u
        s1, u1 = da_flow.integrate_da(self.profile, np.array([s]), np.array([u]), t, self.h)
        return float(s1[0]), float(u1[0])

    def _hit_time(self, s, u, t):
        """Bisect the first time in ``(0, t]`` at which the chart flow reaches ``r = kappa``."""
        lo, hi = 0.0, t
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            sm, um = self._da(s, u, mid)
            if math.hypot(sm, um) > self.kappa:
                lo = mid
            else:
                hi = mid
        return hi

    def _onto_circle(self, s, u):
        r = math.hypot(s, u)
        return s * self.kappa / r, u * self.kappa / r

    def step(self, p, t, log=None, clock=0.0):
        if abs(t) > T_STEP_MAX + 1e-15:
            raise ValueError(f"|t| = {abs(t)} exceeds t_step_max = {T_STEP_MAX}")
        if t == 0:
            return p
        if p.side == COLLAR:
            c = p.collar + t
            if 0 < c < 1:
                return replace(p, collar=c)
            if c >= 1:
                # leave through dW1 at the recorded boundary point
                rest = c - 1
                q = GluedChartPoint(W1, p.s, p.u, p.tau, p.flipped)
                self._event(log, clock + t - rest, "collar->W1", q)
                return self._chart_step(q, rest, log, clock + t - rest)
            rest = c
            s2, u2, tau2, fl2 = self.glue(p.s, p.u, p.tau, p.flipped)
            q = GluedChartPoint(W2, float(s2), float(u2), float(tau2), bool(fl2))
            self._event(log, clock + t - rest, "collar->W2", q)
            return self._chart_step(q, rest, log, clock + t - rest)
        return self._chart_step(p, t, log, clock)

    def _chart_step(self, p, t, log, clock):
        if t == 0:
            return p
        local_t = t * p.orientation
        s1, u1 = self._da(p.s, p.u, local_t)
        if math.hypot(s1, u1) > self.kappa:
            return replace(p, s=s1, u=u1, tau=p.tau + local_t)
        th = self._hit_time(p.s, p.u, local_t)
        sb, ub = self._onto_circle(*self._da(p.s, p.u, th))
        tau_b = p.tau + th
        used = abs(th)
        rest = t - math.copysign(used, t)
        if p.side == W1:
            # W1 meets the boundary only in backward time
            q = GluedChartPoint(COLLAR, sb, ub, tau_b, p.flipped, collar=1.0)
            self._event(log, clock + t - rest, "W1->collar", q)
        else:
            # W2 boundary point q maps to collar coordinate omega^{-1}(q); every gluing here is
            # an involution or a rotation whose inverse we apply explicitly
            s0, u0, tau0, fl0 = self._unglue(sb, ub, tau_b, p.flipped)
            q = GluedChartPoint(COLLAR, s0, u0, tau0, fl0, collar=0.0)
            self._event(log, clock + t - rest, "W2->collar", q)
        return self.step(q, rest, log, clock + t - rest) if rest else q

    def _unglue(self, s, u, tau, flipped):
        if self.gluing == "quarter_turn":
            return float(u), float(-s), float(tau), bool(flipped)
        s0, u0, tau0, fl0 = self.glue(s, u, tau, flipped)
        return float(s0), float(u0), float(tau0), bool(fl0)

    @staticmethod
    def _event(log, time, name, q):
        if log is not None:
            log.append((time, name, q))

    def orbit(self, p, horizon, dt=T_STEP_MAX):
        """Fixed-step trajectory with event log; rows are ``(t, side, s, u, tau, event)``."""
        rows, log = [], []
        n = int(round(abs(horizon) / dt))
        dt = math.copysign(dt, horizon)
        rows.append((0.0, p.side, p.s, p.u, p.tau, ""))
        clock = 0.0
        for _ in range(n):
            before = len(log)
            p = self.step(p, dt, log, clock)
            clock += dt
            ev = ";".join(name for _, name, _ in log[before:])
            tau = p.collar if p.side == COLLAR else p.tau
            rows.append((clock, p.side, p.s, p.u, tau, ev))
        return p, rows, log


def conjugacy_residual(profile, s, u, t):
    """``|flip(phi^t(p)) - phi^{-t}(flip(p))|`` in chart coordinates."""
    s1, u1 = da_flow.integrate_da(profile, s, u, t)
    a = np.stack([-u1, -s1], -1)
    s2, u2 = da_flow.integrate_da(profile, -np.asarray(u), -np.asarray(s), -t)
    return np.max(np.abs(a - np.stack([s2, u2], -1)), axis=-1)


def write_orbit_csv(path, rows):
    from .reports import write_csv
    write_csv(path, ["t", "side", "s", "u", "tau", "event"], rows)
