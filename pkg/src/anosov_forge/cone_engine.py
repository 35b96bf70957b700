"""Cone-criterion checks for planar flows with derivative.

A planar cone is a closed interval of directions ``[lo, lo + width]`` taken
mod pi, with ``0 <= width < pi``; all cone objects here are stacks of such
intervals so checks run over many sample points at once. Certification is
sample-based: nothing here is interval-rigorous.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.stats import qmc

from . import da_flow
from .hyperbolic_plane import chart_tangents


def _angle(v):
    return np.mod(np.arctan2(v[..., 1], v[..., 0]), np.pi)


def _unit(theta):
    return np.stack([np.cos(theta), np.sin(theta)], -1)


@dataclass
class Cone2D:
    lo: np.ndarray
    width: np.ndarray

    def __post_init__(self):
        self.lo = np.mod(np.asarray(self.lo, dtype=float), np.pi)
        self.width = np.asarray(self.width, dtype=float) * np.ones_like(self.lo)
        if np.any((self.width < 0) | (self.width >= np.pi)):
            raise ValueError("cone width must lie in [0, pi)")

    @classmethod
    def sector(cls, l, r, n=None):
        """Vectors ``(a, 1)`` with ``l <= a <= r``."""
        l, r = np.asarray(l, dtype=float), np.asarray(r, dtype=float)
        if np.any(l >= 0) or np.any(r <= 0):
            raise ValueError("a sector needs l < 0 < r so that it contains (0, 1)")
        lo, hi = np.arctan2(1.0, r), np.arctan2(1.0, l)
        if n is not None:
            lo, hi = np.broadcast_to(lo, (n,)), np.broadcast_to(hi, (n,))
        return cls(lo, hi - lo)

    @classmethod
    def axis(cls, direction, aperture, n=None):
        """Directions within angle ``aperture`` of the line spanned by ``direction``."""
        if not 0 <= aperture < np.pi / 2:
            raise ValueError("aperture must lie in [0, pi/2)")
        phi = _angle(np.asarray(direction, dtype=float))
        if n is not None:
            phi = np.broadcast_to(phi, (n,))
        return cls(phi - aperture, 2 * aperture * np.ones_like(phi))

    def __len__(self):
        return self.lo.size

    def __getitem__(self, idx):
        return Cone2D(self.lo[idx], self.width[idx])

    def boundary_vectors(self):
        return _unit(self.lo), _unit(self.lo + self.width)

    def sample_vectors(self, k):
        """``k >= 2`` unit vectors per cone, boundary rays included; shape ``(n, k, 2)``."""
        frac = np.linspace(0.0, 1.0, k)
        return _unit(self.lo[:, None] + frac[None, :] * self.width[:, None])

    def contains(self, v, tol=0.0):
        return self.clearance(_angle(np.asarray(v, dtype=float))) >= -tol

    def clearance(self, theta):
        x = np.mod(theta - self.lo + (np.pi - self.width) / 2, np.pi) - (np.pi - self.width) / 2
        return np.minimum(x, self.width - x)

    def image(self, M):
        """Image under stacked linear maps ``M`` of shape ``(n, 2, 2)``."""
        w1, w2 = self.boundary_vectors()
        a1 = _angle(np.einsum("nij,nj->ni", M, w1))
        a2 = _angle(np.einsum("nij,nj->ni", M, w2))
        pos = np.linalg.det(M) > 0
        lo = np.where(pos, a1, a2)
        hi = np.where(pos, a2, a1)
        return Cone2D(lo, np.mod(hi - lo, np.pi))

    def margin_in(self, other):
        """Signed angular clearance of ``self`` inside ``other``; positive means strictly inside."""
        c = (other.width - self.width) / 2
        x = np.mod(self.lo - other.lo - c + np.pi / 2, np.pi) - np.pi / 2 + c
        return np.minimum(x, other.width - self.width - x)


@dataclass
class FlowWithDerivative:
    """``step(points, t)`` on arrays of shape ``(n, 2)`` and an optional analytic derivative."""

    step: object
    derivative_fn: object = None
    fd_step: float = 1e-6
    path_fn: object = None

    def flow_and_derivative(self, points, ts):
        """``[(phi^t(p), D phi^t(p)) for t in ts]`` for increasing positive ``ts``."""
        if self.path_fn is not None:
            return self.path_fn(points, ts)
        return [(self.step(points, t), self.derivative(points, t)) for t in ts]

    def derivative(self, points, t):
        if self.derivative_fn is not None:
            return self.derivative_fn(points, t)
        return self.fd_derivative(points, t)

    def fd_derivative(self, points, t):
        pts = np.asarray(points, dtype=float)
        h = self.fd_step
        cols = []
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            cols.append((self.step(pts + e, t) - self.step(pts - e, t)) / (2 * h))
        return np.stack(cols, -1)


def linear_saddle_flow():
    def step(p, t):
        p = np.asarray(p, dtype=float)
        return np.stack([p[:, 0] * math.exp(-t), p[:, 1] * math.exp(t)], -1)

    def deriv(p, t):
        M = np.zeros((len(p), 2, 2))
        M[:, 0, 0], M[:, 1, 1] = math.exp(-t), math.exp(t)
        return M

    return FlowWithDerivative(step, deriv)


def da_flow_with_derivative(profile, h=None):
    def step(p, t):
        p = np.asarray(p, dtype=float)
        s, u = da_flow.integrate_da(profile, p[:, 0], p[:, 1], t, h)
        return np.stack([s, u], -1)

    def deriv(p, t):
        p = np.asarray(p, dtype=float)
        if t < 0:
            # backward derivative: inverse of the forward derivative from the past point
            q = step(p, t)
            return np.linalg.inv(deriv(q, -t))
        M = np.zeros((len(p), 2, 2))
        if t == 0:
            M[:, 0, 0] = M[:, 1, 1] = 1.0
            return M
        _, _, P, Q = da_flow.integrate_da_with_jacobian(profile, p[:, 0], p[:, 1], t, h)
        M[:, 0, 0], M[:, 0, 1], M[:, 1, 1] = P, Q, math.exp(t)
        return M

    def path(p, ts):
        p = np.asarray(p, dtype=float)
        out = []
        for t, (s, u, P, Q) in zip(ts, da_flow.integrate_da_with_jacobian(
                profile, p[:, 0], p[:, 1], ts[-1], h, checkpoints=list(ts))):
            M = np.zeros((len(p), 2, 2))
            M[:, 0, 0], M[:, 0, 1], M[:, 1, 1] = P, Q, math.exp(t)
            out.append((np.stack([s, u], -1), M))
        return out

    return FlowWithDerivative(step, deriv, path_fn=path)


@dataclass
class CheckReport:
    name: str
    passed: np.ndarray
    margins: np.ndarray
    points: np.ndarray = None
    extra: dict = field(default_factory=dict)

    @property
    def ok(self):
        return bool(np.all(self.passed)) and len(self.passed) > 0

    @property
    def worst_index(self):
        return int(np.argmin(self.margins))

    @property
    def worst_margin(self):
        return float(np.min(self.margins))

    def summary(self):
        out = {f"{self.name}.pass": self.ok, f"{self.name}.samples": int(len(self.passed)),
               f"{self.name}.worst_margin": self.worst_margin}
        if self.points is not None and len(self.points):
            out[f"{self.name}.worst_point"] = [float(x) for x in self.points[self.worst_index]]
        for k, v in self.extra.items():
            out[f"{self.name}.{k}"] = v
        return out

    def csv_rows(self):
        for i in range(len(self.passed)):
            pt = [] if self.points is None else [float(x) for x in self.points[i]]
            yield pt + [self.name, float(self.margins[i]), bool(self.passed[i])]


def cone_invariance_check(flow, cone_field, points, t, name="invariance"):
    """Derivative image of each source cone must lie strictly inside the target cone."""
    if t <= 0:
        raise ValueError("invariance is checked forward in time")
    points = np.asarray(points, dtype=float)
    (q, M), = flow.flow_and_derivative(points, [t])
    src, dst = cone_field(points), cone_field(q)
    if np.any(np.isnan(dst.lo)):
        raise ValueError("flow image has no assigned cone")
    m = src.image(M).margin_in(dst)
    return CheckReport(name, m > 0, m, points, {"t": float(t)})


def sector_closed_form_check(sigma, c, l, r, points=None, name="sector_closed_form"):
    """Infinitesimal invariance of the ``[l, r]`` sector under ``J = [[-sigma, -c], [0, 1]]``:
    ``sigma r + c + r > 0`` and ``l < -c / (sigma + 1)``."""
    m1 = sigma * r + c + r
    m2 = -c / (sigma + 1) - l
    m = np.minimum(m1, m2)
    return CheckReport(name, m > 0, m, points, {"first_min": float(np.min(m1)), "second_min": float(np.min(m2))})


def _fit_rate(ts, log_ratios):
    ts = np.asarray(ts, dtype=float)
    if len(ts) == 1:
        # one time cannot separate C from mu; fit through C = 1
        return 1.0, math.exp(float(log_ratios[0]) / ts[0])
    A = np.stack([np.ones_like(ts), ts], -1)
    (logC, logmu), *_ = np.linalg.lstsq(A, np.asarray(log_ratios), rcond=None)
    return math.exp(logC), math.exp(logmu)


def cone_contraction_check(flow, cone_field, points, t_list, mu_min=1.0, k=5, name="contraction"):
    """Backward growth ``|D phi^{-t} v| / |v|`` for ``v`` in the cone at ``q = phi^t(p)``."""
    points = np.asarray(points, dtype=float)
    mins, margins = [], np.full(len(points), np.inf)
    if min(t_list) <= 0:
        raise ValueError("times must be positive")
    for t, (q, M) in zip(t_list, flow.flow_and_derivative(points, list(t_list))):
        back = np.linalg.inv(M)
        if not np.all(np.isfinite(back)):
            raise ValueError("degenerate derivative")
        V = cone_field(q).sample_vectors(k)
        ratio = np.linalg.norm(np.einsum("nij,nkj->nki", back, V), axis=-1).min(axis=1)
        mins.append(ratio.min())
        margins = np.minimum(margins, np.log(ratio) - t * math.log(mu_min))
    C, mu = _fit_rate(t_list, np.log(mins))
    passed = (margins > 0) & (mu > 1)
    return CheckReport(name, passed, margins, points, {"mu": mu, "C": C})


def eventual_expansion_check(flow, cone_field, points, t_list, C=None, mu=None, k=5,
                             rounding=1e-12, name="expansion"):
    """``|D phi^t v| >= C mu^t |v|`` on sampled cone vectors; fits ``(C, mu)`` when not given.

    Margins are ``log(ratio) - log(C mu^t)``. The bound is non-strict and can
    be attained at the cone boundary, so margins down to ``-rounding`` pass.
    """
    points = np.asarray(points, dtype=float)
    cones = cone_field(points)
    V = cones.sample_vectors(k)
    ratios = []
    eye = np.broadcast_to(np.eye(2), (len(points), 2, 2))
    pos = [t for t in t_list if t > 0]
    mats = dict(zip(pos, (M for _, M in flow.flow_and_derivative(points, pos)))) if pos else {}
    for t in t_list:
        M = mats.get(t, eye)
        ratios.append(np.linalg.norm(np.einsum("nij,nkj->nki", M, V), axis=-1).min(axis=1))
    ratios = np.array(ratios)
    fitted = C is None or mu is None
    if fitted:
        C_fit, mu = _fit_rate(t_list, np.log(ratios.min(axis=1)))
        C = float(np.min(ratios.min(axis=1) / mu ** np.asarray(t_list)))
    logbound = math.log(C) + np.asarray(t_list)[:, None] * math.log(mu)
    m = (np.log(ratios) - logbound).min(axis=0)
    passed = (m >= -rounding) & (mu > 1)
    return CheckReport(name, passed, m, points, {"C": float(C), "mu": float(mu), "fitted": fitted})


# DA-specific cone fields and the transition checks through the collar V_eps \ U_delta


def da_unstable_field(domain):
    """Product sector ``[-c_bar, c_bar]`` off ``Ehat``; NaN (unassigned) inside ``Ehat``."""
    cb = domain.profile.c_bar

    def field_(p):
        p = np.asarray(p, dtype=float)
        cone = Cone2D.sector(-cb, cb, len(p))
        inside = domain.in_Ehat(p[:, 0], p[:, 1]) & (np.max(np.abs(p), axis=1) <= domain.profile.delta)
        cone.lo = np.where(inside, np.nan, cone.lo)
        return cone
    return field_


def stable_axis_field(aperture=np.pi / 10):
    """Cone of the given aperture about the ``s`` axis."""
    return lambda p: Cone2D.axis([1.0, 0.0], aperture, len(p))


def sample_domain(domain, eps, tag, n, seed=0):
    """``n`` scrambled-Sobol points of the given domain tag, in generation order."""
    box = domain.profile.delta if tag in (da_flow.D_P, da_flow.EXCLUDED) else eps
    if tag == da_flow.D_G:
        box = 2 * eps
    sob = qmc.Sobol(d=2, scramble=True, seed=seed)
    got = []
    total = 0
    while total < n:
        pts = (sob.random(4096) * 2 - 1) * box
        tags = da_flow.build_domains(domain, eps, pts[:, 0], pts[:, 1])
        keep = pts[tags == tag]
        got.append(keep)
        total += len(keep)
    return np.concatenate(got)[:n]


def chart_quotient_matrix(s, u):
    """Map chart vectors ``(ds, du)`` to the flow-orthogonal Lie components ``(transverse, fiber)``."""
    vs, vu = chart_tangents(np.asarray(s, float), np.asarray(u, float))
    return np.stack([vs[..., 1:], vu[..., 1:]], -1)


E_UU_QUOTIENT = np.array([1.0, -1.0]) / math.sqrt(2)


def round_cone_in_chart(s, u, aperture):
    """Sasaki round cone about ``E^uu`` (mod the flow) pulled back to chart directions at ``(s, u)``."""
    n = np.size(s)
    return Cone2D.axis(E_UU_QUOTIENT, aperture, n).image(np.linalg.inv(chart_quotient_matrix(s, u)).reshape(n, 2, 2))


def crossing_time(eps, delta):
    """Time for the linear saddle to carry ``|s| = eps`` to ``|s| = delta``."""
    return math.log(eps / delta)


def entry_transition_check(profile, eps, aperture=np.pi / 10, n=200):
    """Round cone at entry points of ``V_eps`` reaching the delta-square, pushed to the square."""
    d = profile.delta
    T = crossing_time(eps, d)
    u = np.linspace(-d * d / eps, d * d / eps, n)
    pts = np.concatenate([np.stack([np.full(n, eps), u], -1), np.stack([np.full(n, -eps), u], -1)])
    src = round_cone_in_chart(pts[:, 0], pts[:, 1], aperture)
    M = np.broadcast_to(np.diag([math.exp(-T), math.exp(T)]), (len(pts), 2, 2))
    m = src.image(M).margin_in(Cone2D.sector(-profile.c_bar, profile.c_bar, len(pts)))
    return CheckReport("entry_transition", m > 0, m, pts, {"aperture": aperture, "crossing_time": T})


def exit_transition_check(profile, eps, aperture=np.pi / 10, n=200):
    """Product sector at exit points of the delta-square, pushed to ``|u| = eps`` against the round cone."""
    d = profile.delta
    T = crossing_time(eps, d)
    s = np.linspace(-d, d, n)
    pts = np.concatenate([np.stack([s, np.full(n, d)], -1), np.stack([s, np.full(n, -d)], -1)])
    q = np.stack([pts[:, 0] * math.exp(-T), pts[:, 1] * math.exp(T)], -1)
    M = np.broadcast_to(np.diag([math.exp(-T), math.exp(T)]), (len(pts), 2, 2))
    img = Cone2D.sector(-profile.c_bar, profile.c_bar, len(pts)).image(M)
    m = img.margin_in(round_cone_in_chart(q[:, 0], q[:, 1], aperture))
    return CheckReport("exit_transition", m > 0, m, pts, {"aperture": aperture, "crossing_time": T})


def measured_collar_time(eps, delta, n=2000):
    """Longest sampled time an orbit entering at ``|s| = eps`` spends in the collar without
    reaching the delta-square; the saddle bound is ``2 ln(eps / delta)``."""
    u0 = np.geomspace(delta * delta / eps * (1 + 1e-9), eps, n)
    return float(np.max(np.log(eps / u0))), 2 * math.log(eps / delta)


def geodesic_invariance_check(aperture=np.pi / 10, t=1.0, n=16):
    """In D_G the quotient derivative is ``diag(e^-t, e^t)`` in the ``(E^ss, E^uu)`` basis."""
    cone = Cone2D.axis([0.0, 1.0], aperture, n)
    M = np.broadcast_to(np.diag([math.exp(-t), math.exp(t)]), (n, 2, 2))
    m = cone.image(M).margin_in(cone)
    return CheckReport("geodesic_invariance", m > 0, m, None, {"t": t})


REQUIRED = ("sector_closed_form", "invariance", "contraction", "expansion",
            "geodesic_invariance", "entry_transition", "exit_transition")

CERTIFIED, COUNTEREXAMPLE, INCONCLUSIVE = "hyperbolic-certified-on-samples", "counterexample", "inconclusive"


def hyperbolicity_verdict(reports, required=REQUIRED):
    by_name = {r.name: r for r in reports}
    missing = [k for k in required if k not in by_name]
    if missing:
        return {"verdict": INCONCLUSIVE, "missing": missing}
    bad = [r for r in reports if not r.ok]
    if not bad:
        return {"verdict": CERTIFIED, "note": "sample-based certificate; not interval-rigorous"}
    worst = min(bad, key=lambda r: r.worst_margin)
    out = {"verdict": COUNTEREXAMPLE, "failed": [r.name for r in bad], "worst_check": worst.name,
           "worst_margin": worst.worst_margin}
    if worst.points is not None:
        out["worst_point"] = [float(x) for x in worst.points[worst.worst_index]]
    return out


def da_reports(domain, eps, n_points=10000, seed=0, exit_aperture=np.pi / 10, h=None,
               t_invariance=0.5, t_contraction=(0.25, 0.5, 1.0), t_expansion=(1.0, 2.0, 5.0), n_flow=1000):
    """All checks for the DA flow; flow-based checks use the first ``n_flow`` sample points."""
    p = domain.profile
    pts = sample_domain(domain, eps, da_flow.D_P, n_points, seed)
    sig, c = da_flow.da_jacobian(p, pts[:, 0], pts[:, 1])
    flow = da_flow_with_derivative(p, h)
    fp = pts[:n_flow]
    reports = [
        sector_closed_form_check(sig, c, -p.c_bar, p.c_bar, pts),
        cone_invariance_check(flow, da_unstable_field(domain), fp, t_invariance),
        cone_contraction_check(flow, stable_axis_field(), fp, list(t_contraction)),
        eventual_expansion_check(flow, da_unstable_field(domain), fp, list(t_expansion),
                                 C=1 / math.sqrt(p.c_bar ** 2 + 1), mu=math.e),
        geodesic_invariance_check(),
        entry_transition_check(p, eps),
        exit_transition_check(p, eps, exit_aperture),
    ]
    return reports, pts


def certify_da(domain, eps, n_points=10000, seed=0, exit_aperture=np.pi / 10, recheck=True, **kw):
    """Verdict plus reports; a certificate is re-derived with half the step and voided on mismatch."""
    reports, pts = da_reports(domain, eps, n_points, seed, exit_aperture, **kw)
    verdict = hyperbolicity_verdict(reports)
    if recheck and verdict["verdict"] == CERTIFIED:
        h2 = da_flow.h_max(domain.profile) / 2
        again, _ = da_reports(domain, eps, n_points, seed, exit_aperture, h=h2, **kw)
        mism = [a.name for a, b in zip(reports, again) if not np.array_equal(a.passed, b.passed)]
        if mism:
            verdict = {"verdict": INCONCLUSIVE, "recheck_mismatch": mism}
        else:
            verdict["recheck"] = "half-step rerun agrees"
    t_obs, t_bound = measured_collar_time(eps, domain.profile.delta)
    verdict["collar_time_measured"], verdict["collar_time_bound"] = t_obs, t_bound
    return verdict, reports
