"""Obstructions to fiberwise Anosov flows over flows with an inverse pair of periodic orbits.

Parity and dimension tests on the monodromy, rotation numbers of circle
maps, slopes of torus foliations parallel to linear ones, the rational
crossing forced by the intermediate value theorem, and the circle-leaf
length bound.
"""

from dataclasses import dataclass, field
from fractions import Fraction
import math

import numpy as np

from .toral_dynamics import is_hyperbolic, stable_unstable_dims

VERTICAL = math.inf
Q_MAX = 10 ** 6


class CircleMapLift:
    """Degree-one lift ``F(x) = x + shift + sum a_k sin(2 pi k x + phase_k)``.

    ``terms`` is a sequence of ``(amplitude, frequency, phase)`` with integer
    frequencies, which makes ``F(x + 1) = F(x) + 1`` hold identically.
    """

    def __init__(self, shift, terms=()):
        self.shift = float(shift)
        self.terms = tuple((float(a), int(k), float(ph)) for a, k, ph in terms)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = x + self.shift
        for a, k, ph in self.terms:
            out = out + a * np.sin(2 * np.pi * k * x + ph)
        return out

    def scalar(self, x):
        out = x + self.shift
        for a, k, ph in self.terms:
            out += a * math.sin(2 * math.pi * k * x + ph)
        return out

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        out = np.ones_like(x)
        for a, k, ph in self.terms:
            out = out + 2 * np.pi * k * a * np.cos(2 * np.pi * k * x + ph)
        return out

    def degree_one_defect(self, n=1000):
        x = np.linspace(0.0, 1.0, n, endpoint=False)
        return float(np.max(np.abs(self(x + 1.0) - self(x) - 1.0)))

    def is_monotone(self, n=10000):
        x = np.linspace(0.0, 1.0, n, endpoint=False)
        return bool(np.all(np.diff(self(np.append(x, 1.0))) > 0))


def rotation_number(F, n, x0=0.0):
    """``(F^n(x0) - x0) / n`` with the error bound ``1/n``."""
    if n < 1:
        raise ValueError("iteration count must be at least 1")
    if not F.is_monotone():
        raise ValueError("lift is not monotone; rotation number is undefined")
    if getattr(F, "terms", None) == ():
        # rigid rotation: exact rational arithmetic, no accumulated rounding
        return float(Fraction(F.shift)), 1.0 / n
    step = F.scalar if hasattr(F, "scalar") else F
    x = float(x0)
    for _ in range(int(n)):
        x = step(x)
    return (x - x0) / n, 1.0 / n


class GridLineField:
    """Line field on the torus sampled on an ``N x M`` grid of angles.

    Row ``i`` is ``y = i / N`` and column ``j`` is ``x = j / M``. Angles are
    defined mod pi; interpolation is bilinear on the doubled-angle vector.
    """

    def __init__(self, angles):
        self.angles = np.asarray(angles, dtype=float)
        if self.angles.ndim != 2:
            raise ValueError("angle grid must be two-dimensional")
        self.N, self.M = self.angles.shape
        self._c = np.cos(2 * self.angles)
        self._s = np.sin(2 * self.angles)

    def max_jump(self):
        """Largest angle difference mod pi between grid neighbours."""
        a = self.angles
        jumps = []
        for axis in (0, 1):
            diff = np.abs(np.mod(np.roll(a, -1, axis=axis) - a + np.pi / 2, np.pi) - np.pi / 2)
            jumps.append(diff.max())
        return float(max(jumps))

    def angle(self, x, y):
        gx = (x % 1.0) * self.M
        gy = (y % 1.0) * self.N
        j0, i0 = int(gx) % self.M, int(gy) % self.N
        fx, fy = gx - int(gx), gy - int(gy)
        j1, i1 = (j0 + 1) % self.M, (i0 + 1) % self.N
        w00, w01, w10, w11 = (1 - fy) * (1 - fx), (1 - fy) * fx, fy * (1 - fx), fy * fx
        c = w00 * self._c[i0, j0] + w01 * self._c[i0, j1] + w10 * self._c[i1, j0] + w11 * self._c[i1, j1]
        s = w00 * self._s[i0, j0] + w01 * self._s[i0, j1] + w10 * self._s[i1, j0] + w11 * self._s[i1, j1]
        return 0.5 * math.atan2(s, c)


class FunctionLineField:
    """Line field given by a periodic angle function ``theta(x, y)``."""

    def __init__(self, fn):
        self.fn = fn

    def angle(self, x, y):
        return float(self.fn(x, y))

    def to_grid(self, N, M):
        ys, xs = np.arange(N) / N, np.arange(M) / M
        return GridLineField([[self.fn(x, y) for x in xs] for y in ys])


def constant_field(slope):
    theta = math.pi / 2 if math.isinf(slope) else math.atan(slope)
    return FunctionLineField(lambda x, y: theta)


def _direction(field, x, y, ref):
    th = field.angle(x, y)
    dx, dy = math.cos(th), math.sin(th)
    if dx * ref[0] + dy * ref[1] < 0:
        dx, dy = -dx, -dy
    return dx, dy


def integrate_leaf(field, L, h=0.01, start=(0.0, 0.0)):
    """RK4 integration of a unit-speed leaf in the universal cover for arc length ``L``.

    The orientation is carried continuously; the first direction is chosen
    with non-negative x component.
    """
    x, y = map(float, start)
    th = field.angle(x, y)
    ref = (math.cos(th), math.sin(th))
    if ref[0] < 0 or (ref[0] == 0 and ref[1] < 0):
        ref = (-ref[0], -ref[1])
    n = max(1, int(math.ceil(L / h)))
    h = L / n
    for _ in range(n):
        k1 = _direction(field, x, y, ref)
        k2 = _direction(field, x + 0.5 * h * k1[0], y + 0.5 * h * k1[1], k1)
        k3 = _direction(field, x + 0.5 * h * k2[0], y + 0.5 * h * k2[1], k2)
        k4 = _direction(field, x + h * k3[0], y + h * k3[1], k3)
        dx = (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]) / 6
        dy = (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]) / 6
        x += h * dx
        y += h * dy
        ref = k4
    return x - start[0], y - start[1]


def linear_slope_of_foliation(field, L, h=0.01, vertical_tol=1e-9):
    """Slope ``dy/dx`` of the linear foliation the field is parallel to.

    Near-vertical displacements return ``VERTICAL``.
    """
    if isinstance(field, GridLineField) and field.max_jump() >= math.pi / 4:
        raise ValueError(f"line field is not continuous at grid resolution (jump {field.max_jump():.3f} rad)")
    dx, dy = integrate_leaf(field, L, h)
    if abs(dx) <= vertical_tol * abs(dy):
        return VERTICAL
    return dy / dx


# rationals


def is_certified_irrational(x, q_max=Q_MAX):
    """No rational with denominator ``<= q_max`` equals ``x`` to floating precision."""
    if not math.isfinite(x):
        return False
    approx = Fraction(x).limit_denominator(q_max)
    return abs(x - float(approx)) > 4 * np.finfo(float).eps * max(1.0, abs(x))


def _simplest_positive(a, b):
    """Simplest rational in the open interval ``(a, b)`` with ``0 <= a < b`` (b may be inf)."""
    n = math.floor(a)
    if n + 1 < b:
        return Fraction(n + 1)
    # no integer strictly inside: recurse on the reciprocal of the fractional parts
    lo = 1.0 / (b - n) if b - n > 0 else math.inf
    hi = 1.0 / (a - n) if a - n > 0 else math.inf
    return n + 1 / _simplest_positive(lo, hi)


def simplest_rational_between(a, b):
    """Minimal-denominator rational strictly between ``a`` and ``b``.

    Stern-Brocot descent via continued fractions; among equal denominators
    the smallest ``|p|`` wins.
    """
    a, b = sorted((float(a), float(b)))
    if a == b:
        raise ValueError("interval is empty")
    if a < 0 < b:
        return Fraction(0)
    if b <= 0:
        return -_simplest_positive(-b, -a)
    return _simplest_positive(a, b)


class SlopePath:
    """Continuous slope path ``[0, 1] -> R`` given by samples, linearly interpolated."""

    def __init__(self, ts, sigmas, slope_step_max=0.5):
        self.ts = np.asarray(ts, dtype=float)
        self.sigmas = np.asarray(sigmas, dtype=float)
        if self.ts[0] != 0.0 or self.ts[-1] != 1.0 or np.any(np.diff(self.ts) <= 0):
            raise ValueError("path samples must increase from t = 0 to t = 1")
        if not np.all(np.isfinite(self.sigmas)):
            raise ValueError("slope path passes through the vertical marker")
        jump = float(np.max(np.abs(np.diff(self.sigmas)))) if self.sigmas.size > 1 else 0.0
        if jump >= slope_step_max:
            raise ValueError(f"consecutive slopes differ by {jump:.3g} >= {slope_step_max}; path not continuous")

    @classmethod
    def from_function(cls, fn, n=1001, **kw):
        ts = np.linspace(0.0, 1.0, n)
        return cls(ts, [fn(t) for t in ts], **kw)

    @classmethod
    def linear(cls, sigma0, sigma1, n=1001, **kw):
        return cls.from_function(lambda t: (1 - t) * sigma0 + t * sigma1, n, **kw)

    def __call__(self, t):
        return float(np.interp(t, self.ts, self.sigmas))

    @property
    def endpoints(self):
        return float(self.sigmas[0]), float(self.sigmas[-1])


def find_rational_crossing(path, tol=1e-12, q_max=Q_MAX):
    """``(t0, p, q)`` with ``p/q`` the simplest rational between the endpoint slopes
    and ``|sigma(t0) - p/q| < tol``."""
    s0, s1 = path.endpoints
    if s0 == s1:
        raise ValueError("endpoint slopes coincide; no crossing to find")
    for s in (s0, s1):
        if not is_certified_irrational(s, q_max):
            raise ValueError(f"endpoint slope {s!r} is rational with denominator <= {q_max}")
    r = simplest_rational_between(s0, s1)
    target = float(r)
    g = path.sigmas - target
    idx = np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) <= 0)[0]
    if idx.size == 0:
        raise ValueError(f"path samples never bracket {r}; continuity witness violated")
    k = int(idx[0])
    lo, hi = path.ts[k], path.ts[k + 1]
    glo = path(lo) - target
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        gm = path(mid) - target
        if abs(gm) < tol:
            lo = hi = mid
            break
        if (gm > 0) == (glo > 0):
            lo, glo = mid, gm
        else:
            hi = mid
    t0 = 0.5 * (lo + hi)
    if abs(path(t0) - target) >= tol:
        raise ValueError(f"bisection did not reach tolerance {tol}")
    return t0, r.numerator, r.denominator


def circle_leaf_contradiction(len0, rate, systole):
    """First time a circle leaf contracted at ``rate`` per unit time falls below ``systole``."""
    if not (0 < rate < 1):
        raise ValueError(f"rate {rate} is not a contraction; lemma does not apply")
    if len0 <= 0 or systole <= 0:
        raise ValueError("lengths must be positive")
    if len0 <= systole:
        return 0.0
    return math.log(len0 / systole) / math.log(1.0 / rate)


def eigen_slopes(A):
    """Slopes ``dy/dx`` of the unstable and stable eigendirections of a 2x2 automorphism."""
    if A.d != 2:
        raise ValueError("eigen-slopes need d = 2")
    vals, vecs = np.linalg.eig(A.matrix)
    order = np.argsort(np.abs(vals))
    out = []
    for i in (order[1], order[0]):
        v = np.real(vecs[:, i])
        out.append(VERTICAL if abs(v[0]) < 1e-15 else float(v[1] / v[0]))
    return tuple(out)


@dataclass
class ObstructionVerdict:
    verdict: str
    witness: dict = field(default_factory=dict)
    dims: tuple = (None, None)
    note: str = ""

    def as_dict(self):
        out = {"verdict": self.verdict}
        for k in ("t0", "p", "q"):
            if k in self.witness:
                out[f"witness.{k}"] = self.witness[k]
        out["dims.stable"], out["dims.unstable"] = self.dims
        if self.note:
            out["note"] = self.note
        return out


def fiberwise_obstruction_report(A, base_has_inverse_orbit_pair, tol=1e-12):
    """Verdict for a fiberwise Anosov flow with monodromy ``A`` along a homotopy
    between a periodic orbit and the inverse of another."""
    if not is_hyperbolic(A)[0]:
        raise ValueError("monodromy is not hyperbolic")
    dims = stable_unstable_dims(A)
    if not base_has_inverse_orbit_pair:
        return ObstructionVerdict("not_obstructed", dims=dims, note="no inverse pair of periodic orbits; hypothesis unmet")
    if A.d % 2:
        return ObstructionVerdict("impossible_parity", dims=dims, note=f"d = {A.d} is odd")
    if dims[0] != dims[1]:
        return ObstructionVerdict("impossible_dims", dims=dims,
                                  note="stable dimension of A and of A^-1 must both equal dim V^s")
    if A.d == 2:
        s_u, s_s = eigen_slopes(A)
        # model path: linear interpolation of the eigen-slopes
        path = SlopePath.linear(s_u, s_s)
        t0, p, q = find_rational_crossing(path, tol)
        note = ("a rational linear foliation along the homotopy forces a circle leaf of the vertical "
                "unstable foliation; circle leaves shrink below the systole under the backward flow, "
                "and contractible ones contradict uniform continuity of V^u")
        return ObstructionVerdict("impossible_d2", {"t0": t0, "p": p, "q": q}, dims, note)
    return ObstructionVerdict("not_obstructed", dims=dims)


def read_line_field(path):
    """Grid file: header ``N M`` then ``N*M`` angles in radians, row-major."""
    with open(path) as fh:
        tokens = fh.read().split()
    N, M = int(tokens[0]), int(tokens[1])
    vals = np.array([float(x) for x in tokens[2:2 + N * M]])
    if vals.size != N * M:
        raise ValueError(f"{path}: expected {N * M} angles, found {vals.size}")
    return GridLineField(vals.reshape(N, M))


def write_line_field(path, field_):
    with open(path, "w") as fh:
        fh.write(f"{field_.N} {field_.M}\n")
        for row in field_.angles:
            fh.write(" ".join(repr(float(a)) for a in row) + "\n")
