"""Hyperbolic toral automorphisms and their suspension flows.

A toral automorphism is an integer matrix with determinant +-1 acting on
``R^d / Z^d``. Its mapping torus carries the suspension flow
``(x, s) -> (x, s + t)`` with the identification ``(x, 1) ~ (Ax, 0)``.
"""

from dataclasses import dataclass, field
from fractions import Fraction
import math

import numpy as np

TOL_EIG = 1e-9


def integer_determinant(rows):
    """Exact determinant of a square integer matrix (Bareiss elimination)."""
    m = [list(map(int, r)) for r in rows]
    n = len(m)
    if n == 0:
        return 1
    sign = 1
    prev = 1
    for k in range(n - 1):
        if m[k][k] == 0:
            for i in range(k + 1, n):
                if m[i][k] != 0:
                    m[k], m[i] = m[i], m[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
        prev = m[k][k]
    return sign * m[n - 1][n - 1]


def characteristic_polynomial(rows):
    """Integer coefficients of det(lambda I - A), leading coefficient first.

    Faddeev-LeVerrier recursion in exact rational arithmetic.
    """
    n = len(rows)
    a = [[Fraction(int(x)) for x in r] for r in rows]
    coeffs = [Fraction(1)]
    m = [[Fraction(0)] * n for _ in range(n)]
    for k in range(1, n + 1):
        # M_k = A M_{k-1} + c_{k-1} I
        m = [[sum(a[i][l] * m[l][j] for l in range(n)) for j in range(n)] for i in range(n)]
        for i in range(n):
            m[i][i] += coeffs[-1]
        am = [[sum(a[i][l] * m[l][j] for l in range(n)) for j in range(n)] for i in range(n)]
        c = -sum(am[i][i] for i in range(n)) / k
        coeffs.append(c)
    return [int(c) for c in coeffs]


# exact polynomial arithmetic (coefficient lists, leading first)

def _trim(p):
    i = 0
    while i < len(p) - 1 and p[i] == 0:
        i += 1
    return p[i:]


def _pdivmod(a, b):
    a, b = [Fraction(x) for x in _trim(a)], [Fraction(x) for x in _trim(b)]
    if len(a) < len(b):
        return [Fraction(0)], a
    q = [Fraction(0)] * (len(a) - len(b) + 1)
    r = list(a)
    for i in range(len(q)):
        q[i] = r[i] / b[0]
        for j in range(len(b)):
            r[i + j] -= q[i] * b[j]
    return q, _trim(r[len(q):] or [Fraction(0)])


def _pderiv(p):
    n = len(p) - 1
    return [c * (n - i) for i, c in enumerate(p[:-1])] or [Fraction(0)]


def _pgcd(a, b):
    a, b = _trim(a), _trim(b)
    while any(b):
        a, b = b, _pdivmod(a, b)[1]
    return [Fraction(c) / a[0] for c in a]


def squarefree_decomposition(coeffs):
    """Yun's algorithm: ``[(factor, multiplicity), ...]`` with simple-rooted factors."""
    f = [Fraction(c) for c in coeffs]
    out = []
    fp = _pderiv(f)
    b = _pgcd(f, fp)
    c = _pdivmod(f, b)[0]
    d = [x - y for x, y in zip(*_pad(_pdivmod(fp, b)[0], _pderiv(c)))]
    k = 1
    while len(_trim(c)) > 1:
        a = _pgcd(c, d)
        c = _pdivmod(c, a)[0]
        d = [x - y for x, y in zip(*_pad(_pdivmod(d, a)[0], _pderiv(c)))]
        if len(a) > 1:
            out.append(([float(x) for x in a], k))
        k += 1
    return out


def _pad(a, b):
    n = max(len(a), len(b))
    return [Fraction(0)] * (n - len(a)) + list(a), [Fraction(0)] * (n - len(b)) + list(b)


def _int_matmul(x, y):
    n, k, m = len(x), len(y), len(y[0])
    return tuple(tuple(sum(x[i][l] * y[l][j] for l in range(k)) for j in range(m)) for i in range(n))


@dataclass(frozen=True)
class ToralAutomorphism:
    """Integer matrix with determinant +-1, stored as nested tuples of Python ints."""

    entries: tuple
    det: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        rows = tuple(tuple(int(x) for x in r) for r in np.asarray(self.entries, dtype=object).tolist())
        d = len(rows)
        if d == 0 or any(len(r) != d for r in rows):
            raise ValueError("toral automorphism needs a non-empty square matrix")
        object.__setattr__(self, "entries", rows)
        det = integer_determinant(rows)
        object.__setattr__(self, "det", det)
        if det not in (1, -1):
            raise ValueError(f"matrix is not unimodular: determinant = {det}")

    @property
    def d(self):
        return len(self.entries)

    @property
    def matrix(self):
        return np.array(self.entries, dtype=float)

    def __matmul__(self, other):
        return ToralAutomorphism(_int_matmul(self.entries, other.entries))

    def inverse(self):
        """Exact integer inverse (adjugate divided by det = +-1)."""
        d = self.d
        if d == 1:
            return ToralAutomorphism(((self.det,),))
        adj = [[0] * d for _ in range(d)]
        for i in range(d):
            for j in range(d):
                minor = [r[:j] + r[j + 1:] for k, r in enumerate(self.entries) if k != i]
                adj[j][i] = (-1) ** (i + j) * integer_determinant(minor)
        return ToralAutomorphism(tuple(tuple(x * self.det for x in r) for r in adj))

    def power(self, n):
        n = int(n)
        base = self if n >= 0 else self.inverse()
        result = identity(self.d)
        for _ in range(abs(n)):
            result = result @ base
        return result

    def charpoly(self):
        return characteristic_polynomial(self.entries)

    def eigenvalues(self):
        """Eigenvalues with multiplicity, as companion-matrix roots of the square-free factors
        of the characteristic polynomial (repeated roots would otherwise smear by ``eps^(1/k)``)."""
        roots = [np.repeat(np.roots(np.array(f)), k) for f, k in squarefree_decomposition(self.charpoly())]
        return np.concatenate(roots)

    def act(self, x):
        """Apply to points of the torus (last axis of length d), reduced mod 1."""
        return np.mod(np.asarray(x, dtype=float) @ self.matrix.T, 1.0)


def identity(d):
    return ToralAutomorphism(tuple(tuple(int(i == j) for j in range(d)) for i in range(d)))


def block_diag(*blocks):
    d = sum(b.d for b in blocks)
    rows = [[0] * d for _ in range(d)]
    off = 0
    for b in blocks:
        for i in range(b.d):
            for j in range(b.d):
                rows[off + i][off + j] = b.entries[i][j]
        off += b.d
    return ToralAutomorphism(rows)


CAT_MAP = ToralAutomorphism(((2, 1), (1, 1)))


def is_hyperbolic(A, tol=TOL_EIG):
    """Return ``(hyperbolic, moduli)`` with the eigenvalue moduli sorted ascending."""
    moduli = np.sort(np.abs(A.eigenvalues()))
    return bool(np.all(np.abs(moduli - 1.0) > tol)), moduli


def stable_unstable_dims(A, tol=TOL_EIG):
    """Counts of eigenvalues inside and outside the unit circle."""
    ok, moduli = is_hyperbolic(A, tol)
    if not ok:
        bad = moduli[np.argmin(np.abs(moduli - 1.0))]
        raise ValueError(f"automorphism is not hyperbolic: eigenvalue modulus {bad!r} is within {tol} of 1")
    n_s = int(np.sum(moduli < 1.0))
    return n_s, A.d - n_s


def check_gluing_conjugacy(B, C, D):
    """True iff ``C = D B D^-1``, checked as ``C D == D B`` over the integers."""
    if not (B.d == C.d == D.d):
        raise ValueError(f"dimension mismatch: B is {B.d}, C is {C.d}, D is {D.d}")
    return (C @ D).entries == (D @ B).entries


@dataclass(frozen=True)
class SuspensionPoint:
    x: tuple
    s: float

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) % 1.0 for v in np.ravel(self.x)))
        object.__setattr__(self, "s", float(self.s))


def suspension_flow(p, t, A):
    """Flow of the mapping torus of ``A`` for time ``t``.

    Every crossing of ``s = 1`` applies ``A`` once; backwards crossings of
    ``s = 0`` apply ``A^-1``.
    """
    total = p.s + float(t)
    n = math.floor(total)
    s = total - n
    if s >= 1.0:  # rounding guard
        s -= 1.0
        n += 1
    x = np.asarray(p.x, dtype=float)
    if n != 0:
        x = A.power(n).act(x)
    return SuspensionPoint(tuple(x), s)


def torus_distance(x, y):
    diff = np.mod(np.asarray(x, dtype=float) - np.asarray(y, dtype=float) + 0.5, 1.0) - 0.5
    return float(np.sqrt(np.sum(diff ** 2)))


def real_eigenbasis(B):
    """Real block-diagonalizing basis of a hyperbolic automorphism.

    Returns ``(P, blocks)``: columns of ``P`` span invariant blocks; each block
    is ``(slice, modulus)`` for a real eigenvalue (size 1) or a complex pair
    (size 2). In coordinates ``P^-1 v`` each block of ``B`` acts as modulus
    times an orthogonal matrix.
    """
    vals, vecs = np.linalg.eig(B.matrix)
    order = np.argsort(np.abs(vals))
    cols, blocks, used = [], [], set()
    for i in order:
        if i in used:
            continue
        lam = vals[i]
        if abs(lam.imag) < 1e-12:
            v = np.real(vecs[:, i])
            cols.append(v / np.linalg.norm(v))
            blocks.append((slice(len(cols) - 1, len(cols)), abs(lam)))
            used.add(i)
        else:
            j = next(k for k in order if k not in used and k != i and abs(vals[k] - np.conj(lam)) < 1e-9)
            v = vecs[:, i]
            start = len(cols)
            # in the basis (Re v, -Im v) the block acts by |lam| * rotation
            cols.append(np.real(v))
            cols.append(-np.imag(v))
            blocks.append((slice(start, start + 2), abs(lam)))
            used.update((i, j))
    return np.column_stack(cols), blocks


def _fit_rate(times, ratios):
    """Least-squares fit of log ratio = log C + t log lam, then the smallest C covering all samples."""
    times = np.asarray(times, dtype=float)
    ratios = np.asarray(ratios, dtype=float)
    keep = ratios > 0
    tt, lr = times[keep], np.log(ratios[keep])
    if tt.size == 0:
        return 1.0, 0.0
    if np.ptp(tt) == 0:
        lam = float(np.exp(np.max(lr) / tt[0])) if tt[0] > 0 else 1.0
    else:
        slope, _ = np.polyfit(tt, lr, 1)
        lam = float(np.exp(slope))
    C = float(np.max(np.exp(lr - tt * np.log(lam))))
    return C, lam


@dataclass
class SplittingReport:
    dim_stable: int
    dim_unstable: int
    contraction_rate: float
    expansion_rate: float
    C_adapted: float
    C_euclidean: float
    lambda_euclidean: float
    passed: bool
    offending: dict = None

    def as_dict(self):
        out = {k: v for k, v in self.__dict__.items() if k != "offending"}
        if self.offending:
            out.update({f"offending.{k}": v for k, v in self.offending.items()})
        return out


def adapted_norm(B, v, s):
    """Eigen-adapted norm of the fiber vector ``v`` at suspension height ``s``.

    In eigen-coordinates each block is scaled by ``modulus ** s``, which makes
    the norm continuous across the identification ``(v, 1) ~ (Bv, 0)``.
    """
    P, blocks = real_eigenbasis(B)
    w = np.linalg.solve(P, np.asarray(v, dtype=float))
    total = 0.0
    for sl, mod in blocks:
        total += (mod ** s) ** 2 * float(np.sum(w[sl] ** 2))
    return math.sqrt(total)


def fiber_derivative(B, s, t):
    """Vertical derivative of the suspension flow of ``B`` from height ``s`` for time ``t``."""
    n = math.floor(s + t)
    return B.power(n).matrix, (s + t) - n


def rate_samples(B, v, t_max, s0=0.0, backward=False, n_times=50):
    """Ratios ``|D Phi^{+-t} v| / |v|`` at sampled times, adapted and Euclidean."""
    times = np.linspace(t_max / n_times, t_max, n_times)
    v = np.asarray(v, dtype=float)
    a0, e0 = adapted_norm(B, v, s0), float(np.linalg.norm(v))
    ad, eu = [], []
    for t in times:
        M, s1 = fiber_derivative(B, s0, -t if backward else t)
        w = M @ v
        ad.append(adapted_norm(B, w, s1) / a0)
        eu.append(float(np.linalg.norm(w)) / e0)
    return times, np.array(ad), np.array(eu)


def fiberwise_rate_check(B, A, t_max, n_vectors=8, n_times=50, seed=0):
    """Check the fiberwise Anosov rates of the suspension of ``B x A`` over that of ``A``.

    Vectors in the stable eigenspace of ``B`` are flowed forward and vectors in
    the unstable eigenspace backward; both must shrink like ``C lam^t``.
    """
    for M, name in ((B, "B"), (A, "A")):
        ok, _ = is_hyperbolic(M)
        if not ok:
            raise ValueError(f"{name} is not hyperbolic")
    ds, du = stable_unstable_dims(B)
    P, blocks = real_eigenbasis(B)
    stable_cols = [i for sl, m in blocks if m < 1 for i in range(sl.start, sl.stop)]
    unstable_cols = [i for sl, m in blocks if m > 1 for i in range(sl.start, sl.stop)]
    rng = np.random.default_rng(seed)
    lam_s = max(m for _, m in blocks if m < 1)
    lam_u = min(m for _, m in blocks if m > 1)
    all_t, all_ad, all_eu = [], [], []
    offending = None
    for cols, backward in ((stable_cols, False), (unstable_cols, True)):
        for _ in range(n_vectors):
            v = P[:, cols] @ rng.standard_normal(len(cols))
            times, ad, eu = rate_samples(B, v, t_max, backward=backward, n_times=n_times)
            all_t.append(times)
            all_ad.append(ad)
            all_eu.append(eu)
    all_t = np.concatenate(all_t)
    all_ad = np.concatenate(all_ad)
    all_eu = np.concatenate(all_eu)
    C_ad, lam_ad = _fit_rate(all_t, all_ad)
    C_eu, lam_eu = _fit_rate(all_t, all_eu)
    passed = lam_ad < 1.0
    if not passed:
        k = int(np.argmax(all_ad))
        offending = {"t": float(all_t[k]), "ratio": float(all_ad[k])}
    return SplittingReport(ds, du, float(lam_ad), float(1.0 / lam_ad) if lam_ad > 0 else math.inf,
                           C_ad, C_eu, float(lam_eu), bool(passed), offending)


def growth_check(B, v, t_max, backward=False, n_times=50):
    """Fit ``(C, lam)`` for a single vector; ``lam >= 1`` means no contraction.

    Returns ``(passed, C, lam, offending)``. The zero vector passes trivially.
    """
    v = np.asarray(v, dtype=float)
    if not np.any(v):
        return True, 0.0, 0.0, None
    times, ad, _ = rate_samples(B, v, t_max, backward=backward, n_times=n_times)
    C, lam = _fit_rate(times, ad)
    if lam < 1.0:
        return True, C, lam, None
    k = int(np.argmax(ad))
    return False, C, lam, {"t": float(times[k]), "ratio": float(ad[k])}


def section_return_map(A, B, periods=1):
    """First-return map of the suspension of ``B x A`` to the section ``{s = 0}``.

    The integer matrix is recovered column by column from the flowed images of
    small multiples of the basis vectors, so it is computed through
    ``suspension_flow`` rather than assembled.
    """
    for M, name in ((B, "B"), (A, "A")):
        if not is_hyperbolic(M)[0]:
            raise ValueError(f"{name} is not hyperbolic")
    product = block_diag(B, A)
    d = product.d
    bound = max(1, max(sum(abs(x) for x in r) for r in product.power(periods).entries))
    h = 0.25 / bound
    cols = []
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        q = suspension_flow(SuspensionPoint(tuple(e), 0.0), float(periods), product)
        img = np.mod(np.asarray(q.x) + 0.5, 1.0) - 0.5
        cols.append(np.rint(img / h).astype(int))
    rows = np.column_stack(cols).tolist()
    return ToralAutomorphism(rows)


def read_matrix(path):
    """Read ``d`` then ``d`` rows of ``d`` integers."""
    with open(path) as fh:
        tokens = fh.read().split()
    d = int(tokens[0])
    vals = [int(x) for x in tokens[1:1 + d * d]]
    if len(vals) != d * d:
        raise ValueError(f"{path}: expected {d * d} entries, found {len(vals)}")
    return ToralAutomorphism([vals[i * d:(i + 1) * d] for i in range(d)])


def write_matrix(path, A):
    with open(path, "w") as fh:
        fh.write(f"{A.d}\n")
        for r in A.entries:
            fh.write(" ".join(str(x) for x in r) + "\n")
