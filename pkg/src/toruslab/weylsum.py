"""Oscillatory lattice sums with phase ``lam |x + k|`` and their hypotheses.

* :func:`truncated_weyl_sum` evaluates
  ``sum_k exp(2 pi i sign lam |x+k|) w(|x+k|)`` over ``1/2 <= |x+k| <= R``
  with the surrogate amplitude ``w(t) = t^(-(n-1)/2) (1 + rho t)^(-N)``.
* :func:`phi_derivative` differentiates ``Phi(u) = |Q u|`` exactly: every
  derivative of ``r(v) = |v|`` is a finite sum ``c v^b r^p`` with integer
  ``c`` and odd ``p``, and the chain rule through ``Q`` only adds integer
  linear combinations.
* :func:`hessian_certificate` samples the scaled Hessian determinant of a
  mixed partial of ``Phi``.
* :func:`coset_decomposition` splits ``Z^n`` into cosets of ``Q Z^n`` using
  the Hermite normal form.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import DomainError, ResourceError, SingularityError
from .exponents import constraint_exponent
from .kernel import BumpSpec, bump_eval
from .lattice import enumerate_ball, exact

__all__ = [
    "CosetSet",
    "HessianCertificate",
    "MullerReport",
    "WeylSum",
    "WeylSumConfig",
    "coset_decomposition",
    "coverage_scan",
    "hermite_normal_form",
    "hessian_certificate",
    "lambda_dominates",
    "muller_hypotheses_check",
    "phi_derivative",
    "phi_derivative_many",
    "smith_normal_form",
    "truncated_weyl_sum",
]

DEFAULT_EPS = 0.1
DEFAULT_MAX_TERMS = 20_000_000


# ------------------------------------------------------------- Weyl sums


@dataclass(frozen=True)
class WeylSumConfig:
    """Parameters of one truncated sum.

    ``truncation_radius`` defaults to ``rho^(-1-eps)`` and ``N`` to ``n``.
    """

    n: int
    lam: float
    rho: float
    x: tuple = ()
    sign: int = 1
    truncation_radius: float | None = None
    N: int | None = None
    eps: float = DEFAULT_EPS
    max_terms: int = DEFAULT_MAX_TERMS

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("n must be positive")
        if self.lam < 0 or self.rho <= 0:
            raise DomainError("need lam >= 0 and rho > 0")
        if self.sign not in (1, -1):
            raise DomainError("sign must be +1 or -1")
        x = tuple(float(c) for c in self.x) if self.x else (0.0,) * self.n
        if len(x) != self.n:
            raise DomainError(f"base point must have {self.n} coordinates")
        object.__setattr__(self, "x", x)
        if self.N is not None and (int(self.N) != self.N or self.N < 1):
            raise DomainError("N must be a positive integer")

    @property
    def radius(self) -> float:
        if self.truncation_radius is not None:
            return float(self.truncation_radius)
        return self.rho ** (-1.0 - self.eps)

    @property
    def decay(self) -> int:
        return int(self.N) if self.N is not None else self.n


@dataclass(frozen=True)
class WeylSum:
    value: complex
    abs_sum: float
    terms: int


def _translates(cfg: WeylSumConfig) -> np.ndarray:
    R = cfg.radius
    x = np.asarray(cfg.x)
    shift = np.round(x)
    y = x - shift
    vol = math.pi ** (cfg.n / 2) / math.gamma(cfg.n / 2 + 1) * (R + math.sqrt(cfg.n)) ** cfg.n
    if vol > cfg.max_terms:
        raise ResourceError(f"about {vol:.3g} terms exceed the budget {cfg.max_terms}")
    ks = enumerate_ball(cfg.n, math.ceil(R + math.sqrt(cfg.n))).points
    d = np.linalg.norm(ks + y, axis=1)
    return d[(d >= 0.5) & (d <= R)]


def truncated_weyl_sum(cfg: WeylSumConfig) -> WeylSum:
    """Weighted sum of ``exp(2 pi i sign lam |x+k|)`` over ``1/2 <= |x+k| <= R``.

    Terms are accumulated with :func:`math.fsum` in lexicographic ``k``
    order, so the result is bit-reproducible.
    """
    d = _translates(cfg)
    w = d ** (-(cfg.n - 1) / 2.0) * (1.0 + cfg.rho * d) ** (-float(cfg.decay))
    frac = np.mod(cfg.lam * d, 1.0)
    ang = 2.0 * np.pi * frac
    re = w * np.cos(ang)
    im = cfg.sign * w * np.sin(ang)
    return WeylSum(complex(math.fsum(re), math.fsum(im)), math.fsum(w), int(d.size))


# --------------------------------------------------- exact derivatives of |Qu|

# a derivative of r(v) = |v| is a dict {(b, p): c} meaning sum c * v^b * r^p


def _d_coordinate(poly: dict, j: int) -> dict:
    out: dict = {}
    for (b, p), c in poly.items():
        if b[j]:
            nb = b[:j] + (b[j] - 1,) + b[j + 1:]
            out[(nb, p)] = out.get((nb, p), 0) + c * b[j]
        # d/dv_j r^p = p v_j r^(p-2)
        nb = b[:j] + (b[j] + 1,) + b[j + 1:]
        out[(nb, p - 2)] = out.get((nb, p - 2), 0) + c * p
    return {k: v for k, v in out.items() if v}


@functools.lru_cache(maxsize=4096)
def _phi_poly(Q: tuple, alpha: tuple) -> tuple:
    n = len(alpha)
    poly = {((0,) * n, 1): 1}
    for i, times in enumerate(alpha):
        for _ in range(times):
            new: dict = {}
            for j in range(n):
                qji = Q[j][i]
                if qji:
                    for k, v in _d_coordinate(poly, j).items():
                        new[k] = new.get(k, 0) + qji * v
            poly = {k: v for k, v in new.items() if v}
    return tuple(poly.items())


def _as_matrix(Q, n=None) -> tuple:
    arr = np.asarray(Q)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DomainError("Q must be a square matrix")
    if not np.all(np.equal(np.mod(arr, 1), 0)):
        raise DomainError("Q must have integer entries")
    if n is not None and arr.shape[0] != n:
        raise DomainError("dimension mismatch")
    return tuple(tuple(int(v) for v in row) for row in arr)


def _check_alpha(alpha, n) -> tuple:
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != n or min(alpha) < 0:
        raise DomainError("alpha must be a multi-index of length n")
    return alpha


def phi_derivative_many(Q, alpha, us) -> np.ndarray:
    """``d^alpha |Q u|`` at each row of ``us``."""
    Qt = _as_matrix(Q)
    n = len(Qt)
    alpha = _check_alpha(alpha, n)
    us = np.atleast_2d(np.asarray(us, dtype=float))
    v = us @ np.asarray(Qt, dtype=float).T
    r = np.linalg.norm(v, axis=1)
    if np.any(r == 0):
        raise SingularityError("Q u = 0: |Q u| is not differentiable there")
    terms = _phi_poly(Qt, alpha)
    out = np.zeros(us.shape[0])
    for (b, p), c in terms:
        out += c * np.prod(v ** np.asarray(b), axis=1) * r ** p
    return out


def phi_derivative(Q, alpha, u) -> float:
    """Exact ``d^alpha Phi(u)`` for ``Phi(u) = |Q u|`` (no finite differences)."""
    return float(phi_derivative_many(Q, alpha, np.asarray(u, dtype=float)[None, :])[0])


# ------------------------------------------------------- Hessian certificates


def mixed_index(n: int, q: int) -> tuple:
    """``(1, 0, ..., 0, q-1)``; for ``q = 1`` this is ``e_1``."""
    if n < 2:
        raise DomainError("need n >= 2")
    if q < 1:
        raise DomainError("q must be >= 1")
    a = [0] * n
    a[0] += 1
    a[-1] += q - 1
    return tuple(a)


def sphere_points(n: int, count: int, seed: int = 0) -> np.ndarray:
    """Quasi-uniform unit vectors: equal angles (n=2), Fibonacci (n=3), seeded Gaussian otherwise."""
    if n == 2:
        t = 2 * np.pi * (np.arange(count) + 0.5) / count
        return np.stack([np.cos(t), np.sin(t)], axis=1)
    if n == 3:
        i = np.arange(count) + 0.5
        z = 1 - 2 * i / count
        phi = np.pi * (3 - math.sqrt(5)) * i
        s = np.sqrt(1 - z * z)
        return np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)
    g = np.random.default_rng(seed).normal(size=(count, n))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def hessian_values(Q, alpha, us) -> np.ndarray:
    """``det Hess (d^alpha Phi)`` at each row of ``us``."""
    Qt = _as_matrix(Q)
    n = len(Qt)
    H = np.empty((len(us), n, n))
    for i in range(n):
        for j in range(i, n):
            a = list(alpha)
            a[i] += 1
            a[j] += 1
            H[:, i, j] = H[:, j, i] = phi_derivative_many(Qt, a, us)
    return np.linalg.det(H)


@dataclass(frozen=True, eq=False)
class HessianCertificate:
    Q: tuple
    alpha: tuple
    radius: float
    sample_points: np.ndarray
    scaled_values: np.ndarray
    min_scaled: float
    degenerate_points: np.ndarray
    threshold: float


def hessian_certificate(Q, q: int, sphere_samples: int = 256, threshold: float = 1e-8,
                        radius: float = 1.0, seed: int = 0) -> HessianCertificate:
    """Scaled ``|det Hess d^alpha(q) Phi(u)| |u|^((q+1)n)`` on a sphere of given radius."""
    Qt = _as_matrix(Q)
    n = len(Qt)
    if exact_det(Qt) == 0:
        raise DomainError("Q must be invertible")
    alpha = mixed_index(n, q)
    us = radius * sphere_points(n, sphere_samples, seed)
    scaled = np.abs(hessian_values(Qt, alpha, us)) * radius ** ((q + 1) * n)
    return HessianCertificate(
        Q=Qt,
        alpha=alpha,
        radius=float(radius),
        sample_points=us,
        scaled_values=scaled,
        min_scaled=float(scaled.min()),
        degenerate_points=us[scaled < threshold],
        threshold=threshold,
    )


def coverage_scan(n: int, q: int, entries=range(-2, 3), directions: int = 64,
                  threshold: float = 1e-6) -> dict:
    """For each sampled direction ``v``, the best integer ``Q`` (entries from ``entries``).

    The value recorded is the scaled determinant at ``u = Q^{-1} v``, i.e.
    the non-degeneracy of ``Phi_Q`` over the region of ``v = Q u`` around
    the direction.  Returns ``{'directions', 'best_value', 'best_Q',
    'covered'}``.
    """
    alpha = mixed_index(n, q)
    vs = sphere_points(n, directions)
    best = np.zeros(directions)
    best_Q: list = [None] * directions
    for flat in itertools.product(entries, repeat=n * n):
        Q = np.array(flat, dtype=float).reshape(n, n)
        if round(abs(np.linalg.det(Q))) == 0:
            continue
        us = np.linalg.solve(Q, vs.T).T
        norms = np.linalg.norm(us, axis=1)
        val = np.abs(hessian_values(Q.astype(int), alpha, us)) * norms ** ((q + 1) * n)
        better = val > best
        best[better] = val[better]
        for i in np.flatnonzero(better):
            best_Q[i] = tuple(map(tuple, Q.astype(int).tolist()))
    return {"directions": vs, "best_value": best, "best_Q": best_Q, "covered": best > threshold}


# ------------------------------------------------------ normal forms, cosets


def _int_matrix(Q) -> list:
    Qt = _as_matrix(Q)
    return [list(row) for row in Qt]


def _bareiss(Q: list) -> int:
    M = [row[:] for row in Q]
    n, sign, prev = len(M), 1, 1
    for k in range(n - 1):
        if M[k][k] == 0:
            for i in range(k + 1, n):
                if M[i][k]:
                    M[k], M[i] = M[i], M[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                M[i][j] = (M[i][j] * M[k][k] - M[i][k] * M[k][j]) // prev
        prev = M[k][k]
    return sign * M[-1][-1]


def exact_det(Q) -> int:
    return _bareiss(_int_matrix(Q))


def hermite_normal_form(Q) -> np.ndarray:
    """Column-style HNF ``H = Q U`` (``U`` unimodular): lower triangular, positive
    diagonal, ``0 <= H[i, j] < H[i, i]`` for ``j < i``.  Requires ``det Q != 0``."""
    H = _int_matrix(Q)
    n = len(H)
    if exact_det(H) == 0:
        raise DomainError("Q is singular")

    def col_op(a, b, x, y, z, w):
        # (col a, col b) <- (x col a + y col b, z col a + w col b)
        for r in range(n):
            ca, cb = H[r][a], H[r][b]
            H[r][a], H[r][b] = x * ca + y * cb, z * ca + w * cb

    for i in range(n):
        for j in range(i + 1, n):
            a, b = H[i][i], H[i][j]
            if b == 0:
                continue
            g, s, t = _xgcd(a, b)
            col_op(i, j, s, t, -b // g, a // g)
        if H[i][i] < 0:
            for r in range(n):
                H[r][i] = -H[r][i]
        d = H[i][i]
        for j in range(i):
            f = H[i][j] // d
            if f:
                for r in range(n):
                    H[r][j] -= f * H[r][i]
    return np.array(H, dtype=np.int64)


def _xgcd(a: int, b: int):
    """``(g, s, t)`` with ``s a + t b = g = gcd(a, b) > 0``."""
    old_r, r, old_s, s, old_t, t = a, b, 1, 0, 0, 1
    while r:
        qt = old_r // r
        old_r, r = r, old_r - qt * r
        old_s, s = s, old_s - qt * s
        old_t, t = t, old_t - qt * t
    if old_r < 0:
        old_r, old_s, old_t = -old_r, -old_s, -old_t
    return old_r, old_s, old_t


def smith_normal_form(Q) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(D, U, V)`` with ``U Q V = D`` diagonal, ``d_i | d_(i+1)``, ``d_i >= 0``."""
    A = _int_matrix(Q)
    n = len(A)
    U = [[int(i == j) for j in range(n)] for i in range(n)]
    V = [[int(i == j) for j in range(n)] for i in range(n)]

    def row_comb(M, a, b, x, y, z, w):
        M[a], M[b] = ([x * p + y * q for p, q in zip(M[a], M[b])],
                      [z * p + w * q for p, q in zip(M[a], M[b])])

    def col_comb(M, a, b, x, y, z, w):
        for r in range(len(M)):
            p, q = M[r][a], M[r][b]
            M[r][a], M[r][b] = x * p + y * q, z * p + w * q

    for k in range(n):
        # bring a nonzero entry of minimal size to (k, k)
        while True:
            cand = [(abs(A[i][j]), i, j) for i in range(k, n) for j in range(k, n) if A[i][j]]
            if not cand:
                break
            _, i, j = min(cand)
            if i != k:
                A[k], A[i] = A[i], A[k]
                U[k], U[i] = U[i], U[k]
            if j != k:
                col_comb(A, k, j, 0, 1, 1, 0)
                col_comb(V, k, j, 0, 1, 1, 0)
            done = True
            for i in range(k + 1, n):
                if A[i][k]:
                    g, s, t = _xgcd(A[k][k], A[i][k])
                    a, b = A[k][k] // g, A[i][k] // g
                    row_comb(A, k, i, s, t, -b, a)
                    row_comb(U, k, i, s, t, -b, a)
            for j in range(k + 1, n):
                if A[k][j]:
                    g, s, t = _xgcd(A[k][k], A[k][j])
                    a, b = A[k][k] // g, A[k][j] // g
                    col_comb(A, k, j, s, t, -b, a)
                    col_comb(V, k, j, s, t, -b, a)
            if any(A[i][k] for i in range(k + 1, n)) or any(A[k][j] for j in range(k + 1, n)):
                done = False
            if done:
                # divisibility: fold any offending entry into row k and repeat
                bad = [(i, j) for i in range(k + 1, n) for j in range(k + 1, n) if A[i][j] % A[k][k]]
                if not bad:
                    break
                i, _ = bad[0]
                row_comb(A, k, i, 1, 1, 0, 1)
                row_comb(U, k, i, 1, 1, 0, 1)
        if A[k][k] < 0:
            A[k] = [-v for v in A[k]]
            U[k] = [-v for v in U[k]]
    return (np.array(A, dtype=np.int64), np.array(U, dtype=np.int64), np.array(V, dtype=np.int64))


@dataclass(frozen=True, eq=False)
class CosetSet:
    """Representatives of ``Z^n / Q Z^n``: the box ``0 <= b_i < H_ii`` of the HNF."""

    Q: np.ndarray
    hnf: np.ndarray
    representatives: np.ndarray
    det: int = field(default=0)

    def __len__(self) -> int:
        return self.representatives.shape[0]

    def reduce(self, ks) -> np.ndarray:
        """Representative of the coset of each row of ``ks``."""
        b = np.array(np.atleast_2d(ks), dtype=object)
        H = self.hnf.astype(object)
        for i in range(H.shape[0]):
            f = b[:, i] // H[i, i]
            b = b - f[:, None] * H[:, i][None, :]
        return b.astype(np.int64)

    def contains(self, k, b) -> bool:
        """Whether ``k - b`` lies in ``Q Z^n``, via the adjugate of ``Q``."""
        diff = np.asarray(k, dtype=object) - np.asarray(b, dtype=object)
        adj = _adjugate(self.Q.tolist())
        prod = [sum(a * d for a, d in zip(row, diff)) for row in adj]
        return all(p % self.det == 0 for p in prod)

    def index_of(self, ks) -> np.ndarray:
        lookup = {tuple(r): i for i, r in enumerate(self.representatives.tolist())}
        return np.array([lookup[tuple(r)] for r in self.reduce(ks).tolist()])


def _adjugate(Q: list) -> list:
    n = len(Q)
    if n == 1:
        return [[1]]
    adj = [[0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [row[:j] + row[j + 1:] for k, row in enumerate(Q) if k != i]
            adj[j][i] = (-1) ** (i + j) * _bareiss(minor)
    return adj


def coset_decomposition(Q) -> CosetSet:
    """Disjoint decomposition ``Z^n = union_b (b + Q Z^n)``."""
    Qm = np.array(_int_matrix(Q), dtype=np.int64)
    det = abs(exact_det(Qm.tolist()))
    if det == 0:
        raise DomainError("Q is singular")
    H = hermite_normal_form(Qm)
    ranges = [range(int(H[i, i])) for i in range(H.shape[0])]
    reps = np.array(list(itertools.product(*ranges)), dtype=np.int64).reshape(-1, H.shape[0])
    return CosetSet(Qm, H, reps, det)


# ---------------------------------------------------------- hypotheses check


def lambda_dominates(lam, M, n: int, q: int) -> bool:
    """Exact test of ``lam >= M^(q - 1 - 2/n + 2^(1-q))``."""
    lam, M = exact(lam), exact(M)
    if M < 1:
        raise DomainError("M must be >= 1")
    e = constraint_exponent(n, q)
    a, b = e.numerator, e.denominator
    if lam <= 0:
        return False
    return lam**b >= Fraction(M) ** a


def _dyadic_cutoff(t: np.ndarray) -> np.ndarray:
    # 1 on [2^(-1/2), 2^(1/2)], 0 outside (1/2, 2)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = bump_eval(BumpSpec(), 2.0 * np.log2(t[pos]))
    return out


def _radial_derivs(g, t: np.ndarray, h: float):
    """``g(t), g'(t), g''(t)`` by Richardson-extrapolated central differences."""
    def d1(step):
        return (g(t + step) - g(t - step)) / (2 * step)

    def d2(step):
        return (g(t + step) - 2 * g(t) + g(t - step)) / (step * step)

    return g(t), (4 * d1(h / 2) - d1(h)) / 3, (4 * d2(h / 2) - d2(h)) / 3


@dataclass(frozen=True)
class MullerReport:
    n: int
    q: int
    lam: float
    M: float
    exponent: Fraction
    predicate: bool
    weight_constants: dict
    phase_constants: dict


def muller_hypotheses_check(cfg: WeylSumConfig, q: int, M: float, scales=None,
                            samples: int = 400, seed: int = 0) -> MullerReport:
    """Sample the derivative bounds of the dyadic pieces of the weight and phase.

    For each scale ``j`` the translated weight is
    ``w_j(u) = 2^(j(n-1)/2) zeta(2^-j |x+u|) |x+u|^(-(n-1)/2) (1 + rho|x+u|)^(-N)``
    and the phase ``phi(u) = lam |x + u|``.  Reported constants, for
    ``|alpha| <= 2``, are ``sup |d^alpha w_j| 2^(j|alpha|)`` and
    ``sup |d^alpha phi| 2^(j(|alpha|-1)) / lam`` over seeded samples of the
    support shell.  The predicate ``lam >= M^(q-1-2/n+2^(1-q))`` is exact.
    """
    n = cfg.n
    if M < 1:
        raise DomainError("M must be >= 1")
    scales = list(scales) if scales is not None else list(range(1, max(2, int(math.log2(M))) + 1))
    rng = np.random.default_rng(seed)
    weights, phases = {}, {}
    for j in scales:
        s = 2.0**j
        t = s * rng.uniform(0.5, 2.0, samples)
        dirs = sphere_points(n, samples, seed + j) if n > 1 else np.ones((samples, 1))
        v = dirs * t[:, None]  # v = x + u

        def g(tt, s=s):
            return s ** ((n - 1) / 2) * _dyadic_cutoff(tt / s) * tt ** (-(n - 1) / 2) * (1 + cfg.rho * tt) ** (-float(cfg.decay))

        g0, g1, g2 = _radial_derivs(g, t, 1e-3 * s)
        unit = v / t[:, None]
        consts = {0: float(np.max(np.abs(g0)))}
        consts[1] = float(np.max(np.abs(g1) * s))
        # second derivatives: g'' v_i v_k / r^2 + g' (delta_ik - v_i v_k / r^2) / r
        hess = (g2[:, None, None] * unit[:, :, None] * unit[:, None, :]
                + (g1 / t)[:, None, None] * (np.eye(n)[None] - unit[:, :, None] * unit[:, None, :]))
        consts[2] = float(np.max(np.abs(hess)) * s * s)
        weights[j] = consts

        I = np.eye(n, dtype=int)
        pc = {}
        for order in (1, 2):
            best = 0.0
            for alpha in itertools.product(range(order + 1), repeat=n):
                if sum(alpha) != order:
                    continue
                val = phi_derivative_many(I, alpha, v)
                best = max(best, float(np.max(np.abs(val))))
            # d^alpha (lam |v|) / lam, in units of s^(1 - |alpha|)
            pc[order] = best * s ** (order - 1)
        phases[j] = pc
    return MullerReport(
        n=n,
        q=q,
        lam=cfg.lam,
        M=float(M),
        exponent=constraint_exponent(n, q),
        predicate=lambda_dominates(cfg.lam, M, n, q),
        weight_constants=weights,
        phase_constants=phases,
    )
