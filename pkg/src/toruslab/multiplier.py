"""Fourier multipliers on the torus ``T^n = R^n / Z^n``.

Conventions:

* ``f^(k) = int_{[0,1)^n} f(x) exp(-2 pi i k.x) dx``;
* ``-Laplacian exp(2 pi i k.x) = |k|^2 exp(2 pi i k.x)``, so the spectral
  parameter ``lam`` is matched against ``|k|`` and the resolvent symbol is
  ``1 / (z - |k|^2)``; the factor ``4 pi^2`` is absorbed;
* DFT bin ``j`` of an ``N``-point axis carries the signed frequency in
  ``(-N/2, N/2]`` congruent to ``j`` mod ``N``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AccuracyError, DomainError, SingularityError
from .kernel import BumpSpec, bump_eval, radial_ft_batch, sphere_area, _sphere_ft_array
from .lattice import AnnulusSpec, enumerate_annulus, enumerate_ball, DEFAULT_MAX_POINTS

__all__ = [
    "EtaSpec",
    "GridFunction",
    "MultiplierSymbol",
    "ResolventPoint",
    "apply_symbol",
    "build_resolvent_symbol",
    "build_sharp_symbol",
    "build_smooth_symbol",
    "default_grid_size",
    "lp_norm",
    "mollified_split",
]

SINGULAR_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class MultiplierSymbol:
    """Finitely supported symbol ``k -> values[i]`` for ``k = support[i]``."""

    n: int
    support: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        sup = np.asarray(self.support, dtype=np.int64).reshape(-1, self.n)
        vals = np.asarray(self.values)
        if vals.shape != (sup.shape[0],):
            raise DomainError("one value per support point required")
        if not np.all(np.isfinite(vals)):
            raise DomainError("symbol values must be finite")
        if np.unique(sup, axis=0).shape[0] != sup.shape[0]:
            raise DomainError("support contains duplicate lattice points")
        sup.setflags(write=False)
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "support", sup)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.support.shape[0]

    @property
    def max_freq(self) -> int:
        return int(np.abs(self.support).max()) if len(self) else 0

    def as_dict(self) -> dict:
        return {tuple(int(c) for c in k): v for k, v in zip(self.support.tolist(), self.values.tolist())}

    def pointwise(self, other: "MultiplierSymbol") -> "MultiplierSymbol":
        """Product symbol, supported on the common support."""
        b = other.as_dict()
        keep = [i for i, k in enumerate(map(tuple, self.support.tolist())) if k in b]
        sup = self.support[keep]
        vals = self.values[keep] * np.array([b[tuple(k)] for k in sup.tolist()]).reshape(-1)
        return MultiplierSymbol(self.n, sup, vals, {"kind": "product"})


def _check_lam_rho(lam, rho):
    if float(lam) < 1:
        raise DomainError("lam must be >= 1")
    if float(rho) <= 0:
        raise DomainError("rho must be positive")


def build_smooth_symbol(lam, rho, bump: BumpSpec, n: int,
                        max_points: int = DEFAULT_MAX_POINTS) -> MultiplierSymbol:
    """``beta((|k| - lam)/rho)`` on the lattice points of ``A(lam, outer*rho)``."""
    _check_lam_rho(lam, rho)
    pts = enumerate_annulus(AnnulusSpec(n, lam, bump.outer * float(rho)), max_points)
    vals = bump_eval(bump, (pts.norms - float(lam)) / float(rho))
    vals = np.atleast_1d(np.asarray(vals, dtype=float))
    keep = vals > 0
    return MultiplierSymbol(
        n, pts.points[keep], vals[keep], {"kind": "smooth", "lam": float(lam), "rho": float(rho)}
    )


def build_sharp_symbol(lam, rho, n: int, max_points: int = DEFAULT_MAX_POINTS) -> MultiplierSymbol:
    """Indicator of ``Z^n`` intersected with the open annulus ``A(lam, rho)``."""
    if float(lam) < 0 or float(rho) <= 0:
        raise DomainError("need lam >= 0 and rho > 0")
    pts = enumerate_annulus(AnnulusSpec(n, lam, rho), max_points)
    return MultiplierSymbol(
        n, pts.points, np.ones(len(pts)), {"kind": "sharp", "lam": float(lam), "rho": float(rho)}
    )


@dataclass(frozen=True)
class ResolventPoint:
    lam: float
    mu: float

    def __post_init__(self):
        if self.lam < 1:
            raise DomainError("resolvent point needs lam >= 1")
        if self.mu == 0:
            raise DomainError("resolvent point needs mu != 0")

    @property
    def z(self) -> complex:
        return complex(self.lam, self.mu) ** 2


def spectral_distance(zp: ResolventPoint, n: int) -> float:
    """``min_k |z - |k|^2|`` over all of ``Z^n``.

    Only the nearest shell ``s = |k|^2`` on either side of ``Re z`` matters.
    """
    z = zp.z
    # every s >= 0 is a sum of 4 squares; for n < 4 scan until representable
    def representable(s):
        if n >= 4:
            return True
        if n == 1:
            return math.isqrt(s) ** 2 == s
        lim = math.isqrt(s)
        for a in range(lim + 1):
            rest = s - a * a
            if n == 2:
                if math.isqrt(rest) ** 2 == rest:
                    return True
            else:
                for b in range(math.isqrt(rest) + 1):
                    c = rest - b * b
                    if math.isqrt(c) ** 2 == c:
                        return True
        return False

    # |z - s| grows with |s - Re z|, so the nearest representable shell on
    # each side of Re z attains the minimum
    below = max(0, math.floor(z.real))
    while below >= 0 and not representable(below):
        below -= 1
    above = max(0, math.floor(z.real) + 1)
    while not representable(above):
        above += 1
    best = abs(z - above)
    if below >= 0:
        best = min(best, abs(z - below))
    return best


def build_resolvent_symbol(zp: ResolventPoint, cutoff_radius: float, n: int,
                           max_points: int = DEFAULT_MAX_POINTS) -> MultiplierSymbol:
    """``1 / (z - |k|^2)`` on ``|k| <= cutoff_radius``.

    ``meta['tail_sup']`` bounds the omitted values, ``1 / (cutoff^2 - |z|)``.
    """
    if cutoff_radius < 4 * zp.lam:
        raise DomainError("cutoff radius must be at least 4*lam")
    dist = spectral_distance(zp, n)
    if dist < SINGULAR_TOL:
        raise SingularityError(f"z = {zp.z} lies within {dist:.3g} of the spectrum")
    pts = enumerate_ball(n, cutoff_radius, max_points)
    z = zp.z
    vals = 1.0 / (z - pts.norms_sq.astype(float))
    tail = 1.0 / (cutoff_radius**2 - abs(z))
    return MultiplierSymbol(
        n,
        pts.points,
        vals,
        {"kind": "resolvent", "lam": zp.lam, "mu": zp.mu, "cutoff": float(cutoff_radius),
         "spectral_distance": dist, "tail_sup": tail},
    )


# ------------------------------------------------------------------ grids


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Samples ``f(j/N)`` on the uniform grid of ``[0,1)^n``, shape ``(N,)*n``."""

    n: int
    N: int
    samples: np.ndarray

    def __post_init__(self):
        if self.N < 2:
            raise DomainError("grid needs N >= 2")
        arr = np.array(self.samples, dtype=complex)
        if arr.shape != (self.N,) * self.n:
            raise DomainError(f"samples must have shape {(self.N,) * self.n}")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @classmethod
    def from_coefficients(cls, n: int, N: int, support, coeffs) -> "GridFunction":
        support = np.asarray(support, dtype=np.int64).reshape(-1, n)
        _check_alias(support, N)
        spec = np.zeros((N,) * n, dtype=complex)
        np.add.at(spec, tuple((support % N).T), np.asarray(coeffs, dtype=complex))
        return cls(n, N, np.fft.ifftn(spec) * N**n)

    def coefficients(self) -> np.ndarray:
        """Fourier coefficients as an ``(N,)*n`` array indexed by DFT bin."""
        return np.fft.fftn(self.samples) / self.N**self.n

    def coefficient_at(self, support) -> np.ndarray:
        support = np.asarray(support, dtype=np.int64).reshape(-1, self.n)
        return self.coefficients()[tuple((support % self.N).T)]


def signed_frequencies(N: int) -> np.ndarray:
    """Signed frequency of each DFT bin, in ``(-N/2, N/2]``."""
    j = np.arange(N)
    return np.where(j <= N // 2, j, j - N)


def _check_alias(support: np.ndarray, N: int):
    if support.size and not N > 2 * int(np.abs(support).max()):
        raise DomainError(
            f"grid N={N} aliases frequency {int(np.abs(support).max())}; need N > 2*max|k|"
        )


def default_grid_size(lam: float, rho: float) -> int:
    return 2 ** math.ceil(math.log2(4 * (lam + 2 * rho)))


def symbol_array(m: MultiplierSymbol, N: int) -> np.ndarray:
    _check_alias(m.support, N)
    arr = np.zeros((N,) * m.n, dtype=complex)
    arr[tuple((m.support % N).T)] = m.values
    return arr


def apply_symbol(m: MultiplierSymbol, f: GridFunction) -> GridFunction:
    """``m(D) f``: forward DFT, multiply by ``m`` (zero off its support), inverse DFT."""
    if m.n != f.n:
        raise DomainError("dimension mismatch between symbol and grid function")
    out = np.fft.ifftn(np.fft.fftn(f.samples) * symbol_array(m, f.N))
    return GridFunction(f.n, f.N, out)


def lp_norm(f: GridFunction, p: float) -> float:
    """``(N^-n sum |f(x_j)|^p)^(1/p)``, or the max for ``p = inf``.

    Exact for band-limited ``|f|^p`` (e.g. p = 2 with N above the band); for
    other p it is a Riemann sum whose error is not bounded here.
    """
    if not p >= 1:
        raise DomainError("p must be >= 1")
    a = np.abs(f.samples).ravel()
    top = float(a.max()) if a.size else 0.0
    if math.isinf(p) or top == 0.0:
        return top
    return top * float(np.mean((a / top) ** p)) ** (1.0 / p)


# ------------------------------------------------------------ mollification


@dataclass(frozen=True)
class EtaSpec:
    """The mollifier ``eta``: its inverse transform is a radial bump.

    ``eta_check(y) = bump(|y|)`` with the default bump equal to 1 on
    ``|y| <= 1`` and vanishing for ``|y| >= 2``.  ``window`` is the
    half-width of the annulus ``A(lam, window)`` on which ``m0`` is kept.
    """

    bump: BumpSpec = BumpSpec()
    window: float = 4.0


def _m0_values(m_bump, lam, rho, n, eta: EtaSpec, radii, panels_per_unit):
    # m0 = m * eta  <=>  check(m0) = check(m) * check(eta), a radial function on |y| <= outer
    R = eta.bump.outer
    count = max(16, math.ceil(R * panels_per_unit))
    edges = np.linspace(0.0, R, count + 1)
    gx, gw = np.polynomial.legendre.leggauss(8)
    mid, half = 0.5 * (edges[:-1] + edges[1:]), 0.5 * np.diff(edges)
    y = (mid[:, None] + half[:, None] * gx).ravel()
    w = (half[:, None] * gw).ravel()
    F = radial_ft_batch(m_bump, lam, rho, y, n)
    g = sphere_area(n) * F * bump_eval(eta.bump, y) * y ** (n - 1) * w
    out = np.empty(radii.size)
    for start in range(0, radii.size, 512):
        r = radii[start:start + 512]
        out[start:start + 512] = _sphere_ft_array(n, np.outer(r, y).ravel()).reshape(r.size, y.size) @ g
    return out


def mollified_split(m: MultiplierSymbol, eta: EtaSpec | None = None,
                    bump: BumpSpec | None = None, check_tol: float = 1e-8):
    """Split a smooth annulus symbol as ``m = m0 + m1`` with ``m0 = m * eta``.

    ``m0`` is evaluated by the convolution theorem as the Fourier transform
    of ``check(m) * check(eta)`` (a radial integral over ``|y| <= 2``) on the
    lattice points of ``A(lam, window)``; ``m1 = m - m0`` on the union of
    supports.  A coarser quadrature at a few points guards accuracy.
    """
    if m.meta.get("kind") != "smooth":
        raise DomainError("mollified_split needs a smooth annulus symbol")
    eta = eta or EtaSpec()
    bump = bump or BumpSpec()
    lam, rho, n = m.meta["lam"], m.meta["rho"], m.n
    window = max(eta.window, bump.outer * rho)
    pts = enumerate_annulus(AnnulusSpec(n, lam, window))
    norms = pts.norms
    freq = lam + bump.outer * rho + window
    fine = 16.0 * freq
    radii, inverse = np.unique(norms, return_inverse=True)
    v0 = _m0_values(bump, lam, rho, n, eta, radii, fine)[inverse]

    probe = radii[:: max(1, radii.size // 8)]
    coarse = _m0_values(bump, lam, rho, n, eta, probe, fine / 2)
    ref = _m0_values(bump, lam, rho, n, eta, probe, fine)
    scale = max(rho, float(np.max(np.abs(ref))) if ref.size else 0.0)
    if np.max(np.abs(coarse - ref)) > check_tol * scale:
        raise AccuracyError("mollifier convolution quadrature did not converge")

    m0 = MultiplierSymbol(n, pts.points, v0, {"kind": "mollified", "lam": lam, "rho": rho,
                                               "window": window})
    # window covers supp m since window >= outer*rho
    mvals = m.as_dict()
    full = np.array([mvals.get(tuple(k), 0.0) for k in pts.points.tolist()])
    m1 = MultiplierSymbol(n, pts.points, full - v0, {"kind": "oscillatory", "lam": lam, "rho": rho,
                                                      "window": window})
    return m0, m1
