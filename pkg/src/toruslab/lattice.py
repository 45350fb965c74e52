"""Integer points in spherical annuli and spheres, and cap decompositions.

Membership is decided on squared norms in exact integer arithmetic.  Radii
are converted to :class:`~fractions.Fraction` first; a float is read through
its shortest decimal representation, so ``4.6`` means 23/5 and boundary
points such as ``|k| = lambda - rho`` are classified reproducibly.
"""

from __future__ import annotations

import decimal
import math
import numbers
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import DomainError, ResourceError

__all__ = [
    "AnnulusSpec",
    "CapCount",
    "CapCover",
    "LatticePointSet",
    "cap_cover",
    "enumerate_annulus",
    "enumerate_ball",
    "enumerate_shells",
    "enumerate_sphere",
    "exact",
    "max_cap_count",
]

DEFAULT_MAX_POINTS = 30_000_000

# Candidate directions are a cube-surface grid; the greedy selection keeps
# centres SEPARATION_FACTOR * theta apart, and the candidate grid is a
# (theta/4)-net, so every direction lies within SLACK * theta of a centre.
SEPARATION_FACTOR = 1.75
SLACK = 2.0


def exact(value) -> Fraction:
    """Exact rational value of a radius-like parameter."""
    if isinstance(value, bool):
        raise DomainError(f"expected a number, got {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, numbers.Integral):
        return Fraction(int(value))
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(value):
            raise DomainError(f"non-finite value {value!r}")
        return Fraction(repr(float(value)))
    if isinstance(value, (str, decimal.Decimal)):
        return Fraction(value)
    if isinstance(value, numbers.Rational):
        return Fraction(value.numerator, value.denominator)
    raise DomainError(f"cannot interpret {value!r} as a real parameter")


def _floor(q: Fraction) -> int:
    return q.numerator // q.denominator


def _ceil(q: Fraction) -> int:
    return -((-q.numerator) // q.denominator)


@dataclass(frozen=True)
class AnnulusSpec:
    """The open annulus ``{xi : | |xi| - lam | < rho}`` in dimension ``n``."""

    n: int
    lam: Fraction
    rho: Fraction

    def __init__(self, n, lam, rho):
        if isinstance(n, bool) or not isinstance(n, numbers.Integral) or n < 1:
            raise DomainError(f"dimension must be a positive integer, got {n!r}")
        lam_q, rho_q = exact(lam), exact(rho)
        if lam_q < 0:
            raise DomainError(f"lambda must be non-negative, got {lam}")
        if rho_q <= 0:
            raise DomainError(f"rho must be positive, got {rho}")
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "lam", lam_q)
        object.__setattr__(self, "rho", rho_q)

    @property
    def squared_bounds(self) -> tuple[int, int]:
        """Integer bounds ``(lo, hi)`` with ``lo < |k|^2 <= hi`` iff k is inside."""
        inner = self.lam - self.rho
        outer = self.lam + self.rho
        lo = _floor(inner * inner) if inner >= 0 else -1
        hi = _ceil(outer * outer) - 1
        return lo, hi

    def contains_sq(self, s: int) -> bool:
        lo, hi = self.squared_bounds
        return lo < s <= hi


@dataclass(frozen=True)
class LatticePointSet:
    """Integer points, duplicate free, in lexicographic order."""

    points: np.ndarray
    spec: object = None
    n: int = field(default=0)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.int64)
        if pts.ndim != 2:
            raise DomainError("points must be a 2-D array (count, n)")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if not self.n:
            object.__setattr__(self, "n", pts.shape[1])

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def norms_sq(self) -> np.ndarray:
        return np.einsum("ij,ij->i", self.points, self.points)

    @property
    def norms(self) -> np.ndarray:
        return np.sqrt(self.norms_sq.astype(float))

    def as_set(self) -> set[tuple[int, ...]]:
        return {tuple(int(c) for c in p) for p in self.points}


def _estimate_count(n: int, hi: int, lo: int) -> float:
    # ball volume difference plus a boundary layer of width sqrt(n)
    unit = math.pi ** (n / 2) / math.gamma(n / 2 + 1)
    r_hi = math.sqrt(hi) + math.sqrt(n)
    r_lo = max(math.sqrt(max(lo, 0)) - math.sqrt(n), 0.0)
    return unit * (r_hi**n - r_lo**n)


def enumerate_shells(n: int, lo: int, hi: int, max_points: int = DEFAULT_MAX_POINTS) -> np.ndarray:
    """All ``k`` in ``Z^n`` with ``lo < |k|^2 <= hi``, lexicographically sorted."""
    if n < 1:
        raise DomainError("dimension must be >= 1")
    if hi < 0 or hi <= lo:
        return np.empty((0, n), dtype=np.int64)
    if _estimate_count(n, hi, lo) > max_points:
        raise ResourceError(
            f"estimated lattice count for n={n}, |k|^2 <= {hi} exceeds budget {max_points}"
        )
    R = math.isqrt(hi)
    axis = np.arange(-R, R + 1, dtype=np.int64)
    if n == 1:
        s = axis * axis
        return axis[(s > lo) & (s <= hi)].reshape(-1, 1)
    grids = np.meshgrid(*([axis] * (n - 1)), indexing="ij")
    tail = np.stack([g.ravel() for g in grids], axis=1)
    tail_sq = np.einsum("ij,ij->i", tail, tail)
    keep = tail_sq <= hi
    tail, tail_sq = tail[keep], tail_sq[keep]
    chunks = []
    for k0 in axis:
        s = tail_sq + k0 * k0
        mask = (s > lo) & (s <= hi)
        if mask.any():
            sel = tail[mask]
            chunks.append(np.column_stack([np.full(len(sel), k0, dtype=np.int64), sel]))
    if not chunks:
        return np.empty((0, n), dtype=np.int64)
    return np.concatenate(chunks)


def enumerate_annulus(spec: AnnulusSpec, max_points: int = DEFAULT_MAX_POINTS) -> LatticePointSet:
    """Integer points of ``A(lam, rho)``; an empty annulus gives an empty set."""
    lo, hi = spec.squared_bounds
    return LatticePointSet(enumerate_shells(spec.n, lo, hi, max_points), spec=spec)


def enumerate_sphere(n: int, radius_sq: int, max_points: int = DEFAULT_MAX_POINTS) -> LatticePointSet:
    if isinstance(radius_sq, bool) or not isinstance(radius_sq, numbers.Integral) or radius_sq < 0:
        raise DomainError(f"radius_sq must be a non-negative integer, got {radius_sq!r}")
    radius_sq = int(radius_sq)
    return LatticePointSet(
        enumerate_shells(n, radius_sq - 1, radius_sq, max_points),
        spec=("sphere", n, radius_sq),
        n=n,
    )


def enumerate_ball(n: int, radius, max_points: int = DEFAULT_MAX_POINTS) -> LatticePointSet:
    """Closed ball ``|k| <= radius``."""
    r = exact(radius)
    if r < 0:
        raise DomainError("radius must be non-negative")
    return LatticePointSet(
        enumerate_shells(n, -1, _floor(r * r), max_points), spec=("ball", n, r), n=n
    )


# --------------------------------------------------------------------- caps


def _cube_surface_directions(n: int, pitch: float) -> np.ndarray:
    m = max(1, math.ceil(2.0 / pitch))
    h = 2.0 / m
    centres = -1.0 + h * (np.arange(m) + 0.5)
    if n == 1:
        face = np.empty((1, 0))
    else:
        grids = np.meshgrid(*([centres] * (n - 1)), indexing="ij")
        face = np.stack([g.ravel() for g in grids], axis=1)
    out = []
    for axis in range(n):
        for sign in (-1.0, 1.0):
            pts = np.insert(face, axis, sign, axis=1)
            out.append(pts)
    dirs = np.concatenate(out)
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


def _greedy_separated(candidates: np.ndarray, separation: float) -> np.ndarray:
    cos_sep = math.cos(min(separation, math.pi))
    if separation >= math.pi:
        return candidates[:1].copy()
    centres = np.empty((candidates.shape[0], candidates.shape[1]))
    count = 0
    for c in candidates:
        if count == 0 or np.max(centres[:count] @ c) < cos_sep:
            centres[count] = c
            count += 1
    return centres[:count].copy()


@dataclass(frozen=True)
class CapCover:
    """Directions whose caps cover ``lam * S^{n-1}``.

    ``theta = cap_radius / lam`` is the nominal angular radius.  Centres are
    pairwise at least ``1.75 theta`` apart and every direction lies within
    ``2 theta`` (the slack factor) of some centre.
    """

    lam: float
    cap_radius: float
    n: int
    centers: np.ndarray
    overlap: int
    assignment: np.ndarray | None = None

    @property
    def theta(self) -> float:
        return self.cap_radius / self.lam

    @property
    def slack_angle(self) -> float:
        return min(SLACK * self.theta, math.pi)

    def __len__(self) -> int:
        return self.centers.shape[0]

    def assign(self, points) -> np.ndarray:
        """Index of the nearest centre (by angle) for each point; origin -> 0."""
        pts = np.asarray(getattr(points, "points", points), dtype=float)
        if pts.shape[0] == 0:
            return np.empty(0, dtype=np.int64)
        norms = np.linalg.norm(pts, axis=1)
        dirs = pts / np.where(norms > 0, norms, 1.0)[:, None]
        out = np.empty(pts.shape[0], dtype=np.int64)
        step = max(1, 2_000_000 // max(1, len(self)))
        for start in range(0, pts.shape[0], step):
            sl = slice(start, start + step)
            out[sl] = np.argmax(dirs[sl] @ self.centers.T, axis=1)
        out[norms == 0] = 0
        return out

    def angular_distance(self, points, assignment=None) -> np.ndarray:
        pts = np.asarray(getattr(points, "points", points), dtype=float)
        if assignment is None:
            assignment = self.assign(pts)
        norms = np.linalg.norm(pts, axis=1)
        dirs = pts / np.where(norms > 0, norms, 1.0)[:, None]
        cosines = np.einsum("ij,ij->i", dirs, self.centers[assignment])
        ang = np.arccos(np.clip(cosines, -1.0, 1.0))
        ang[norms == 0] = 0.0
        return ang


def cap_cover(lam, cap_radius, n: int, points=None) -> CapCover:
    """Deterministic cover of ``lam * S^{n-1}`` by caps of radius ``cap_radius``.

    If ``points`` is given, the nearest-centre assignment is stored on the
    returned cover.
    """
    lam_f, r_f = float(lam), float(cap_radius)
    if not (math.isfinite(lam_f) and lam_f > 0):
        raise DomainError(f"lambda must be positive, got {lam}")
    if not (math.isfinite(r_f) and r_f > 0):
        raise DomainError(f"cap radius must be positive, got {cap_radius}")
    if n < 2:
        raise DomainError("caps need n >= 2")
    theta = r_f / lam_f
    pitch = theta / (2.0 * math.sqrt(n - 1))
    candidates = _cube_surface_directions(n, pitch)
    centres = _greedy_separated(candidates, SEPARATION_FACTOR * theta)
    reach = math.cos(min(SLACK * theta, math.pi))
    overlap = int(np.max(np.sum(candidates @ centres.T >= reach - 1e-12, axis=1)))
    cover = CapCover(lam_f, r_f, n, centres, overlap)
    if points is not None:
        object.__setattr__(cover, "assignment", cover.assign(points))
    return cover


@dataclass(frozen=True)
class CapCount:
    max_count: int
    ratio: float
    counts: np.ndarray


def max_cap_count(points: LatticePointSet, cover: CapCover, r: float | None = None) -> CapCount:
    """Largest number of points in one cap and its ratio to ``(r lam)^((n-1)/2)``.

    ``r`` defaults to ``cap_radius**2 / lam`` (the annulus width that the cap
    radius ``sqrt(r lam)`` is adapted to).
    """
    n = cover.n
    if r is None:
        r = cover.cap_radius**2 / cover.lam
    if len(points) == 0:
        return CapCount(0, 0.0, np.zeros(len(cover), dtype=np.int64))
    assignment = cover.assign(points)
    counts = np.bincount(assignment, minlength=len(cover))
    m = int(counts.max())
    return CapCount(m, m / (r * cover.lam) ** ((n - 1) / 2), counts)
