"""Empirical operator norms, test families and lambda-scaling sweeps.

Every measured norm here is a lower bound (a ratio attained by a concrete
test function, or a sampled supremum), so assertions built on these numbers
are one-sided or compare fitted constants across a sweep.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np
from scipy.fft import next_fast_len

from . import __version__
from .errors import DomainError
from .exponents import beta_n, omega
from .kernel import BumpSpec, kernel_direct
from .lattice import AnnulusSpec, cap_cover, enumerate_annulus, enumerate_sphere
from .multiplier import (
    GridFunction,
    MultiplierSymbol,
    ResolventPoint,
    apply_symbol,
    build_sharp_symbol,
    build_smooth_symbol,
    lp_norm,
    mollified_split,
    spectral_distance,
)
from .weylsum import WeylSumConfig, truncated_weyl_sum

__all__ = [
    "EXPERIMENTS",
    "NormBound",
    "ScalingReport",
    "TestFamily",
    "discrete_restriction_probe",
    "empirical_ratio",
    "fit_slope",
    "op_norm_1_inf",
    "op_norm_l2",
    "parse_lambda_grid",
    "resolvent_shell_symbol",
    "scaling_sweep",
    "tstar_t_witness",
]

FAMILIES = ("random-sign", "random-gaussian", "focusing", "knapp-cap")


# --------------------------------------------------------------- norms


def op_norm_l2(m: MultiplierSymbol) -> float:
    """``L^2 -> L^2`` norm of ``m(D)``: ``max |m(k)|`` (exact)."""
    return float(np.max(np.abs(m.values))) if len(m) else 0.0


def kernel_grid(m: MultiplierSymbol, N: int) -> np.ndarray:
    """``sum_k m(k) exp(2 pi i k.x)`` at ``x = j/N``; colliding bins add, so any N is exact."""
    arr = np.zeros((N,) * m.n, dtype=complex)
    np.add.at(arr, tuple((m.support % N).T), m.values)
    return np.fft.ifftn(arr) * N**m.n


@dataclass(frozen=True)
class NormBound:
    lower: float
    upper: float
    argmax: tuple
    grid: int

    @property
    def relative_gap(self) -> float:
        return (self.upper - self.lower) / self.lower if self.lower else math.inf


def _golden_max(f, a: float, b: float, iters: int = 40):
    g = (math.sqrt(5) - 1) / 2
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def op_norm_1_inf(m: MultiplierSymbol, N: int | None = None, sweeps: int = 2) -> NormBound:
    """``L^1 -> L^inf`` norm of ``m(D)``, i.e. ``sup_x |K(x)|`` of its kernel.

    Coarse FFT grid, then coordinate-wise golden-section refinement around
    the best grid point.  ``lower`` is an attained value; ``upper`` adds to
    the grid maximum the smaller of the Lipschitz bound ``L h sqrt(n)/2``
    (``L = 2 pi sum |m||k|``) and the curvature bound
    ``(1/2) 4 pi^2 sum |m||k|^2 (h sqrt(n)/2)^2``, valid since the modulus
    has zero gradient at an interior maximum.
    """
    n = m.n
    if not len(m):
        return NormBound(0.0, 0.0, (0.0,) * n, 0)
    if N is None:
        N = next_fast_len(max(64, (16 if n <= 2 else 4) * m.max_freq))
    K = np.abs(kernel_grid(m, N))
    j = np.unravel_index(int(np.argmax(K)), K.shape)
    grid_max = float(K[j])
    x = np.array(j, dtype=float) / N
    best = grid_max
    h = 1.0 / N
    for _ in range(sweeps):
        for axis in range(n):
            def f(t, axis=axis):
                y = x.copy()
                y[axis] = t
                return abs(kernel_direct(m, y))

            t, val = _golden_max(f, x[axis] - h, x[axis] + h)
            if val > best:
                best, x[axis] = val, t
    absm = np.abs(m.values)
    knorm = np.linalg.norm(m.support, axis=1)
    d = h * math.sqrt(n) / 2
    lip = 2 * math.pi * float(absm @ knorm) * d
    curv = 0.5 * 4 * math.pi**2 * float(absm @ knorm**2) * d * d
    upper = max(best, grid_max + min(lip, curv))
    return NormBound(best, upper, tuple(float(c) for c in np.mod(x, 1.0)), N)


# --------------------------------------------------------- test families


@dataclass(frozen=True)
class TestFamily:
    """Generator of band-limited test functions.

    ``window = (lam, width)`` restricts frequencies to ``A(lam, width)``
    intersected with the symbol support; ``None`` uses the whole support.
    ``cap_radius`` (knapp-cap) defaults to ``sqrt(rho lam)``.
    """

    __test__ = False

    kind: str
    seed: int = 0
    window: tuple | None = None
    cap_radius: float | None = None
    cap_index: int | None = None

    def __post_init__(self):
        if self.kind not in FAMILIES:
            raise DomainError(f"unknown test family {self.kind!r}; choose from {FAMILIES}")


def _frequencies(m: MultiplierSymbol, family: TestFamily) -> np.ndarray:
    sup = m.support
    if family.window is not None:
        lam, width = family.window
        nsq = np.sum(sup.astype(np.int64) ** 2, axis=1)
        lo, hi = AnnulusSpec(m.n, lam, width).squared_bounds
        sup = sup[(nsq > lo) & (nsq <= hi)]
    return sup


def _knapp_frequencies(freqs: np.ndarray, m: MultiplierSymbol, family: TestFamily) -> np.ndarray:
    lam = m.meta.get("lam") or float(np.median(np.linalg.norm(freqs, axis=1)))
    rho = m.meta.get("rho", 1.0)
    radius = family.cap_radius or math.sqrt(rho * lam)
    cover = cap_cover(lam, radius, m.n, points=None)
    assign = cover.assign(freqs)
    if family.cap_index is not None:
        cap = family.cap_index
    else:
        cap = int(np.argmax(np.bincount(assign, minlength=len(cover))))
    return freqs[assign == cap]


def generate(m: MultiplierSymbol, family: TestFamily, trials: int, rng=None):
    """Yield ``(support, coefficients)`` for each trial."""
    rng = rng or np.random.default_rng(family.seed)
    freqs = _frequencies(m, family)
    if family.kind == "knapp-cap":
        freqs = _knapp_frequencies(freqs, m, family)
    for _ in range(trials if family.kind in ("random-sign", "random-gaussian") else 1):
        if family.kind == "random-sign":
            c = rng.choice([-1.0, 1.0], size=len(freqs))
        elif family.kind == "random-gaussian":
            c = rng.normal(size=len(freqs)) + 1j * rng.normal(size=len(freqs))
        else:
            c = np.ones(len(freqs))
        yield freqs, c


def ratio_grid_size(m: MultiplierSymbol) -> int:
    return next_fast_len(max(64, 4 * m.max_freq + 1))


@dataclass(frozen=True)
class RatioResult:
    value: float
    ratios: tuple
    grid: int


def empirical_ratio(m: MultiplierSymbol, p_out: float, p_in: float, family: TestFamily,
                    trials: int = 4, N: int | None = None) -> RatioResult:
    """``max ||m(D) f||_{p_out} / ||f||_{p_in}`` over generated ``f``; zero-norm ``f`` skipped."""
    N = N or ratio_grid_size(m)
    ratios = []
    for sup, c in generate(m, family, trials):
        if not len(sup):
            continue
        f = GridFunction.from_coefficients(m.n, N, sup, c)
        den = lp_norm(f, p_in)
        if den == 0:
            continue
        ratios.append(lp_norm(apply_symbol(m, f), p_out) / den)
    return RatioResult(max(ratios) if ratios else 0.0, tuple(ratios), N)


def tstar_t_witness(m: MultiplierSymbol, f: GridFunction, p: float) -> tuple[float, float]:
    """``(r, R)`` with ``r = ||h||_p / ||h||_2`` for ``h = m(D) f`` and ``R`` the
    ``p' -> p`` ratio of ``phi = |h|^(p-2) h``.

    For a self-adjoint projection ``R >= r^2`` (Holder and Cauchy-Schwarz on the
    grid), so a measured ``L^2 -> L^p`` witness always yields a ``p' -> p``
    witness at least its square.
    """
    h = apply_symbol(m, f)
    phi = GridFunction(m.n, f.N, np.abs(h.samples) ** (p - 2) * h.samples)
    pd = p / (p - 1)
    r = lp_norm(h, p) / lp_norm(h, 2)
    R = lp_norm(apply_symbol(m, phi), p) / lp_norm(phi, pd)
    return r, R


def resolvent_shell_symbol(zp: ResolventPoint, width: float, n: int) -> MultiplierSymbol:
    """``1/(z - |k|^2)`` restricted to the lattice points of ``A(lam, width)``.

    For test functions with frequencies in that shell this is the resolvent
    exactly.
    """
    pts = enumerate_annulus(AnnulusSpec(n, zp.lam, width))
    vals = 1.0 / (zp.z - pts.norms_sq.astype(float))
    return MultiplierSymbol(n, pts.points, vals, {"kind": "resolvent-shell", "lam": zp.lam,
                                                   "mu": zp.mu, "width": width,
                                                   "spectral_distance": spectral_distance(zp, n)})


def discrete_restriction_probe(n: int, lambda_sq: int, trials: int = 8, seed: int = 0,
                               N: int | None = None) -> float:
    """``max ||sum a_k e(k.x)||_{2n/(n-2)} / ||a||_2`` over random-sign ``a`` on the sphere."""
    if n < 3:
        raise DomainError("discrete restriction probe needs n >= 3")
    pts = enumerate_sphere(n, int(lambda_sq)).points
    if not len(pts):
        raise DomainError(f"no lattice points with |k|^2 = {lambda_sq}")
    p = 2 * n / (n - 2)
    K = int(np.abs(pts).max())
    N = N or next_fast_len(max(16, 4 * K + 1))
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(trials):
        a = rng.choice([-1.0, 1.0], size=len(pts))
        g = GridFunction.from_coefficients(n, N, pts, a)
        best = max(best, lp_norm(g, p) / float(np.linalg.norm(a)))
    return best


# ------------------------------------------------------------- sweeps


def parse_lambda_grid(spec) -> list:
    """``"8:256:geometric"`` -> powers of two from 8 to 256; lists pass through."""
    if isinstance(spec, (list, tuple)):
        return [float(v) for v in spec]
    parts = str(spec).split(":")
    if len(parts) == 1:
        return [float(v) for v in parts[0].split(",")]
    lo, hi = float(parts[0]), float(parts[1])
    kind = parts[2] if len(parts) > 2 else "geometric"
    if kind != "geometric" or lo <= 0 or hi < lo:
        raise DomainError(f"cannot parse lambda grid {spec!r}")
    out, v = [], lo
    while v <= hi * (1 + 1e-12):
        out.append(v)
        v *= 2
    return out


def fit_slope(lams, values) -> float:
    lams, values = np.asarray(lams, float), np.asarray(values, float)
    if len(lams) < 4:
        raise DomainError("a slope fit needs at least 4 lambda points")
    if lams.max() / lams.min() < 8 * (1 - 1e-12):
        raise DomainError("a slope fit needs lambda to span at least 3 octaves")
    if np.any(values <= 0):
        raise DomainError("slope fit needs positive values")
    return float(np.polyfit(np.log(lams), np.log(values), 1)[0])


@dataclass(frozen=True)
class ScalingReport:
    experiment: str
    config: dict
    points: list
    fitted_slope: float
    predicted_slope: Fraction
    residual: float
    seeds: list
    extras: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["predicted_slope"] = f"{self.predicted_slope.numerator}/{self.predicted_slope.denominator}"
        d["points"] = [{"lambda": lam, "value": v} for lam, v in self.points]
        d["extras"] = {k: (f"{v.numerator}/{v.denominator}" if isinstance(v, Fraction) else v)
                       for k, v in self.extras.items()}
        d["version"] = __version__
        return d

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True, default=_json_default)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lambda", "value"])
        for lam, v in self.points:
            w.writerow([format(lam, ".17g"), format(v, ".17g")])
        return buf.getvalue()

    @property
    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.config, sort_keys=True, default=str).encode()).hexdigest()[:16]


def _json_default(v):
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    raise TypeError(type(v))


def _as_exact(v) -> Fraction:
    """Exact rational from a Fraction, int, ``"p/q"`` string or float (via its repr)."""
    return Fraction(repr(v)) if isinstance(v, float) else Fraction(v)


def _num(cfg: dict, key: str) -> float:
    return float(_as_exact(cfg[key]))


def _exp_proj_norm(lam, cfg, seed):
    n = cfg["n"]
    rho = lam ** (-_num(cfg, "rho_exp"))
    m = build_sharp_symbol(lam, rho, n)
    fam = TestFamily(cfg.get("family", "focusing"), seed)
    return empirical_ratio(m, 2 * n / (n - 2), 2 * n / (n + 2), fam, cfg.get("trials", 2)).value


def _exp_resolvent(lam, cfg, seed):
    n = cfg["n"]
    zp = ResolventPoint(lam, lam ** (-_num(cfg, "rho_exp")))
    m = resolvent_shell_symbol(zp, cfg.get("width", 1.0), n)
    fam = TestFamily(cfg.get("family", "random-sign"), seed)
    return empirical_ratio(m, 2 * n / (n - 2), 2 * n / (n + 2), fam, cfg.get("trials", 2)).value


def _exp_crude_kernel(lam, cfg, seed):
    n = cfg["n"]
    rho = lam ** (-_num(cfg, "rho_exp"))
    _, m1 = mollified_split(build_smooth_symbol(lam, rho, BumpSpec(), n))
    return op_norm_1_inf(m1).lower


def _exp_stein_tomas(lam, cfg, seed):
    n = cfg["n"]
    m = build_sharp_symbol(lam, cfg.get("r", 1.0), n)
    fam = TestFamily(cfg.get("family", "focusing"), seed)
    return empirical_ratio(m, 2 * (n + 1) / (n - 1), 2.0, fam, cfg.get("trials", 1)).value


def _exp_weyl_refined(lam, cfg, seed):
    n = cfg["n"]
    beta = _num(cfg, "beta")
    rho = lam ** (-beta)
    xs = np.random.default_rng(seed).uniform(-0.5, 0.5, (cfg.get("samples", 20), n))
    sup = max(abs(truncated_weyl_sum(WeylSumConfig(n, lam, rho, tuple(x))).value) for x in xs)
    return rho * lam ** ((n - 1) / 2) * sup


def _predict(experiment: str, cfg: dict) -> tuple[Fraction, dict]:
    n = cfg["n"]
    if experiment == "proj-norm":
        return 1 - _as_exact(cfg["rho_exp"]), {}
    if experiment == "resolvent-uniformity":
        return Fraction(0), {}
    if experiment == "crude-kernel":
        return Fraction(n - 1, 2) * (1 + _as_exact(cfg["rho_exp"])), {}
    if experiment == "stein-tomas":
        return Fraction(n - 1, 2 * (n + 1)), {}
    if experiment == "weyl-refined":
        beta = _as_exact(cfg["beta"])
        q = cfg.get("q", 3)
        w = omega(n, q)
        crude = Fraction(n - 1, 2) * (1 + beta)
        return crude, {"refined_slope": crude + w - w * (q + 1) * beta, "omega": w}
    raise DomainError(f"unknown experiment {experiment!r}")


EXPERIMENTS = {
    "proj-norm": (_exp_proj_norm, {"n": 3, "rho_exp": "1/3", "family": "focusing", "trials": 2}),
    "resolvent-uniformity": (_exp_resolvent, {"n": 3, "rho_exp": "1/3", "family": "random-sign",
                                              "trials": 2, "width": 1.0}),
    "crude-kernel": (_exp_crude_kernel, {"n": 2, "rho_exp": "1/3"}),
    "stein-tomas": (_exp_stein_tomas, {"n": 3, "r": 1.0, "family": "focusing", "trials": 1}),
    "weyl-refined": (_exp_weyl_refined, {"n": 3, "beta": None, "q": 3, "samples": 20}),
}


def default_config(experiment: str, n: int | None = None) -> dict:
    if experiment not in EXPERIMENTS:
        raise DomainError(f"unknown experiment {experiment!r}; choose from {sorted(EXPERIMENTS)}")
    cfg = dict(EXPERIMENTS[experiment][1])
    if n is not None:
        cfg["n"] = n
    if experiment == "weyl-refined" and cfg["beta"] is None:
        b = beta_n(cfg["n"]) - Fraction(1, 50)
        cfg["beta"] = f"{b.numerator}/{b.denominator}"
    return cfg


def scaling_sweep(experiment: str, lambda_grid, config: dict | None = None, seed: int = 0) -> ScalingReport:
    """Measure the experiment's quantity at each lambda and fit a log-log slope."""
    cfg = default_config(experiment, (config or {}).get("n"))
    cfg.update(config or {})
    lams = parse_lambda_grid(lambda_grid)
    if len(lams) < 4:
        raise DomainError("a sweep needs at least 4 lambda points")
    run = EXPERIMENTS[experiment][0]
    seeds = [int(seed) + i for i in range(len(lams))]
    for key in ("rho_exp", "beta"):
        if cfg.get(key) is not None:
            v = _as_exact(cfg[key])
            cfg[key] = f"{v.numerator}/{v.denominator}"
    points = [(lam, float(run(lam, cfg, s))) for lam, s in zip(lams, seeds)]
    slope = fit_slope([p[0] for p in points], [p[1] for p in points])
    predicted, extras = _predict(experiment, cfg)
    extras = {**extras, "note": "empirical values are lower bounds; slopes compare one-sidedly"}
    return ScalingReport(experiment, cfg, points, slope, predicted, slope - float(predicted), seeds, extras)
