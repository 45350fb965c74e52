import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import j0

from toruslab.errors import DomainError, SingularityError
from toruslab.kernel import BumpSpec, bump_eval
from toruslab.lattice import AnnulusSpec, cap_cover, enumerate_annulus
from toruslab.multiplier import (
    GridFunction,
    MultiplierSymbol,
    ResolventPoint,
    apply_symbol,
    build_resolvent_symbol,
    build_sharp_symbol,
    build_smooth_symbol,
    default_grid_size,
    lp_norm,
    mollified_split,
    signed_frequencies,
)

B = BumpSpec()


def random_band_limited(n, N, radius, rng):
    sup = np.array(
        [k for k in itertools.product(range(-radius, radius + 1), repeat=n)], dtype=np.int64
    )
    coeffs = rng.normal(size=len(sup)) + 1j * rng.normal(size=len(sup))
    return GridFunction.from_coefficients(n, N, sup, coeffs), sup, coeffs


def test_smooth_symbol_plateau_and_support():
    m = build_smooth_symbol(5, 0.5, B, 2)
    d = m.as_dict()
    assert d[(3, 4)] == 1.0 and d[(5, 0)] == 1.0
    norms = np.linalg.norm(m.support, axis=1)
    assert np.all(np.abs(norms - 5) < 1.0)
    assert np.all((m.values > 0) & (m.values <= 1))


def test_smooth_symbol_nesting():
    m = build_smooth_symbol(5, 0.5, B, 2)
    inner = enumerate_annulus(AnnulusSpec(2, 5, 0.5)).as_set()
    outer = enumerate_annulus(AnnulusSpec(2, 5, 1.0)).as_set()
    sup = set(m.as_dict())
    assert len(inner) == 28
    assert inner <= sup <= outer


def test_smooth_symbol_radial():
    m = build_smooth_symbol(7, 0.8, B, 3)
    by_norm = {}
    for k, v in m.as_dict().items():
        by_norm.setdefault(sum(c * c for c in k), set()).add(v)
    assert all(len(v) == 1 for v in by_norm.values())


def test_sharp_symbol_counts_and_idempotence():
    m = build_sharp_symbol(5, 0.5, 3)
    assert len(m) == 350
    sq = m.pointwise(m)
    assert len(sq) == len(m) and np.all(sq.values == 1)
    assert len(build_sharp_symbol(4.6, 0.1, 2)) == 0


def test_symbol_rejects_duplicates():
    with pytest.raises(DomainError):
        MultiplierSymbol(2, [[1, 0], [1, 0]], [1.0, 2.0])
    with pytest.raises(DomainError):
        MultiplierSymbol(2, [[1, 0]], [np.nan])


def test_resolvent_origin_value_and_symmetry():
    m = build_resolvent_symbol(ResolventPoint(1, 1), 4, 2)
    d = m.as_dict()
    assert d[(0, 0)] == pytest.approx(-0.5j, abs=1e-15)
    for k, v in d.items():
        assert d[tuple(-c for c in k)] == v
    assert m.meta["tail_sup"] == pytest.approx(1 / (16 - 2))


def brute_spectral_distance(z, n, smax):
    shells = {sum(c * c for c in k) for k in itertools.product(range(-math.isqrt(smax) - 1, math.isqrt(smax) + 2), repeat=n)}
    return min(abs(z - s) for s in shells if s <= smax)


@pytest.mark.parametrize("n, lam, mu", [(2, 5, 5 ** (-1 / 3)), (3, 5, 5 ** (-1 / 3)), (2, 5, 1.0), (3, 7.3, 0.2)])
def test_resolvent_max_matches_shell_scan(n, lam, mu):
    zp = ResolventPoint(lam, mu)
    m = build_resolvent_symbol(zp, 4 * lam, n)
    ref = brute_spectral_distance(zp.z, n, int((4 * lam) ** 2))
    assert np.abs(m.values).max() == pytest.approx(1 / ref, rel=1e-12)
    assert m.meta["spectral_distance"] == pytest.approx(ref, rel=1e-12)


def test_resolvent_singularity_and_domain():
    with pytest.raises(SingularityError):
        build_resolvent_symbol(ResolventPoint(5, 1e-15), 20, 2)
    with pytest.raises(DomainError):
        ResolventPoint(5, 0)
    with pytest.raises(DomainError):
        build_resolvent_symbol(ResolventPoint(5, 1), 10, 2)


def test_signed_frequencies():
    assert signed_frequencies(4).tolist() == [0, 1, 2, -1]
    assert signed_frequencies(5).tolist() == [0, 1, 2, -2, -1]


def test_roundtrip_and_identity():
    rng = np.random.default_rng(0)
    f, sup, coeffs = random_band_limited(2, 16, 5, rng)
    assert np.max(np.abs(f.coefficient_at(sup) - coeffs)) < 1e-12 * np.abs(coeffs).max()
    one = MultiplierSymbol(2, sup, np.ones(len(sup)))
    g = apply_symbol(one, f)
    assert np.max(np.abs(g.samples - f.samples)) < 1e-12 * np.abs(f.samples).max()


def test_grid_function_matches_pointwise_sum():
    rng = np.random.default_rng(4)
    f, sup, coeffs = random_band_limited(2, 8, 2, rng)
    x = np.array([3, 5]) / 8
    direct = np.sum(coeffs * np.exp(2j * np.pi * sup @ x))
    assert abs(f.samples[3, 5] - direct) < 1e-12


def test_aliasing_guard():
    m = build_sharp_symbol(5, 0.5, 2)
    with pytest.raises(DomainError):
        apply_symbol(m, GridFunction(2, 10, np.zeros((10, 10))))


@pytest.mark.parametrize("n, N, lam", [(2, 32, 6), (3, 16, 4)])
def test_parseval_and_idempotence(n, N, lam):
    rng = np.random.default_rng(n)
    f, sup, coeffs = random_band_limited(n, N, N // 2 - 1, rng)
    chi = build_sharp_symbol(lam, 0.5, n)
    g = apply_symbol(chi, f)
    d = chi.as_dict()
    expected = sum(abs(c) ** 2 for k, c in zip(map(tuple, sup.tolist()), coeffs) if k in d)
    assert lp_norm(g, 2) ** 2 == pytest.approx(expected, rel=1e-10)
    gg = apply_symbol(chi, g)
    assert np.max(np.abs(gg.samples - g.samples)) <= 1e-12 * np.abs(g.samples).max()


def test_projection_self_adjoint():
    rng = np.random.default_rng(9)
    f, _, _ = random_band_limited(2, 32, 15, rng)
    g, _, _ = random_band_limited(2, 32, 15, rng)
    chi = build_sharp_symbol(9, 1, 2)
    inner = lambda a, b: np.mean(a.samples * np.conj(b.samples))
    lhs, rhs = inner(apply_symbol(chi, f), g), inner(f, apply_symbol(chi, g))
    assert abs(lhs - rhs) <= 1e-10 * abs(lhs)


def test_lp_norm_trivial_cases():
    c = GridFunction(2, 8, np.full((8, 8), -3 + 4j))
    for p in (1, 2, 3.5, math.inf):
        assert lp_norm(c, p) == pytest.approx(5.0, rel=1e-15)
    s = np.zeros(4, dtype=complex)
    s[2] = 3
    assert lp_norm(GridFunction(1, 4, s), 2) == pytest.approx(1.5)
    with pytest.raises(DomainError):
        lp_norm(c, 0.5)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), p=st.floats(1, 8), q=st.floats(1, 8))
def test_lp_norm_monotone(seed, p, q):
    p, q = min(p, q), max(p, q)
    f = GridFunction(2, 8, np.random.default_rng(seed).normal(size=(8, 8)))
    assert lp_norm(f, p) <= lp_norm(f, q) * (1 + 1e-12)
    assert lp_norm(f, q) <= lp_norm(f, math.inf) * (1 + 1e-12)


@pytest.mark.parametrize("n", [2, 3])
def test_cauchy_schwarz_cap_bound(n):
    lam, rho = 16, 1.0
    pts = enumerate_annulus(AnnulusSpec(n, lam, rho))
    cover = cap_cover(lam, math.sqrt(rho * lam), n, points=pts)
    N = default_grid_size(lam, rho)
    rng = np.random.default_rng(100 + n)
    caps = np.unique(cover.assignment)[:5]
    for cap in caps:
        sub = pts.points[cover.assignment == cap]
        count = len(sub)
        for _ in range(20):
            a = rng.normal(size=count) + 1j * rng.normal(size=count)
            f = GridFunction.from_coefficients(n, N, sub, a)
            l2 = float(np.linalg.norm(a))
            assert lp_norm(f, 2) == pytest.approx(l2, rel=1e-10)
            for p in (4.0, 6.0, math.inf):
                expo = 0.5 if math.isinf(p) else 0.5 - 1 / p
                assert lp_norm(f, p) <= count**expo * l2 * (1 + 1e-12)


def test_default_grid_size():
    assert default_grid_size(8, 0.5) == 64
    assert default_grid_size(3, 0.5) == 16


# ------------------------------------------------------------ mollification


def test_split_sums_to_symbol():
    m = build_smooth_symbol(6, 0.3, B, 2)
    m0, m1 = mollified_split(m)
    d = m.as_dict()
    total = m0.values + m1.values
    ref = np.array([d.get(tuple(k), 0.0) for k in m0.support.tolist()])
    assert np.max(np.abs(total - ref)) <= 1e-15
    assert set(d) <= set(m0.as_dict())


def test_split_matches_polar_convolution_oracle():
    lam, rho = 5.0, 0.5
    m0, _ = mollified_split(build_smooth_symbol(lam, rho, B, 2))
    d = m0.as_dict()
    # eta(r) = 2 pi int_0^2 J0(2 pi r y) bump(y) y dy, then (m * eta)(k) in polar coords about k
    gy, gw = np.polynomial.legendre.leggauss(400)
    y = 1 + gy
    ey = bump_eval(B, y) * y * gw
    gx, gxw = np.polynomial.legendre.leggauss(8)
    edges = np.linspace(0, 20, 401)
    mid, h = (edges[1:] + edges[:-1]) / 2, np.diff(edges) / 2
    r = (mid[:, None] + h[:, None] * gx).ravel()
    wr = (h[:, None] * gxw).ravel()
    eta = 2 * np.pi * (j0(2 * np.pi * np.outer(r, y)) @ ey)
    th = np.linspace(0, 2 * np.pi, 1024, endpoint=False)
    ring = np.stack([np.cos(th), np.sin(th)], -1)
    for k in [(5, 0), (4, 2), (0, 8), (1, 3)]:
        pts = np.array(k, float)[None, None, :] - r[:, None, None] * ring[None]
        avg = bump_eval(B, (np.linalg.norm(pts, axis=-1) - lam) / rho).mean(axis=1) * 2 * np.pi
        assert abs(np.sum(eta * r * wr * avg) - d[k]) < 1e-7


def test_split_norm_scaling():
    sup, l1 = [], []
    for lam, rho in [(16, 0.25), (16, 0.125), (32, 0.125), (32, 0.0625)]:
        m0, _ = mollified_split(build_smooth_symbol(lam, rho, B, 2))
        sup.append(np.abs(m0.values).max() / rho)
        l1.append(np.abs(m0.values).sum() / (rho * lam))
    assert max(sup) / min(sup) <= 4
    assert max(l1) / min(l1) <= 4


def test_split_requires_smooth_symbol():
    with pytest.raises(DomainError):
        mollified_split(build_sharp_symbol(5, 0.5, 2))
