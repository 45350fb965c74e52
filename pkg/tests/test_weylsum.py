import itertools
import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st
from sympy.matrices.normalforms import smith_normal_form as sympy_snf

from toruslab.errors import DomainError, ResourceError, SingularityError
from toruslab.weylsum import (
    WeylSumConfig,
    coset_decomposition,
    coverage_scan,
    exact_det,
    hermite_normal_form,
    hessian_certificate,
    lambda_dominates,
    mixed_index,
    muller_hypotheses_check,
    phi_derivative,
    smith_normal_form,
    truncated_weyl_sum,
)

I2 = np.eye(2, dtype=int)


def fd_derivative(Q, alpha, u):
    """Finite-difference oracle in 40-digit arithmetic (mpmath, Richardson-style)."""
    mpmath.mp.dps = 40
    Q = [[mpmath.mpf(int(c)) for c in row] for row in np.asarray(Q).tolist()]

    def phi(*uu):
        v = [mpmath.fsum(Q[i][j] * uu[j] for j in range(len(uu))) for i in range(len(uu))]
        return mpmath.sqrt(mpmath.fsum(c * c for c in v))

    return float(mpmath.diff(phi, [mpmath.mpf(float(c)) for c in u], tuple(alpha)))


# ------------------------------------------------------------- Weyl sums


def test_zero_frequency_has_no_cancellation():
    w = truncated_weyl_sum(WeylSumConfig(2, 0.0, 0.3, (0.3, 0.7)))
    assert w.value.imag == 0.0
    assert w.value.real == w.abs_sum


def test_cancellation_regression():
    lam = 40.0
    w = truncated_weyl_sum(WeylSumConfig(2, lam, lam ** (-1 / 3), (0.3, 0.7), truncation_radius=lam ** (1 / 3)))
    ratio = abs(w.value) / w.abs_sum
    assert ratio < 0.5
    assert ratio == pytest.approx(0.30311988679003793, rel=1e-9)


@settings(max_examples=40, deadline=None)
@given(
    lam=st.floats(0, 300),
    rho=st.floats(0.05, 1),
    x=st.tuples(st.floats(-2, 2), st.floats(-2, 2)),
)
def test_triangle_and_conjugation(lam, rho, x):
    a = truncated_weyl_sum(WeylSumConfig(2, lam, rho, x))
    b = truncated_weyl_sum(WeylSumConfig(2, lam, rho, x, sign=-1))
    assert abs(a.value) <= a.abs_sum * (1 + 1e-12)
    assert abs(a.value - b.value.conjugate()) <= 1e-10 * max(1.0, a.abs_sum)


def test_excludes_near_origin_and_is_periodic():
    cfg = WeylSumConfig(3, 17.0, 0.5, (0.1, -0.2, 0.05))
    shifted = WeylSumConfig(3, 17.0, 0.5, (1.1, -3.2, 2.05))
    a, b = truncated_weyl_sum(cfg), truncated_weyl_sum(shifted)
    assert a.terms == b.terms
    assert abs(a.value - b.value) < 1e-10


def test_term_count_matches_brute_force():
    x = np.array([0.3, 0.7])
    R = 5.5
    brute = sum(
        1 for k in itertools.product(range(-8, 9), repeat=2) if 0.5 <= np.linalg.norm(x + k) <= R
    )
    assert truncated_weyl_sum(WeylSumConfig(2, 3.0, 0.2, tuple(x), truncation_radius=R)).terms == brute


def test_budget_and_domain():
    with pytest.raises(ResourceError):
        truncated_weyl_sum(WeylSumConfig(3, 10.0, 0.001, max_terms=10_000))
    with pytest.raises(DomainError):
        WeylSumConfig(2, 1.0, 0.0)
    with pytest.raises(DomainError):
        WeylSumConfig(2, 1.0, 0.5, sign=2)
    with pytest.raises(DomainError):
        WeylSumConfig(2, 1.0, 0.5, (0.1,))


def test_crude_bound_stable_constant():
    consts = []
    rng = np.random.default_rng(2)
    xs = rng.uniform(-0.5, 0.5, (20, 2))
    for lam in (16, 32, 64, 128, 256):
        rho = lam ** (-1 / 3)
        sup = max(abs(truncated_weyl_sum(WeylSumConfig(2, lam, rho, tuple(x))).value) for x in xs)
        consts.append(rho * lam**0.5 * sup / (lam / rho) ** 0.5)
    assert max(consts) / min(consts) <= 4


# ----------------------------------------------------------- derivatives


def test_gradient_of_norm():
    assert phi_derivative(I2, (1, 0), (3, 4)) == pytest.approx(0.6, rel=1e-15)
    assert phi_derivative(I2, (0, 0), (3, 4)) == pytest.approx(5.0)


def test_phi_derivative_singular():
    with pytest.raises(SingularityError):
        phi_derivative(I2, (1, 0), (0, 0))
    with pytest.raises(DomainError):
        phi_derivative([[1, 0.5], [0, 1]], (1, 0), (1, 1))


@pytest.mark.parametrize("s", [2.0, 10.0])
@pytest.mark.parametrize("alpha", [(1, 0), (0, 2), (1, 2), (2, 3), (1, 1, 1)])
def test_phi_homogeneity(alpha, s):
    n = len(alpha)
    Q = np.array([[2, 1, 0], [0, 1, -1], [1, 0, 3]])[:n, :n]
    u = np.array([0.4, -1.3, 0.7])[:n]
    lhs = phi_derivative(Q, alpha, s * u)
    rhs = s ** (1 - sum(alpha)) * phi_derivative(Q, alpha, u)
    assert lhs == pytest.approx(rhs, rel=1e-10)


MATRICES = {2: [[2, 1], [-1, 1]], 3: [[1, 2, 0], [0, 1, -1], [1, 0, 2]]}


@pytest.mark.parametrize("n", [2, 3])
def test_phi_derivative_matches_finite_differences(n):
    rng = np.random.default_rng(10 + n)
    Q = np.array(MATRICES[n])
    alphas = [a for a in itertools.product(range(4), repeat=n) if 1 <= sum(a) <= 3]
    for u in rng.normal(size=(5, n)):
        for alpha in alphas:
            exact = phi_derivative(Q, alpha, u)
            ref = fd_derivative(Q, alpha, u)
            assert abs(exact - ref) <= 1e-7 * max(abs(ref), 1e-3)


# ------------------------------------------------------------- Hessians


def test_mixed_index():
    assert mixed_index(2, 1) == (1, 0)
    assert mixed_index(3, 3) == (1, 0, 2)
    assert mixed_index(2, 3) == (1, 2)


@pytest.mark.parametrize("Q, q", [(I2, 3), ([[2, 1], [0, 1]], 3), (np.eye(3, dtype=int), 2), ([[1, 1, 0], [0, 1, 1], [1, 0, 1]], 3)])
def test_certificate_radius_invariance(Q, q):
    a = hessian_certificate(Q, q, 128, radius=1.0)
    b = hessian_certificate(Q, q, 128, radius=5.0)
    assert b.min_scaled == pytest.approx(a.min_scaled, rel=1e-9)
    assert np.allclose(a.scaled_values, b.scaled_values, rtol=1e-9, atol=0)


def test_certificate_q1_profile_matches_finite_differences():
    cert = hessian_certificate(I2, 1, 8)
    mpmath.mp.dps = 40
    for u, val in zip(cert.sample_points, cert.scaled_values):
        h = [[fd_derivative(I2, (1 + (i == 0) + (j == 0), (i == 1) + (j == 1)), u) for j in range(2)] for i in range(2)]
        det = abs(h[0][0] * h[1][1] - h[0][1] * h[1][0])
        assert val == pytest.approx(det, rel=1e-6, abs=1e-12)


def test_certificate_threshold_split():
    probe = hessian_certificate(I2, 1, 16)
    cut = float(np.median(probe.scaled_values))
    cert = hessian_certificate(I2, 1, 16, threshold=cut)
    below = cert.sample_points[cert.scaled_values < cut]
    assert np.array_equal(cert.degenerate_points, below)
    assert 0 < len(below) < 16
    assert cert.min_scaled == probe.scaled_values.min()


def test_existence_scan_covers_circle():
    scan = coverage_scan(2, 3, directions=48)
    assert scan["covered"].all()
    assert all(Q is not None for Q in scan["best_Q"])


def test_certificate_rejects_singular():
    with pytest.raises(DomainError):
        hessian_certificate([[1, 2], [2, 4]], 3, 8)


# ----------------------------------------------------------- normal forms


def random_integer_matrix(rng, n):
    while True:
        Q = rng.integers(-4, 5, size=(n, n))
        if exact_det(Q.tolist()) != 0:
            return Q


@pytest.mark.parametrize("seed", range(8))
def test_smith_normal_form_matches_sympy(seed):
    rng = np.random.default_rng(seed)
    n = 2 + seed % 3
    Q = random_integer_matrix(rng, n)
    D, U, V = smith_normal_form(Q)
    assert np.array_equal(U @ Q @ V, D)
    assert abs(exact_det(U.tolist())) == 1 and abs(exact_det(V.tolist())) == 1
    ref = sympy_snf(sympy.Matrix(Q.tolist()), domain=sympy.ZZ)
    assert [abs(int(ref[i, i])) for i in range(n)] == np.diag(D).tolist()


@pytest.mark.parametrize("seed", range(8))
def test_hermite_normal_form_properties(seed):
    rng = np.random.default_rng(100 + seed)
    n = 2 + seed % 3
    Q = random_integer_matrix(rng, n)
    H = hermite_normal_form(Q)
    assert np.all(np.triu(H, 1) == 0)
    assert np.all(np.diag(H) > 0)
    for i in range(n):
        assert np.all((H[i, :i] >= 0) & (H[i, :i] < H[i, i]))
    # same lattice: H = Q U with U = Q^{-1} H integral and unimodular
    U = sympy.Matrix(Q.tolist()).inv() * sympy.Matrix(H.tolist())
    assert all(c.is_integer for c in U)
    assert abs(U.det()) == 1


def test_cosets_trivial():
    c = coset_decomposition([[2, 0], [0, 2]])
    assert sorted(map(tuple, c.representatives.tolist())) == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert coset_decomposition(np.eye(3, dtype=int)).representatives.tolist() == [[0, 0, 0]]
    with pytest.raises(DomainError):
        coset_decomposition([[1, 2], [2, 4]])


def test_cosets_unimodular():
    rng = np.random.default_rng(5)
    Q = np.eye(3, dtype=np.int64)
    for _ in range(12):
        i, j = rng.choice(3, 2, replace=False)
        Q[i] += int(rng.integers(-2, 3)) * Q[j]
    assert abs(exact_det(Q.tolist())) == 1
    assert len(coset_decomposition(Q)) == 1


@pytest.mark.parametrize("seed", range(5))
def test_cosets_partition_random_vectors(seed):
    rng = np.random.default_rng(seed)
    n = 2 + seed % 2
    Q = random_integer_matrix(rng, n)
    cs = coset_decomposition(Q)
    assert len(cs) == abs(exact_det(Q.tolist()))
    reps = cs.representatives.tolist()
    for a, b in itertools.combinations(reps, 2):
        assert not cs.contains(a, b)
    ks = rng.integers(-50, 51, size=(1000, n))
    idx = cs.index_of(ks)
    for k, i in zip(ks.tolist(), idx):
        hits = [j for j, b in enumerate(reps) if cs.contains(k, b)]
        assert hits == [i]


# --------------------------------------------------- hypotheses and predicate


def test_lambda_dominates_examples():
    assert lambda_dominates(1000, 10, 3, 3)
    assert not lambda_dominates(10, 10, 3, 3)
    # boundary: lam = M^(19/12) exactly when M = 2^12, lam = 2^19
    assert lambda_dominates(2**19, 2**12, 3, 3)
    assert not lambda_dominates(2**19 - 1, 2**12, 3, 3)
    assert 10 ** (19 / 12) == pytest.approx(38.31, abs=0.01)


def test_muller_report_constants_finite_and_stable():
    cfg = WeylSumConfig(3, 1000.0, 0.1, (0.2, 0.1, 0.3))
    rep = muller_hypotheses_check(cfg, 3, 64)
    assert rep.predicate
    assert rep.exponent == Fraction(19, 12)
    for j, c in rep.phase_constants.items():
        assert 0.9 <= c[1] <= 1.0 + 1e-12
        assert c[2] <= 2.0 + 1e-9
    c1 = [c[1] for c in rep.weight_constants.values()]
    assert all(np.isfinite(c1)) and max(c1) < 50
    small = muller_hypotheses_check(WeylSumConfig(3, 1000.0, 1e-4), 3, 64)
    c2 = [c[2] for c in small.weight_constants.values()]
    assert max(c2) / min(c2) <= 4
