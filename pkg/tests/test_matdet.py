"""Determinant identities, Riesz projections, and perturbation expansions."""

import numpy as np
import pytest

from wavedet.errors import NumericalError, PreconditionError
from wavedet.matdet import (AnalyticMatrixFamily, RieszData, as_square_matrix,
                            derivative_coefficients, det_and_det2,
                            det_i_minus, expansion_regular,
                            expansion_singular, riesz_projection, trace_norm)

RNG = np.random.default_rng(20260810)


def random_matrix(n, scale=1.0, rng=RNG):
    return scale * (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))


# ---------------------------------------------------------------------------
# det / det2 basics
# ---------------------------------------------------------------------------

def test_det_identity_on_zero():
    d, d2 = det_and_det2(np.zeros((2, 2)))
    assert d == 1.0
    assert d2 == 1.0


def test_det_diag_half():
    d, d2 = det_and_det2(np.diag([0.5, 0.0]))
    assert abs(d - 0.5) < 1e-15
    assert abs(d2 - 0.5 * np.exp(0.5)) < 1e-15


def test_det_ab_ba_symmetry():
    a = random_matrix(5, 0.4)
    b = random_matrix(5, 0.4)
    lhs = det_i_minus(a @ b)
    rhs = det_i_minus(b @ a)
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


def test_multiplicativity():
    for _ in range(20):
        a = random_matrix(6, 0.3)
        b = random_matrix(6, 0.3)
        lhs = det_i_minus(a + b - a @ b)     # I-A-B+AB = (I-A)(I-B)
        rhs = det_i_minus(a) * det_i_minus(b)
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(rhs))


def test_det2_product_rule():
    for _ in range(20):
        a = random_matrix(5, 0.3)
        b = random_matrix(5, 0.3)
        _, d2a = det_and_det2(a)
        _, d2b = det_and_det2(b)
        ab = a + b - a @ b
        _, lhs = det_and_det2(ab)
        rhs = d2a * d2b * np.exp(-np.trace(a @ b))
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(rhs))


def test_block_triangular_reduction():
    for _ in range(10):
        k, m = 3, 4
        c = random_matrix_rect(m, k)
        dk = random_matrix(k, 0.7)
        a = np.zeros((m + k, m + k), dtype=complex)
        a[:m, m:] = c
        a[m:, m:] = dk
        lhs = det_i_minus(a)
        rhs = det_i_minus(dk)
        assert abs(lhs - rhs) <= 1e-13 * max(1.0, abs(rhs))


def random_matrix_rect(m, n, rng=RNG):
    return rng.normal(size=(m, n)) + 1j * rng.normal(size=(m, n))


def test_hadamard_type_bound():
    for _ in range(50):
        a = random_matrix(6, 0.5)
        assert abs(det_i_minus(a)) <= np.exp(trace_norm(a)) * (1 + 1e-12)


def test_lipschitz_bounds():
    # |det(I-A)-det(I-B)| <= |A-B|_1 exp(|A|_1+|B|_1+1), and the
    # 2-modified analogs with constant C = 1/2 hold on the sampled set
    for _ in range(50):
        a = random_matrix(5, 0.4)
        b = random_matrix(5, 0.4)
        da = det_i_minus(a)
        db = det_i_minus(b)
        gap = abs(da - db)
        bound = trace_norm(a - b) * np.exp(trace_norm(a) + trace_norm(b) + 1)
        assert gap <= bound
        _, d2a = det_and_det2(a)
        _, d2b = det_and_det2(b)
        hs = np.linalg.norm
        c = 0.5
        assert abs(d2a) <= np.exp(c * hs(a) ** 2) * (1 + 1e-12)
        assert abs(d2a - d2b) <= hs(a - b) * np.exp(
            c * (hs(a) + hs(b) + 1) ** 2)


def test_log_series():
    # log det(I - Bz) = -sum tr(B^k) z^k / k inside |Bz| < 1/2
    b = random_matrix(4, 0.5)
    b /= 4 * np.linalg.norm(b, 2)
    z = 0.9
    target = np.log(det_i_minus(b * z))
    acc = 0.0
    powers = np.eye(4, dtype=complex)
    partials = []
    for k in range(1, 60):
        powers = powers @ b
        acc -= np.trace(powers) * z ** k / k
        partials.append(acc)
    assert abs(partials[-1] - target) < 1e-13
    # 2-modified series starts at k = 2
    _, d2 = det_and_det2(b * z)
    acc2 = 0.0
    powers = b @ b
    for k in range(2, 60):
        acc2 -= np.trace(powers) * z ** k / k
        powers = powers @ b
    assert abs(acc2 - np.log(d2)) < 1e-13


def test_non_square_rejected():
    with pytest.raises(PreconditionError):
        as_square_matrix(np.zeros((2, 3)))
    with pytest.raises(PreconditionError):
        as_square_matrix(np.array([[np.inf, 0], [0, 1.0]]))


# ---------------------------------------------------------------------------
# Riesz projections
# ---------------------------------------------------------------------------

def test_riesz_simple_diag():
    rz = riesz_projection(np.diag([1.0, 0.3]), center=1.0, radius=0.1)
    assert rz.n0 == 1 and rz.nu0 == 0
    assert np.allclose(rz.projection, np.diag([1.0, 0.0]), atol=1e-12)
    assert np.linalg.norm(rz.nilpotent) < 1e-12
    rz.validate()


def test_riesz_jordan_block():
    a0 = np.array([[1.0, 1.0], [0.0, 1.0]])
    rz = riesz_projection(a0, center=1.0, radius=0.5)
    assert rz.n0 == 2 and rz.nu0 == 1
    assert np.allclose(rz.projection, np.eye(2), atol=1e-10)
    assert np.allclose(rz.nilpotent, [[0, 1], [0, 0]], atol=1e-10)
    rz.validate()


def test_riesz_semisimple_double():
    rz = riesz_projection(np.diag([1.0, 1.0, 0.2]), center=1.0, radius=0.2)
    assert rz.n0 == 2 and rz.nu0 == 0
    rz.validate()


def test_riesz_contour_through_spectrum():
    with pytest.raises(PreconditionError):
        riesz_projection(np.diag([1.1, 0.3]), center=1.0, radius=0.1)


# ---------------------------------------------------------------------------
# expansions: frozen analytic cases
# ---------------------------------------------------------------------------

def _family(a0, a1, radius=1.0):
    return AnalyticMatrixFamily((np.asarray(a0, dtype=complex),
                                 np.asarray(a1, dtype=complex)), radius)


def test_regular_expansion_diag():
    fam = _family(np.diag([0.5, 0.0]), np.diag([1.0, 0.0]))
    res = expansion_regular(fam)
    assert res.order == 0
    assert abs(res.constant - 0.5) < 1e-14
    assert abs(res.slope - (-1.0)) < 1e-14


def test_regular_expansion_modified():
    fam = _family(np.diag([0.5, 0.0]), np.diag([1.0, 0.0]))
    res = expansion_regular(fam, modified=True)
    # det2(I - A(z)) = (1/2 - z) e^{1/2 + z}: constant and slope at 0
    assert abs(res.constant - 0.5 * np.exp(0.5)) < 1e-14
    assert abs(res.slope - (-0.5 * np.exp(0.5))) < 1e-13


def test_regular_matches_finite_differences():
    rng = np.random.default_rng(7)
    a0 = 0.3 * (rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
    a1 = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    fam = _family(a0, a1)
    for modified in (False, True):
        res = expansion_regular(fam, modified=modified)
        h = 1e-5

        def f(z):
            d, d2 = det_and_det2(fam(z))
            return d2 if modified else d

        fd = (f(h) - f(-h)) / (2 * h)
        assert abs(res.slope - fd) < 1e-8 * max(1.0, abs(fd))


def test_singular_simple_eigenvalue():
    fam = _family(np.diag([1.0, 0.0]), np.diag([1.0, 0.0]))
    rz = riesz_projection(fam.a0, 1.0, 0.3)
    res = expansion_singular(fam, rz)
    assert res.order == 1
    assert abs(res.leading_coefficient - (-1.0)) < 1e-10
    # via the simple-case product: det(I-P0-A0) det(P0 A1 P0) = (-1)(1)
    p0 = rz.projection
    check = det_i_minus(p0 + fam.a0) * 1.0
    assert abs(check - (-1.0)) < 1e-12


def test_singular_jordan_case():
    a0 = np.array([[1.0, 1.0], [0.0, 1.0]])
    a1 = np.array([[0.0, 0.0], [1.0, 0.0]])
    fam = _family(a0, a1)
    rz = riesz_projection(a0, 1.0, 0.5)
    res = expansion_singular(fam, rz)
    assert res.order == 1
    assert abs(res.leading_coefficient - (-1.0)) < 1e-9


def test_singular_degenerate_leading_term():
    # A1 that annihilates the struck minor triggers the diagnostic
    a0 = np.diag([1.0, 0.0])
    a1 = np.array([[0.0, 1.0], [1.0, 0.0]])
    fam = _family(a0, a1)
    rz = riesz_projection(a0, 1.0, 0.3)
    with pytest.raises(NumericalError):
        expansion_singular(fam, rz)


def test_singular_rejects_inconsistent_structure():
    rz = RieszData(np.diag([1.0, 0.0]).astype(complex),
                   np.zeros((2, 2), dtype=complex), 1, 1,
                   np.diag([0.0, 1.0]).astype(complex))
    fam = _family(np.diag([1.0, 0.0]), np.eye(2))
    with pytest.raises(PreconditionError):
        expansion_singular(fam, rz)


# ---------------------------------------------------------------------------
# engineered random families vs the Cauchy oracle
# ---------------------------------------------------------------------------

def engineered_family(rng, dim=None, n0=None, nu0=None):
    """Random family with a controlled eigenvalue-1 Jordan structure at A0."""
    dim = dim or int(rng.integers(3, 9))
    n0 = n0 if n0 is not None else int(rng.integers(1, min(3, dim) + 1))
    max_nu = min(n0 - 1, 2)
    nu0 = nu0 if nu0 is not None else int(rng.integers(0, max_nu + 1))
    # block structure: nu0 off-diagonal ones distributed into Jordan blocks
    heights = []
    remaining_ones = nu0
    slots = n0
    while slots > 0:
        if remaining_ones > 0:
            h = min(remaining_ones + 1, slots)
            heights.append(h)
            remaining_ones -= h - 1
            slots -= h
        else:
            heights.append(1)
            slots -= 1
    core = np.zeros((dim, dim), dtype=complex)
    pos = 0
    for h in heights:
        for i in range(h):
            core[pos + i, pos + i] = 1.0
            if i < h - 1:
                core[pos + i, pos + i + 1] = 1.0
        pos += h
    # the rest of the spectrum: away from 1
    others = 0.2 + 0.5 * rng.random(dim - n0) * np.exp(
        2j * np.pi * rng.random(dim - n0))
    for i, lam in enumerate(others):
        core[n0 + i, n0 + i] = lam
    basis = np.eye(dim) + 0.3 * (rng.normal(size=(dim, dim))
                                 + 1j * rng.normal(size=(dim, dim)))
    a0 = basis @ core @ np.linalg.inv(basis)
    a1 = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return AnalyticMatrixFamily((a0, a1)), n0, nu0


def cauchy_leading_coefficient(fam, order, modified, rho=0.1):
    def f(z):
        d, d2 = det_and_det2(fam(z))
        return d2 if modified else d

    coeffs = derivative_coefficients(f, 0.0, rho, order, nodes=128)
    return coeffs


def test_engineered_families_match_cauchy_oracle():
    rng = np.random.default_rng(1234)
    tested = 0
    attempts = 0
    while tested < 100 and attempts < 200:
        attempts += 1
        fam, n0, nu0 = engineered_family(rng)
        try:
            rz = riesz_projection(fam.a0, 1.0, 0.08)
        except (PreconditionError, NumericalError):
            continue
        if rz.n0 != n0 or rz.nu0 != nu0:
            continue    # conditioning spoiled the engineered structure
        try:
            res = expansion_singular(fam, rz)
        except NumericalError:
            continue    # genuinely degenerate leading minor
        order = n0 - nu0
        assert res.order == order
        coeffs = cauchy_leading_coefficient(fam, order, False)
        # all lower coefficients vanish; the leading one matches
        for q in range(order):
            assert abs(coeffs[q]) <= 1e-7 * max(1.0, abs(coeffs[order]))
        assert abs(res.leading_coefficient - coeffs[order]) <= \
            1e-7 * abs(coeffs[order])
        # 2-modified variant carries exactly the factor e^{n0} relative to
        # the unmodified Q-block times the trace exponential
        res2 = expansion_singular(fam, rz, modified=True)
        coeffs2 = cauchy_leading_coefficient(fam, order, True)
        assert abs(res2.leading_coefficient - coeffs2[order]) <= \
            1e-7 * abs(coeffs2[order])
        tested += 1
    assert tested == 100


def test_modified_singular_carries_exp_n0():
    rng = np.random.default_rng(55)
    for _ in range(10):
        fam, n0, nu0 = engineered_family(rng)
        try:
            rz = riesz_projection(fam.a0, 1.0, 0.08)
            res = expansion_singular(fam, rz)
            res2 = expansion_singular(fam, rz, modified=True)
        except NumericalError:
            continue
        if rz.n0 != n0:
            continue
        # ratio of modified to unmodified leading terms:
        # e^{n0} * det2_Q / det_Q = e^{n0} e^{tr(Q0 A0 Q0)}
        dim = fam.dim
        uq = np.linalg.svd(rz.complement_projection)[0][:, :dim - rz.n0]
        mq = uq.conj().T @ (rz.complement_projection @ fam.a0 @ uq)
        expected = np.exp(rz.n0) * np.exp(np.trace(mq))
        ratio = res2.leading_coefficient / res.leading_coefficient
        assert abs(ratio - expected) < 1e-8 * abs(expected)


# ---------------------------------------------------------------------------
# contour Taylor coefficients
# ---------------------------------------------------------------------------

def test_derivative_coefficients_polynomial():
    c = derivative_coefficients(lambda z: z ** 2, 0.0, 0.5, 4)
    assert np.allclose(c, [0, 0, 1, 0, 0], atol=1e-12)


def test_derivative_coefficients_exponential():
    c = derivative_coefficients(np.exp, 0.0, 1.0, 6)
    ref = 1.0 / np.array([1, 1, 2, 6, 24, 120, 720], dtype=float)
    assert np.max(np.abs(c - ref)) < 1e-10


def test_derivative_coefficients_rejects_nan():
    with pytest.raises(NumericalError):
        derivative_coefficients(lambda z: np.nan, 0.0, 0.5, 2)
