from __future__ import annotations

import math

import gmpy2
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from frameward import _mp, regsolve
from frameward.frames import FrameSpec
from frameward.gram import assemble_rect, assemble_square, bind_target
from frameward.regsolve import (
    ConvergenceError,
    PrecisionError,
    hermitian_eig,
    rect_svd,
    solve_exact,
    solve_regularized,
    truncate,
    tsvd_condition_bound,
)
from frameward.targets import get_target

FE = FrameSpec.fe(2.0)
AUGON = FrameSpec.augmented_orthonormal()


def _f(a):
    return np.asarray(_mp.to_float(a), dtype=complex)


def _inertia_count(A, x):
    """Number of eigenvalues of Hermitian A below x, from the pivots of LDL* of A - xI."""
    B = np.array(A, dtype=complex) - x * np.eye(len(A))
    n = len(B)
    neg = 0
    for k in range(n):
        p = B[k, k].real
        if p == 0:
            p = 1e-300
        if p < 0:
            neg += 1
        B[k + 1:, k + 1:] -= np.outer(B[k + 1:, k], B[k, k + 1:]) / p
    return neg


def _bisection_eigs(A, tol=1e-14):
    """Eigenvalues of a small Hermitian matrix by Sylvester-inertia bisection."""
    r = np.max(np.sum(np.abs(A), axis=1))
    out = []
    for k in range(len(A)):
        lo, hi = -r, r
        while hi - lo > tol * max(1.0, abs(hi)):
            mid = (lo + hi) / 2
            if _inertia_count(A, mid) > k:
                hi = mid
            else:
                lo = mid
        out.append((lo + hi) / 2)
    return np.sort(out)[::-1]


def _check_factorization(G, fact, bits):
    V = _f(fact.vectors)
    Gf = _f(G)
    lim = 2.0 ** (-bits / 2)
    assert np.max(np.abs(V.conj().T @ V - np.eye(V.shape[1]))) <= max(lim, 1e-14)
    s = fact.values_float()
    U = V if fact.square else _f(fact.left)
    assert np.max(np.abs(Gf - U @ np.diag(s) @ V.conj().T)) <= max(lim, 1e-14) * s[0]


# ---------------------------------------------------------------- eigen-decomposition

def test_identity_eigenvalues():
    fact = hermitian_eig(np.eye(5))
    np.testing.assert_array_equal(fact.values_float(), np.ones(5))


def test_arrow_matrix_spectrum():
    bits = 256
    fact = hermitian_eig(assemble_square(AUGON, 8, bits).matrix, bits)
    c = [math.sqrt(90) / math.pi ** 2 / n ** 2 for n in range(1, 8)]
    r = math.sqrt(sum(x * x for x in c))
    v = fact.values_float()
    assert v[0] == pytest.approx(1 + r, abs=1e-15)
    assert v[-1] == pytest.approx(1 - r, abs=1e-15)
    with gmpy2.context(precision=bits):
        assert all(abs(x - 1) < gmpy2.mpfr(2) ** -240 for x in fact.values[1:-1])


@pytest.mark.parametrize("seed", [0, 1, 2])
@pytest.mark.parametrize("complex_", [False, True])
def test_random_hermitian_against_bisection(seed, complex_):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((6, 6)) + (1j * rng.standard_normal((6, 6)) if complex_ else 0)
    A = (A + A.conj().T) / 2
    got = hermitian_eig(A).values_float()
    np.testing.assert_allclose(got, _bisection_eigs(A), rtol=0, atol=1e-12)


@pytest.mark.parametrize("bits", [53, 160])
def test_eig_values_sorted_and_invariants_hold(bits):
    G = assemble_square(FrameSpec.augmented_fourier(4), 20, bits).matrix
    fact = hermitian_eig(G, bits)
    v = fact.values_float()
    assert np.all(np.diff(v) <= 0)
    _check_factorization(G, fact, bits)


def test_eig_multiprecision_resolves_tiny_eigenvalues():
    bits = 384
    G = assemble_square(FE, 40, bits).matrix
    fact = hermitian_eig(G, bits)
    _check_factorization(G, fact, bits)
    # det(G) = prod of eigenvalues, compared through log-sum against a second precision
    hi = hermitian_eig(assemble_square(FE, 40, 512).matrix, 512, vectors=False)
    assert float(fact.values[-1]) == pytest.approx(float(hi.values[-1]), rel=1e-20)


def test_eig_ties_keep_original_order():
    fact = hermitian_eig(np.diag([1.0, 2.0, 1.0, 2.0]))
    np.testing.assert_array_equal(fact.values_float(), [2, 2, 1, 1])
    V = _f(fact.vectors)
    assert np.argmax(np.abs(V[:, 0])) == 1 and np.argmax(np.abs(V[:, 1])) == 3


def test_eig_rejects_non_square():
    with pytest.raises(ValueError):
        hermitian_eig(np.ones((3, 2)))


def test_sweep_cap_raises_with_residual(monkeypatch):
    monkeypatch.setattr(regsolve, "MAX_SWEEPS", 1)
    rng = np.random.default_rng(0)
    A = rng.standard_normal((30, 30))
    with pytest.raises(ConvergenceError) as err:
        hermitian_eig(A + A.T)
    assert err.value.residual > 0 and err.value.sweeps == 1
    with pytest.raises(ConvergenceError) as err:
        rect_svd(rng.standard_normal((30, 20)))
    assert err.value.residual > 0


# ---------------------------------------------------------------- SVD

def test_svd_square_matches_eig():
    bits = 128
    G = assemble_square(FE, 12, bits).matrix
    s = rect_svd(G, bits).values_float()
    e = hermitian_eig(G, bits).values_float()
    np.testing.assert_allclose(s, e, rtol=0, atol=2.0 ** (-bits / 2))


def test_svd_stacked_identity():
    G = np.vstack([np.eye(4), np.zeros((3, 4))])
    np.testing.assert_allclose(rect_svd(G).values_float(), np.ones(4), atol=1e-15)


@pytest.mark.parametrize("bits", [53, 192])
def test_svd_squares_are_eigenvalues_of_normal_matrix(bits):
    G = assemble_rect(FE, 16, 8, bits).matrix
    fact = rect_svd(G, bits)
    Gf = _f(G)
    e = hermitian_eig(Gf.conj().T @ Gf).values_float()
    np.testing.assert_allclose(fact.values_float() ** 2, e, rtol=1e-10, atol=1e-15)
    _check_factorization(G, fact, bits)


def test_svd_rejects_wide():
    with pytest.raises(ValueError):
        rect_svd(np.ones((2, 3)))


# ---------------------------------------------------------------- truncation and solves

@pytest.fixture(scope="module")
def fe40():
    return hermitian_eig(assemble_square(FE, 40).matrix)


def test_truncate_below_smallest_keeps_all():
    fact = hermitian_eig(np.diag([3.0, 2.0, 1.0]))
    t = truncate(fact, 0.5)
    assert t.rank_kept == 3
    y = np.array([1.0, 2.0, 3.0])
    np.testing.assert_allclose(solve_regularized(t, y).coefficients, y / np.array([3.0, 2.0, 1.0]))


def test_truncate_above_largest_gives_zero():
    fact = hermitian_eig(np.diag([3.0, 2.0, 1.0]))
    sol = solve_regularized(fact, np.ones(3), 3.0)
    assert sol.rank_kept == 0
    assert np.all(sol.coefficients == 0)


def test_truncate_tie_is_discarded():
    fact = hermitian_eig(np.diag([3.0, 2.0, 1.0]))
    assert truncate(fact, 2.0).rank_kept == 1


def test_truncate_negative_threshold_rejected():
    with pytest.raises(ValueError):
        truncate(hermitian_eig(np.eye(2)), -1.0)


def test_fe40_partial_rank(fe40):
    k = truncate(fe40, 1e-8).rank_kept
    assert 0 < k < 40
    assert k == int(np.sum(fe40.values_float() > 1e-8))


@given(eps=st.lists(st.floats(1e-17, 2.0), min_size=2, max_size=6))
@settings(max_examples=30, deadline=None)
def test_rank_nonincreasing_in_eps(fe40, eps):
    eps = sorted(eps)
    ranks = [truncate(fe40, e).rank_kept for e in eps]
    assert all(b <= a for a, b in zip(ranks, ranks[1:]))


def test_identity_system():
    y = np.array([1.0, -2.0, 0.5])
    np.testing.assert_allclose(solve_regularized(hermitian_eig(np.eye(3)), y, 0).coefficients, y)


def test_eigenvector_right_hand_side(fe40):
    V = _f(fe40.vectors)
    s = fe40.values_float()
    for k in (0, 20, 39):
        y = s[k] * V[:, k]
        x = solve_regularized(fe40, y, 1e-8).coefficients
        ref = V[:, k] if s[k] > 1e-8 else np.zeros(40)
        np.testing.assert_allclose(x, ref, atol=1e-7)


def test_regularized_solution_bounds_and_orthogonality(fe40):
    rng = np.random.default_rng(5)
    y = rng.standard_normal(40)
    sol = solve_regularized(fe40, y, 1e-8)
    assert np.linalg.norm(sol.coefficients) <= np.linalg.norm(y) / sol.sigma_min_kept * (1 + 1e-12)
    V = _f(fe40.vectors)
    dropped = fe40.values_float() <= 1e-8
    leak = np.max(np.abs(V[:, dropped].conj().T @ sol.coefficients))
    assert leak <= 1e-13 * np.linalg.norm(sol.coefficients)


def test_rhs_shape_checked(fe40):
    with pytest.raises(ValueError):
        solve_regularized(fe40, np.ones(39), 1e-8)


def test_regularized_converges_to_exact_as_eps_shrinks():
    bits = 256
    sys = bind_target(assemble_square(FE, 20, bits), get_target("runge25"))
    fact = hermitian_eig(sys.matrix, bits)
    x = _f(solve_regularized(fact, sys.rhs, 0).coefficients)
    # the discarded components are orthogonal, so the 2-norm gap shrinks monotonically
    gaps = [np.linalg.norm(_f(solve_regularized(fact, sys.rhs, e).coefficients) - x)
            for e in (1e-6, 1e-10, 1e-14, 1e-20)]
    assert all(b <= a for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] == 0


def test_runge16_n40_coefficient_norm():
    bits = 512
    sys = bind_target(assemble_square(FE, 40, bits), get_target("runge16"))
    x = solve_regularized(hermitian_eig(sys.matrix, bits), sys.rhs, 0).coefficients
    assert float(_mp.norm(x, bits)) == pytest.approx(3.64e4, rel=0.01)


# ---------------------------------------------------------------- exact solves

def test_exact_solve_orthonormal_block():
    spec = FrameSpec.augmented_fourier(4)
    sys = bind_target(assemble_square(spec, 4, 128), get_target("exp"))
    np.testing.assert_allclose(_f(solve_exact(sys)), _f(sys.rhs), atol=1e-30)


def test_exact_solve_refuses_low_precision():
    sys = bind_target(assemble_square(FE, 40), get_target("exp"))
    with pytest.raises(PrecisionError, match="needs at least"):
        solve_exact(sys)


def test_exact_solve_residual():
    bits = 256
    sys = bind_target(assemble_square(FE, 40, bits), get_target("runge25"))
    x = solve_exact(sys)
    with gmpy2.context(precision=bits):
        r = _mp.matmul(sys.matrix, x, bits) - sys.rhs
        assert _mp.norm(r, bits) <= gmpy2.mpfr(2) ** (-bits / 2) * _mp.norm(x, bits)


def test_exact_solve_synthetic_lower_bound():
    N = 60
    sys = bind_target(assemble_square(AUGON, N, 256), get_target("synthetic-p51"))
    nx = float(_mp.norm(solve_exact(sys), 256))
    assert nx >= math.pi * N / math.sqrt(15) - 1e-6


def test_exact_solve_exp_n80_order_of_magnitude():
    bits = 512
    sys = bind_target(assemble_square(FE, 80, bits), get_target("exp"))
    nx = float(_mp.norm(solve_exact(sys), bits))
    assert 1.86 / 10 <= nx <= 1.86 * 10


def test_exact_solve_needs_rhs():
    with pytest.raises(ValueError):
        solve_exact(assemble_square(FE, 4, 128))


# ---------------------------------------------------------------- conditioning

def test_condition_bound_identity():
    assert tsvd_condition_bound(hermitian_eig(np.eye(4)), 0.5) == pytest.approx(1.0)


def test_condition_bound_zero_map():
    assert tsvd_condition_bound(hermitian_eig(np.eye(4)), 1.0) == 0.0


def test_condition_bound_fe30():
    fact = hermitian_eig(assemble_square(FE, 30).matrix)
    v = fact.values_float()
    assert tsvd_condition_bound(fact, 1e-8) == pytest.approx(1 / math.sqrt(v[v > 1e-8][-1]), rel=1e-15)


def test_condition_bound_rejects_rectangular():
    with pytest.raises(ValueError):
        tsvd_condition_bound(rect_svd(np.vstack([np.eye(2), np.eye(2)])), 0.1)


def test_perturbation_amplification_within_bound():
    bits, N, eps = 128, 30, 1e-8
    G = assemble_square(FE, N, bits).matrix
    fact = hermitian_eig(G, bits)
    bound = float(tsvd_condition_bound(fact, eps))
    rng = np.random.default_rng(0x5EED)
    worst = 0.0
    for _ in range(200):
        d = rng.standard_normal(N) + 1j * rng.standard_normal(N)
        d = _mp.asarray(d / np.linalg.norm(d), bits)
        x = solve_regularized(fact, d, eps).coefficients
        with gmpy2.context(precision=bits):
            q = _mp.vdot(x, _mp.matmul(G, x, bits), bits)
        worst = max(worst, math.sqrt(float(q.real)))
    assert worst <= (1 + 1e-8) * bound
    assert worst <= (1 + 1e-8) / math.sqrt(eps)
