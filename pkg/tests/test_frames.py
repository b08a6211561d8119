from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import legendre as npleg
from scipy import integrate

from frameward.frames import (
    EXTRA,
    AdmissibilityError,
    DomainError,
    FrameIndex,
    FrameSpec,
    evaluate,
    index_set,
    pair_inner_product,
)

FE = FrameSpec.fe(2.0)
AUGF = FrameSpec.augmented_fourier(4)
WLEG = FrameSpec.weighted_legendre(0.5)
AUGON = FrameSpec.augmented_orthonormal()


def _admissible(spec, k):
    """The k-th admissible truncation size (k >= 0)."""
    if spec.family.value == "augf":
        return spec.K + 2 * k
    if spec.family.value == "augon":
        return k + 1
    return 2 * (k + 1)


# ---------------------------------------------------------------- index sets

def test_fe_index_set_n4():
    idx = index_set(FE, 4)
    assert len(idx) == 4
    assert {i.tag for i in idx} == {"fourier"}
    assert sorted(i.n for i in idx) == [-2, -1, 0, 1]


def test_augf_index_set_k2_n6():
    idx = index_set(FrameSpec.augmented_fourier(2), 6)
    assert idx[:2] == [FrameIndex("legendre", 1), FrameIndex("legendre", 2)]
    assert sorted(i.n for i in idx[2:]) == [-2, -1, 0, 1]
    assert {i.tag for i in idx[2:]} == {"fourier"}


def test_wleg_smallest_truncation():
    assert index_set(WLEG, 2) == [FrameIndex("legendre", 1), FrameIndex("weighted", 1)]


def test_augon_puts_extra_first():
    assert index_set(AUGON, 4) == [EXTRA] + [FrameIndex("ortho", n) for n in (1, 2, 3)]


@pytest.mark.parametrize("spec, N, rule", [
    (FE, 5, "even"),
    (WLEG, 3, "even"),
    (AUGF, 2, "N >= K"),
    (AUGF, 7, "N - K even"),
    (FE, 0, "positive"),
])
def test_inadmissible_sizes_name_the_rule(spec, N, rule):
    with pytest.raises(AdmissibilityError, match=rule):
        index_set(spec, N)


@pytest.mark.parametrize("spec", [FE, AUGF, WLEG, AUGON], ids=lambda s: s.family.value)
@given(a=st.integers(0, 30), b=st.integers(0, 30))
@settings(max_examples=25, deadline=None)
def test_index_sets_are_nested(spec, a, b):
    n1, n2 = sorted((_admissible(spec, a), _admissible(spec, b)))
    short, long_ = index_set(spec, n1), index_set(spec, n2)
    assert len(short) == n1 and len(long_) == n2
    assert long_[:n1] == short
    assert len(set(long_)) == n2


def test_fe_prefix_is_symmetric_range():
    for m in range(1, 20):
        assert sorted(i.n for i in index_set(FE, 2 * m)) == list(range(-m, m))


@pytest.mark.parametrize("kwargs", [{"T": 1.0}, {"T": 0.5}])
def test_fe_requires_t_above_one(kwargs):
    with pytest.raises(ValueError):
        FrameSpec.fe(**kwargs)


def test_family_parameter_validation():
    with pytest.raises(ValueError):
        FrameSpec.augmented_fourier(0)
    with pytest.raises(ValueError):
        FrameSpec.weighted_legendre(1.0)


def test_upper_bounds_per_family():
    assert [s.upper_bound for s in (FE, AUGF, WLEG, AUGON)] == [1.0, 2.0, 3.0, 2.0]
    assert FrameSpec.weighted_legendre(0.25).upper_bound == pytest.approx(1 + math.sqrt(2))


# ---------------------------------------------------------------- evaluation

def test_fe_constant_element():
    assert evaluate(FE, FrameIndex("fourier", 0), 0.3) == pytest.approx(2 ** -0.5, rel=1e-15)


def test_fe_element_formula():
    t = np.linspace(-0.5, 0.5, 11)
    got = evaluate(FE, FrameIndex("fourier", 3), t)
    np.testing.assert_allclose(got, np.exp(3j * np.pi * t) / math.sqrt(2), rtol=0, atol=1e-15)


def test_augf_legendre_at_endpoint():
    assert evaluate(AUGF, FrameIndex("legendre", 1), 1.0) == pytest.approx(math.sqrt(1.5), rel=1e-15)


@pytest.mark.parametrize("k", [1, 2, 5, 12])
def test_augf_legendre_matches_numpy_legval(k):
    t = np.linspace(-1, 1, 17)
    ref = math.sqrt(k + 0.5) * npleg.legval(t, [0] * k + [1])
    np.testing.assert_allclose(np.real(evaluate(AUGF if k <= 4 else FrameSpec.augmented_fourier(k),
                                                FrameIndex("legendre", k), t)), ref, atol=1e-13)


@pytest.mark.parametrize("n", [1, 2, 3, 7])
def test_wleg_weighted_element_matches_direct_product(n):
    # element n is w(t) * sqrt(n - 1/2) * P_{n-1}(t)
    t = 0.5
    ref = (1 + t) ** 0.5 * math.sqrt(n - 0.5) * npleg.legval(t, [0] * (n - 1) + [1])
    assert evaluate(WLEG, FrameIndex("weighted", n), t) == pytest.approx(ref, rel=1e-14, abs=1e-15)


def test_wleg_second_weighted_element_value():
    # sqrt(1.5) * sqrt(1.5) * P_1(0.5)
    assert evaluate(WLEG, FrameIndex("weighted", 2), 0.5) == pytest.approx(0.75, rel=1e-15)


def test_evaluate_outside_domain_raises():
    with pytest.raises(DomainError):
        evaluate(FE, FrameIndex("fourier", 1), 0.6)
    with pytest.raises(DomainError):
        evaluate(WLEG, FrameIndex("legendre", 1), np.array([0.0, -1.01]))


def test_evaluate_rejects_foreign_index():
    with pytest.raises(ValueError):
        evaluate(FE, FrameIndex("legendre", 1), 0.0)
    with pytest.raises(ValueError):
        evaluate(AUGF, FrameIndex("legendre", 5), 0.0)


def test_augon_has_no_point_values():
    with pytest.raises(TypeError):
        evaluate(AUGON, FrameIndex("ortho", 1), 0.0)


def test_evaluate_multiprecision_agrees_with_double():
    import gmpy2

    with gmpy2.context(precision=200):
        t = gmpy2.mpfr("0.3")
    v = evaluate(WLEG, FrameIndex("weighted", 4), t, 200)
    assert float(v) == pytest.approx(evaluate(WLEG, FrameIndex("weighted", 4), 0.3), rel=1e-15)


# ---------------------------------------------------------------- inner products

def test_fe_diagonal_entry():
    assert pair_inner_product(FE, FrameIndex("fourier", 3), FrameIndex("fourier", 3)) == pytest.approx(0.5)


def test_fe_first_off_diagonal_against_quadrature():
    q, _ = integrate.quad(lambda t: 0.5 * math.cos(math.pi * t), -0.5, 0.5, epsabs=1e-15)
    v = pair_inner_product(FE, FrameIndex("fourier", 0), FrameIndex("fourier", 1))
    assert v == pytest.approx(1 / math.pi, rel=1e-15)
    assert v == pytest.approx(q, rel=1e-14)


def test_augf_fourier_elements_orthonormal():
    assert pair_inner_product(AUGF, FrameIndex("fourier", 2), FrameIndex("fourier", -3)) == 0
    assert pair_inner_product(AUGF, FrameIndex("fourier", 2), FrameIndex("fourier", 2)) == 1


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_augf_legendre_orthogonal_to_constant(k):
    v = pair_inner_product(AUGF, FrameIndex("legendre", k), FrameIndex("fourier", 0))
    assert abs(v) < 1e-15


def _quad_oracle(spec, i, j):
    """<phi_j, phi_i> by scipy quadrature (algebraic weight handled by QUADPACK)."""
    def prod(t):
        E = [complex(evaluate(spec, k, t)) for k in (i, j)]
        return E[1] * np.conj(E[0])

    a, b = spec.domain.a, spec.domain.b
    opts = dict(epsabs=1e-15, epsrel=1e-14, limit=400)
    if spec.family.value == "wleg" and "weighted" in (i.tag, j.tag):
        beta = spec.alpha * ((i.tag == "weighted") + (j.tag == "weighted"))

        def strip(t):
            # the unweighted polynomial parts; the weight goes to QUADPACK
            E = [complex(evaluate(spec, FrameIndex("legendre", k.n), t)) for k in (i, j)]
            return E[1] * np.conj(E[0])

        re, _ = integrate.quad(lambda t: strip(t).real, a, b, weight="alg", wvar=(beta, 0.0), **opts)
        return re
    re, _ = integrate.quad(lambda t: prod(t).real, a, b, **opts)
    im, _ = integrate.quad(lambda t: prod(t).imag, a, b, **opts)
    return re + 1j * im


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
@pytest.mark.parametrize("spec", [FE, AUGF, WLEG], ids=lambda s: s.family.value)
def test_inner_products_match_independent_quadrature(spec):
    rng = np.random.default_rng(7)
    idx = index_set(spec, 24)
    worst = 0.0
    for a, b in rng.integers(0, len(idx), size=(50, 2)):
        i, j = idx[a], idx[b]
        got = complex(pair_inner_product(spec, i, j))
        ref = _quad_oracle(spec, i, j)
        scale = max(abs(ref), math.sqrt(abs(complex(pair_inner_product(spec, i, i)))
                                        * abs(complex(pair_inner_product(spec, j, j)))))
        worst = max(worst, abs(got - ref) / scale)
    assert worst <= 1e-13


@pytest.mark.parametrize("spec", [FE, AUGF, WLEG, AUGON], ids=lambda s: s.family.value)
@given(data=st.data())
@settings(max_examples=30, deadline=None)
def test_inner_product_hermitian(spec, data):
    idx = index_set(spec, _admissible(spec, 10))
    i = data.draw(st.sampled_from(idx))
    j = data.draw(st.sampled_from(idx))
    a = complex(pair_inner_product(spec, i, j))
    b = complex(pair_inner_product(spec, j, i))
    assert a == pytest.approx(b.conjugate(), abs=1e-16)


def test_augon_extra_has_unit_norm():
    assert float(pair_inner_product(AUGON, EXTRA, EXTRA, 256)) == pytest.approx(1.0, abs=1e-30)


def test_augon_extra_against_ortho_is_law_coefficient():
    v = pair_inner_product(AUGON, EXTRA, FrameIndex("ortho", 3))
    assert v == pytest.approx(math.sqrt(90) / math.pi ** 2 / 9, rel=1e-15)


def test_wleg_multiprecision_inner_product_refines_double():
    i, j = FrameIndex("weighted", 3), FrameIndex("legendre", 6)
    lo = pair_inner_product(WLEG, i, j)
    hi = pair_inner_product(WLEG, i, j, 256)
    assert float(hi) == pytest.approx(lo, rel=1e-14, abs=1e-16)


def test_fe_frame_is_tight():
    # sum_{|n| <= 2000} |<f, phi_n>|^2 approaches ||f||^2 from below
    rng = np.random.default_rng(11)
    amps = rng.standard_normal(4)

    def f(t):
        return np.cos(np.pi * t) ** 6 * sum(a * np.cos((k + 1) * 3.1 * t) for k, a in enumerate(amps))

    # f vanishes smoothly at +-1/2, so the zero-extended coefficients come from an FFT on (-1, 1)
    L = 2 ** 15
    t = -1 + 2 * np.arange(L) / L
    g = np.where(np.abs(t) <= 0.5, f(t), 0.0)
    c = np.fft.fft(g) * (2 / L) / math.sqrt(2)  # c[n] = <g, exp(i pi n t)/sqrt 2>, with a phase
    n = np.fft.fftfreq(L, 1 / L)
    norm_sq, _ = integrate.quad(lambda s: f(s) ** 2, -0.5, 0.5, epsabs=1e-15, limit=200)
    sums = [np.sum(np.abs(c[np.abs(n) <= m]) ** 2) for m in (10, 100, 2000)]
    assert sums[0] <= sums[1] <= sums[2] <= norm_sq * (1 + 1e-12)
    assert sums[2] == pytest.approx(norm_sq, rel=1e-9)
